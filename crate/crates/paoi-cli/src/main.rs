//! Command-line front end: sweep experiments, analytic point queries, and
//! standalone simulator runs.

mod experiment;
mod query;
mod simulate;
mod spec;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use std::fs;
use std::path::{Path, PathBuf};

use experiment::{run_experiment, Manifest};
use spec::{preset, preset_names, ExperimentSpec, Overrides, ResolvedExperiment};

#[derive(Parser)]
#[command(
    name = "paoi",
    version,
    about = "Peak-age statistics for slotted random-access networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a parameter sweep from a preset name, a TOML spec, or a manifest.
    Experiment {
        /// Preset name, spec file (.toml), or manifest file (.json).
        target: String,
        /// Override the simulation seed from the spec.
        #[arg(long)]
        seed: Option<u64>,
        /// Directory for the CSV tables and the manifest.
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
        /// Skip all simulation; write analytic columns only.
        #[arg(long)]
        no_sim: bool,
    },
    /// Evaluate one analytic quantity and print its intermediates.
    #[command(subcommand)]
    Query(QueryCommand),
    /// Run the discrete-event simulator from a TOML config.
    Simulate {
        /// Simulator config file (.toml).
        config: PathBuf,
        /// Override the seed from the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Directory for the JSON summary.
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
    /// List the built-in experiment presets.
    Presets,
}

#[derive(Subcommand)]
enum QueryCommand {
    /// Spatial moment of the conditional mean peak age.
    Moment(query::MomentQuery),
    /// Spatial CDF of the conditional mean peak age at a point.
    Cdf(query::CdfQuery),
    /// Fraction of links whose success probability exceeds a threshold.
    Meta(query::MetaQuery),
    /// Dominant-system interferer activity: moments and CDF.
    Activity(query::ActivityQuery),
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Err(e) = dispatch(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Experiment {
            target,
            seed,
            out_dir,
            no_sim,
        } => cmd_experiment(&target, Overrides { seed, no_sim }, &out_dir),
        Command::Query(q) => match q {
            QueryCommand::Moment(q) => q.run(),
            QueryCommand::Cdf(q) => q.run(),
            QueryCommand::Meta(q) => q.run(),
            QueryCommand::Activity(q) => q.run(),
        },
        Command::Simulate {
            config,
            seed,
            out_dir,
        } => cmd_simulate(&config, seed, &out_dir),
        Command::Presets => {
            for name in preset_names() {
                println!("{name}");
            }
            Ok(())
        }
    }
}

fn cmd_experiment(target: &str, overrides: Overrides, out_dir: &Path) -> Result<()> {
    let resolved = load_target(target, &overrides)?;
    println!(
        "experiment {}: sweeping {} over {} points (config hash {})",
        resolved.name,
        resolved.parameter,
        resolved.grid.len(),
        &resolved.config_hash()[..12]
    );
    if resolved.simulation.is_none() {
        println!("simulation disabled; analytic columns only");
    }
    let report = run_experiment(&resolved, out_dir)?;
    for path in &report.csv_paths {
        println!("wrote {}", path.display());
    }
    println!("wrote {}", report.manifest_path.display());
    Ok(())
}

/// Resolve an experiment target: preset name first, then a spec or manifest
/// file by extension. Manifests are verified against their stored hash, so a
/// hand-edited file cannot masquerade as the run that produced it.
fn load_target(target: &str, overrides: &Overrides) -> Result<ResolvedExperiment> {
    if let Some(spec) = preset(target) {
        return spec.resolve(overrides);
    }
    let path = Path::new(target);
    if !path.exists() {
        bail!(
            "{target:?} is neither a built-in preset ({}) nor an existing file",
            preset_names().join(", ")
        );
    }
    let text =
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    if path.extension().is_some_and(|e| e == "json") {
        let manifest: Manifest = serde_json::from_str(&text)
            .with_context(|| format!("parsing manifest {}", path.display()))?;
        let recomputed = manifest.resolved.config_hash();
        if recomputed != manifest.config_hash {
            bail!(
                "manifest hash mismatch in {}: stored {}, recomputed {} (was the file edited?)",
                path.display(),
                &manifest.config_hash[..12.min(manifest.config_hash.len())],
                &recomputed[..12]
            );
        }
        let mut resolved = manifest.resolved;
        // Overrides change the plan, and therefore the hash of the new run.
        if let Some(seed) = overrides.seed {
            if let Some(sim) = resolved.simulation.as_mut() {
                sim.seed = seed;
            }
        }
        if overrides.no_sim {
            resolved.simulation = None;
        }
        Ok(resolved)
    } else {
        let spec: ExperimentSpec = toml::from_str(&text)
            .with_context(|| format!("parsing spec {}", path.display()))?;
        spec.resolve(overrides)
    }
}

fn cmd_simulate(config: &Path, seed: Option<u64>, out_dir: &Path) -> Result<()> {
    let report = simulate::run_simulate(config, seed, out_dir)?;
    let s = &report.summary;
    println!(
        "simulated {} links ({} kept) over a {}-slot window",
        s.n_links, s.n_links_kept, s.measure_slots
    );
    if let (Some(np), Some(p)) = (s.mean_peak_np, s.mean_peak_p) {
        println!("mean peak age: non-preemptive {np}  preemptive {p}");
    }
    println!("mean activity: {}", s.mean_activity);
    println!("wrote {}", report.out_path.display());
    Ok(())
}
