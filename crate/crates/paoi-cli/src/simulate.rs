//! Standalone simulator runs from a TOML config, summarized to JSON.

use anyhow::{Context, Result};
use paoi_core::model::{NetworkParams, TrafficParams};
use paoi_sim::config::{Mode, SimConfig};
use paoi_sim::run::run as run_sim;
use paoi_sim::summary::SpatialSummary;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::{Path, PathBuf};

use crate::spec::{defaults, hex_digest, SirThreshold};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct NetworkSection {
    pub lambda_sd: f64,
    pub r_dist: f64,
    pub alpha: f64,
    pub beta: SirThreshold,
    pub xi: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct TrafficSection {
    pub lambda_a: f64,
}

/// A simulator run as written in a config file. Scalar keys must come ahead
/// of the two parameter tables (TOML scoping).
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct SimulateSpec {
    #[serde(default)]
    pub mode: Mode,
    pub window_side: Option<f64>,
    pub warmup_slots: Option<u64>,
    pub measure_slots: Option<u64>,
    pub seed: Option<u64>,
    pub min_deliveries: Option<u64>,
    #[serde(default)]
    pub per_link_output: bool,
    pub network: NetworkSection,
    pub traffic: TrafficSection,
}

impl SimulateSpec {
    pub fn to_config(&self, seed_override: Option<u64>) -> Result<SimConfig> {
        let n = &self.network;
        let params = NetworkParams::new(n.lambda_sd, n.r_dist, n.alpha, n.beta.0, n.xi)?;
        let traffic = TrafficParams::new(self.traffic.lambda_a)?;
        let mut cfg = SimConfig::new(params, traffic);
        cfg.mode = self.mode;
        cfg.window_side = self.window_side;
        if let Some(v) = self.warmup_slots {
            cfg.warmup_slots = v;
        }
        if let Some(v) = self.measure_slots {
            cfg.measure_slots = v;
        }
        cfg.seed = seed_override.or(self.seed).unwrap_or(defaults::SEED);
        if let Some(v) = self.min_deliveries {
            cfg.min_deliveries = v;
        }
        cfg.per_link_output = self.per_link_output;
        Ok(cfg)
    }
}

/// The document written next to the run: hash, echoed config, summary.
#[derive(Serialize)]
#[serde(rename_all = "kebab-case")]
struct RunDocument<'a> {
    config_hash: &'a str,
    config: &'a SimConfig,
    summary: &'a SpatialSummary,
}

pub struct SimulateReport {
    pub out_path: PathBuf,
    pub summary: SpatialSummary,
}

pub fn run_simulate(
    config_path: &Path,
    seed_override: Option<u64>,
    out_dir: &Path,
) -> Result<SimulateReport> {
    let text = fs::read_to_string(config_path)
        .with_context(|| format!("reading {}", config_path.display()))?;
    let spec: SimulateSpec =
        toml::from_str(&text).with_context(|| format!("parsing {}", config_path.display()))?;
    let cfg = spec.to_config(seed_override)?;
    let hash = hex_digest(serde_json::to_string(&cfg)?.as_bytes());
    let output = run_sim(&cfg)?;
    let doc = RunDocument {
        config_hash: &hash,
        config: &cfg,
        summary: &output.summary,
    };
    fs::create_dir_all(out_dir)
        .with_context(|| format!("creating output directory {}", out_dir.display()))?;
    let stem = config_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "run".to_string());
    let out_path = out_dir.join(format!("{stem}-summary.json"));
    let mut json = serde_json::to_string_pretty(&doc)?;
    json.push('\n');
    fs::write(&out_path, json).with_context(|| format!("writing {}", out_path.display()))?;
    Ok(SimulateReport {
        out_path,
        summary: output.summary,
    })
}
