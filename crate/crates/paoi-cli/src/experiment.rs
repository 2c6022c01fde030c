//! Experiment execution: per-point analytics, optional simulation, and the
//! CSV/manifest output files.

use anyhow::{Context, Result};
use paoi_core::analytic::{activity_cdf_dominant, two_step, MuLaw, TwoStep};
use paoi_core::model::{Discipline, NetworkParams, TrafficParams};
use paoi_core::numerics::SeriesControl;
use paoi_core::paoi::{
    cdf_mean_paoi, mean_paoi_np, mean_paoi_p, moment_paoi, MomentSource, SnmPath, SpatialContext,
};
use paoi_sim::config::{Mode, SimConfig};
use paoi_sim::run::run as run_sim;
use paoi_sim::summary::SpatialSummary;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;

use crate::spec::{OutputKind, ResolvedExperiment, ResolvedSim};

/// Number of abscissa points for mean-peak-age CDF curves.
const CDF_POINTS: usize = 81;
/// Number of abscissa points for activity CDF curves.
const ACTIVITY_POINTS: usize = 100;

/// The manifest written next to the CSV tables: the hash, the full resolved
/// plan it covers, and the files produced. Feeding it back to `experiment`
/// reproduces the tables byte for byte.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct Manifest {
    pub config_hash: String,
    pub resolved: ResolvedExperiment,
    pub outputs: Vec<String>,
}

pub struct ExperimentReport {
    pub manifest_path: PathBuf,
    pub csv_paths: Vec<PathBuf>,
}

/// First and standard-deviation spatial statistics plus empirical
/// counterparts for one (grid point, discipline) pair.
struct DisciplineRow {
    discipline: Discipline,
    p1: f64,
    sd: f64,
    sim_p1: Option<f64>,
    sim_p1_se: Option<f64>,
    sim_sd: Option<f64>,
    sim_sd_se: Option<f64>,
    n_kept: Option<usize>,
}

/// One abscissa of a CDF curve.
struct CurveRow {
    x: f64,
    analytic: f64,
    sim: Option<f64>,
    sim_se: Option<f64>,
    n: Option<usize>,
}

struct PointOutput {
    per_disc: Vec<DisciplineRow>,
    cdf_curves: Vec<(Discipline, Vec<CurveRow>)>,
    activity_curve: Vec<CurveRow>,
}

struct PointSims {
    original: Option<SpatialSummary>,
    dominant: Option<SpatialSummary>,
}

pub fn run_experiment(resolved: &ResolvedExperiment, out_dir: &Path) -> Result<ExperimentReport> {
    fs::create_dir_all(out_dir)
        .with_context(|| format!("creating output directory {}", out_dir.display()))?;
    let hash = resolved.config_hash();
    let points = compute_all_points(resolved)?;

    let mut csv_paths = Vec::new();
    let mut output_names = Vec::new();
    for &kind in &resolved.outputs {
        let mut csv = CsvBuilder::new(&hash, kind.is_curve());
        for (point, &value) in points.iter().zip(&resolved.grid) {
            append_rows(&mut csv, kind, value, point);
        }
        let file_name = format!("{}-{}.csv", resolved.name, kind.file_stem());
        let path = out_dir.join(&file_name);
        fs::write(&path, csv.finish())
            .with_context(|| format!("writing {}", path.display()))?;
        csv_paths.push(path);
        output_names.push(file_name);
    }

    let manifest = Manifest {
        config_hash: hash,
        resolved: resolved.clone(),
        outputs: output_names,
    };
    let manifest_path = out_dir.join(format!("{}-manifest.json", resolved.name));
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    fs::write(&manifest_path, text)
        .with_context(|| format!("writing {}", manifest_path.display()))?;
    Ok(ExperimentReport {
        manifest_path,
        csv_paths,
    })
}

/// Evaluate every grid point, farming independent points out to worker
/// threads. Results are reassembled in grid order, so the output does not
/// depend on scheduling.
fn compute_all_points(resolved: &ResolvedExperiment) -> Result<Vec<PointOutput>> {
    let n = resolved.grid.len();
    let workers = thread::available_parallelism()
        .map(|w| w.get())
        .unwrap_or(1)
        .min(n);
    if workers <= 1 {
        return resolved
            .grid
            .iter()
            .map(|&v| compute_point(resolved, v))
            .collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<(usize, Result<PointOutput>)>> = Mutex::new(Vec::with_capacity(n));
    thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= n {
                    break;
                }
                let result = compute_point(resolved, resolved.grid[i]);
                slots.lock().expect("worker panicked").push((i, result));
            });
        }
    });
    let mut pairs = slots.into_inner().expect("worker panicked");
    pairs.sort_by_key(|(i, _)| *i);
    pairs.into_iter().map(|(_, r)| r).collect()
}

fn compute_point(resolved: &ResolvedExperiment, value: f64) -> Result<PointOutput> {
    let (params, traffic) = resolved.point_params(value)?;
    let ctrl = SeriesControl::default();
    let ts = two_step(&params, &traffic, &ctrl)
        .with_context(|| format!("two-step bound at {} = {value}", resolved.parameter))?;
    let xi = params.xi;

    let want = |k: OutputKind| resolved.outputs.contains(&k);
    let need_peak = want(OutputKind::P1) || want(OutputKind::StdDev) || want(OutputKind::Cdf);
    let need_activity = want(OutputKind::ActivityCdf);

    let sims = match &resolved.simulation {
        Some(s) => run_point_sims(&params, &traffic, s, need_peak, need_activity)?,
        None => PointSims {
            original: None,
            dominant: None,
        },
    };

    let mut per_disc = Vec::new();
    let mut cdf_curves = Vec::new();
    if need_peak {
        for &disc in &resolved.disciplines {
            let (p1, var) = spatial_stats(&ts, &traffic, xi, disc, &ctrl)?;
            let sd = if var.is_finite() {
                var.max(0.0).sqrt()
            } else {
                f64::INFINITY
            };
            let sim = sims.original.as_ref();
            let (sim_p1, sim_p1_se, sim_sd, sim_sd_se, n_kept) = match sim {
                Some(sum) => {
                    let (m, se) = match disc {
                        Discipline::NonPreemptive => (sum.mean_peak_np, sum.se_peak_np),
                        Discipline::Preemptive => (sum.mean_peak_p, sum.se_peak_p),
                    };
                    let (sd_hat, sd_se) = sample_sd_and_se(sum.kept_peaks(disc));
                    (m, se, sd_hat, sd_se, Some(sum.n_links_kept))
                }
                None => (None, None, None, None, None),
            };
            if want(OutputKind::Cdf) {
                let curve = cdf_curve(disc, &ts.step2_law, xi, &traffic, p1, sd, sim)?;
                cdf_curves.push((disc, curve));
            }
            per_disc.push(DisciplineRow {
                discipline: disc,
                p1,
                sd,
                sim_p1,
                sim_p1_se,
                sim_sd,
                sim_sd_se,
                n_kept,
            });
        }
    }

    let activity_curve = if need_activity {
        activity_curve(&params, &traffic, &ts.step1_law, sims.dominant.as_ref())?
    } else {
        Vec::new()
    };

    Ok(PointOutput {
        per_disc,
        cdf_curves,
        activity_curve,
    })
}

/// Spatial first moment and variance of the conditional mean peak age from
/// the step-two bound. The exact-moment series carries the evaluation; mixed
/// moments whose series cancel away (deep medium-access probabilities, slow
/// damping) fall back one by one to quadrature against the fitted law, with
/// a logged warning, rather than failing the whole sweep. The pure inverse
/// success moments always stay on the exact store.
fn spatial_stats(
    ts: &TwoStep,
    traffic: &TrafficParams,
    xi: f64,
    discipline: Discipline,
    ctrl: &SeriesControl,
) -> Result<(f64, f64)> {
    let ctx = SpatialContext::new(traffic, xi, MomentSource::Moments(&ts.step2_moments))?
        .with_fallback_law(&ts.step2_law);
    let p1 = moment_paoi(1, discipline, &ctx, SnmPath::Auto, ctrl)?;
    let p2 = moment_paoi(2, discipline, &ctx, SnmPath::Auto, ctrl)?;
    let var = if p1.is_finite() && p2.is_finite() {
        p2 - p1 * p1
    } else {
        f64::INFINITY
    };
    Ok((p1, var))
}

/// Sample standard deviation and its approximate standard error
/// (`sd / sqrt(2 (n - 1))`, from the normal sampling theory of s).
fn sample_sd_and_se(values: &[f64]) -> (Option<f64>, Option<f64>) {
    if values.len() < 2 {
        return (None, None);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    let sd = var.sqrt();
    (Some(sd), Some(sd / (2.0 * (n - 1.0)).sqrt()))
}

/// CDF curve of the conditional mean peak age for one discipline: abscissas
/// span the discipline's floor (a perfect link) up to five standard
/// deviations past the mean.
fn cdf_curve(
    discipline: Discipline,
    law: &MuLaw,
    xi: f64,
    traffic: &TrafficParams,
    p1: f64,
    sd: f64,
    sim: Option<&SpatialSummary>,
) -> Result<Vec<CurveRow>> {
    let lo = match discipline {
        Discipline::NonPreemptive => mean_paoi_np(1.0, xi, traffic)?,
        Discipline::Preemptive => mean_paoi_p(1.0, xi, traffic)?,
    };
    let hi = if p1.is_finite() && sd.is_finite() {
        p1 + 5.0 * sd
    } else if p1.is_finite() {
        4.0 * p1
    } else {
        10.0 * lo
    };
    let hi = hi.max(lo * 1.25);
    let kept = sim.map(|s| s.kept_peaks(discipline)).filter(|v| !v.is_empty());
    let mut rows = Vec::with_capacity(CDF_POINTS);
    for i in 0..CDF_POINTS {
        let x = lo + (hi - lo) * i as f64 / (CDF_POINTS - 1) as f64;
        let analytic = cdf_mean_paoi(x, discipline, law, xi, traffic)?;
        let (sim_f, sim_se, n) = empirical_cdf_at(kept, x);
        rows.push(CurveRow {
            x,
            analytic,
            sim: sim_f,
            sim_se,
            n,
        });
    }
    Ok(rows)
}

/// Activity CDF curve for the saturated-interferer system on a uniform grid
/// over `(0, xi]`. The empirical side uses every link (activity needs no
/// delivery count to be well defined).
fn activity_curve(
    params: &NetworkParams,
    traffic: &TrafficParams,
    step1_law: &MuLaw,
    sim: Option<&SpatialSummary>,
) -> Result<Vec<CurveRow>> {
    let xi = params.xi;
    let acts = sim.map(|s| s.activities()).filter(|v| !v.is_empty());
    let mut rows = Vec::with_capacity(ACTIVITY_POINTS);
    for i in 1..=ACTIVITY_POINTS {
        let t = xi * i as f64 / ACTIVITY_POINTS as f64;
        let analytic = activity_cdf_dominant(t, params, traffic, step1_law)?;
        let (sim_f, sim_se, n) = empirical_cdf_at(acts, t);
        rows.push(CurveRow {
            x: t,
            analytic,
            sim: sim_f,
            sim_se,
            n,
        });
    }
    Ok(rows)
}

/// Empirical CDF value at `x` with its binomial standard error.
fn empirical_cdf_at(sample: Option<&[f64]>, x: f64) -> (Option<f64>, Option<f64>, Option<usize>) {
    match sample {
        Some(values) => {
            let n = values.len();
            let f = values.iter().filter(|&&v| v <= x).count() as f64 / n as f64;
            (
                Some(f),
                Some((f * (1.0 - f) / n as f64).sqrt()),
                Some(n),
            )
        }
        None => (None, None, None),
    }
}

/// Run the simulations one grid point needs. Both modes reuse the same seed,
/// hence the same node placement, so the empirical columns of different
/// output tables describe a single network realization.
fn run_point_sims(
    params: &NetworkParams,
    traffic: &TrafficParams,
    sim: &ResolvedSim,
    need_original: bool,
    need_dominant: bool,
) -> Result<PointSims> {
    let mut base = SimConfig::new(*params, *traffic);
    base.window_side = sim.window_side;
    base.warmup_slots = sim.warmup_slots;
    base.measure_slots = sim.measure_slots;
    base.seed = sim.seed;
    base.min_deliveries = sim.min_deliveries;
    let original = if need_original {
        Some(run_sim(&base)?.summary)
    } else {
        None
    };
    let dominant = if need_dominant {
        let mut cfg = base.clone();
        cfg.mode = Mode::DominantStep1;
        Some(run_sim(&cfg)?.summary)
    } else {
        None
    };
    Ok(PointSims { original, dominant })
}

// ---------------------------------------------------------------------------
// CSV assembly
// ---------------------------------------------------------------------------

struct CsvBuilder {
    buf: String,
}

impl CsvBuilder {
    fn new(hash: &str, curve: bool) -> Self {
        let mut buf = format!("# config-hash: {hash}\n");
        buf.push_str(if curve {
            "swept_value,discipline,x,analytic_value,simulated_value,simulated_se,n_links\n"
        } else {
            "swept_value,discipline,analytic_value,simulated_value,simulated_se,n_links\n"
        });
        CsvBuilder { buf }
    }

    fn row(&mut self, cells: &[String]) {
        self.buf.push_str(&cells.join(","));
        self.buf.push('\n');
    }

    fn finish(self) -> String {
        self.buf
    }
}

fn fmt_f(v: f64) -> String {
    format!("{v}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f).unwrap_or_default()
}

fn fmt_opt_n(v: Option<usize>) -> String {
    v.map(|n| n.to_string()).unwrap_or_default()
}

pub fn discipline_name(d: Discipline) -> &'static str {
    match d {
        Discipline::NonPreemptive => "non-preemptive",
        Discipline::Preemptive => "preemptive",
    }
}

fn append_rows(csv: &mut CsvBuilder, kind: OutputKind, value: f64, point: &PointOutput) {
    match kind {
        OutputKind::P1 => {
            for row in &point.per_disc {
                csv.row(&[
                    fmt_f(value),
                    discipline_name(row.discipline).to_string(),
                    fmt_f(row.p1),
                    fmt_opt(row.sim_p1),
                    fmt_opt(row.sim_p1_se),
                    fmt_opt_n(row.n_kept),
                ]);
            }
        }
        OutputKind::StdDev => {
            for row in &point.per_disc {
                csv.row(&[
                    fmt_f(value),
                    discipline_name(row.discipline).to_string(),
                    fmt_f(row.sd),
                    fmt_opt(row.sim_sd),
                    fmt_opt(row.sim_sd_se),
                    fmt_opt_n(row.n_kept),
                ]);
            }
        }
        OutputKind::Cdf => {
            for (disc, curve) in &point.cdf_curves {
                for r in curve {
                    csv.row(&[
                        fmt_f(value),
                        discipline_name(*disc).to_string(),
                        fmt_f(r.x),
                        fmt_f(r.analytic),
                        fmt_opt(r.sim),
                        fmt_opt(r.sim_se),
                        fmt_opt_n(r.n),
                    ]);
                }
            }
        }
        OutputKind::ActivityCdf => {
            for r in &point.activity_curve {
                csv.row(&[
                    fmt_f(value),
                    "-".to_string(),
                    fmt_f(r.x),
                    fmt_f(r.analytic),
                    fmt_opt(r.sim),
                    fmt_opt(r.sim_se),
                    fmt_opt_n(r.n),
                ]);
            }
        }
    }
}
