//! Experiment specifications: the TOML surface, built-in presets, and the
//! resolution step that turns either into a fully explicit, hashable plan.

use anyhow::{anyhow, bail, Context, Result};
use paoi_core::model::{Discipline, NetworkParams, TrafficParams};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fmt;
use std::str::FromStr;

/// Baseline fixed parameters used whenever a spec leaves a field out.
pub mod defaults {
    pub const LAMBDA_SD: f64 = 1e-3;
    pub const R_DIST: f64 = 15.0;
    pub const ALPHA: f64 = 4.0;
    pub const BETA_DB: f64 = 3.0;
    pub const XI: f64 = 0.5;
    pub const LAMBDA_A: f64 = 0.3;
    pub const WARMUP_SLOTS: u64 = 2_000;
    pub const MEASURE_SLOTS: u64 = 6_000;
    pub const SEED: u64 = 1;
    pub const MIN_DELIVERIES: u64 = 50;
}

/// Convert a decibel reading to its linear value.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// An SIR threshold, stored linear. Accepts plain numbers (linear) or
/// strings with an explicit decibel suffix ("3 dB", "-5dB"); a bare number
/// inside a string is rejected so the units are never ambiguous.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SirThreshold(pub f64);

impl FromStr for SirThreshold {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        if let Ok(v) = t.parse::<f64>() {
            return Ok(SirThreshold(v));
        }
        let lower = t.to_ascii_lowercase();
        if let Some(num) = lower.strip_suffix("db") {
            let db: f64 = num
                .trim()
                .parse()
                .map_err(|_| anyhow!("cannot parse threshold {t:?} as a dB value"))?;
            return Ok(SirThreshold(db_to_linear(db)));
        }
        bail!("threshold {t:?} needs either a plain number (linear) or an explicit dB suffix")
    }
}

impl<'de> Deserialize<'de> for SirThreshold {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(de)? {
            Raw::Num(v) => Ok(SirThreshold(v)),
            Raw::Text(s) => {
                // String form must carry the dB suffix; a quoted plain
                // number would silently change meaning otherwise.
                let lower = s.trim().to_ascii_lowercase();
                let num = lower.strip_suffix("db").ok_or_else(|| {
                    serde::de::Error::custom(format!(
                        "threshold string {s:?} needs an explicit dB suffix \
                         (write a bare number for a linear value)"
                    ))
                })?;
                let db: f64 = num.trim().parse().map_err(|_| {
                    serde::de::Error::custom(format!("cannot parse {s:?} as a dB value"))
                })?;
                Ok(SirThreshold(db_to_linear(db)))
            }
        }
    }
}

/// Which parameter a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweptParam {
    Beta,
    Xi,
    LambdaA,
    LambdaSd,
    RDist,
}

impl fmt::Display for SweptParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweptParam::Beta => "beta",
            SweptParam::Xi => "xi",
            SweptParam::LambdaA => "lambda-a",
            SweptParam::LambdaSd => "lambda-sd",
            SweptParam::RDist => "r-dist",
        })
    }
}

/// Requested output tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputKind {
    /// Spatial mean of the conditional mean peak age.
    P1,
    /// Spatial standard deviation of the conditional mean peak age.
    StdDev,
    /// CDF of the conditional mean peak age across links.
    Cdf,
    /// CDF of the transmitter activity in the saturated-interferer system.
    ActivityCdf,
}

impl OutputKind {
    pub fn file_stem(self) -> &'static str {
        match self {
            OutputKind::P1 => "p1",
            OutputKind::StdDev => "std-dev",
            OutputKind::Cdf => "cdf",
            OutputKind::ActivityCdf => "activity-cdf",
        }
    }

    /// Curve outputs carry an extra abscissa column.
    pub fn is_curve(self) -> bool {
        matches!(self, OutputKind::Cdf | OutputKind::ActivityCdf)
    }
}

/// One grid entry as written: a number, or a dB string (beta sweeps only).
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum GridEntry {
    Num(f64),
    Text(String),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct SweepSection {
    pub parameter: SweptParam,
    pub grid: Vec<GridEntry>,
}

/// Fixed parameters as written; anything left out falls back to the
/// baseline defaults at resolution time.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct FixedSection {
    pub lambda_sd: Option<f64>,
    pub r_dist: Option<f64>,
    pub alpha: Option<f64>,
    pub beta: Option<SirThreshold>,
    pub xi: Option<f64>,
    pub lambda_a: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct SimSection {
    /// Present-but-disabled lets a spec keep its overrides while off.
    pub enabled: Option<bool>,
    pub window_side: Option<f64>,
    pub warmup_slots: Option<u64>,
    pub measure_slots: Option<u64>,
    pub seed: Option<u64>,
    pub min_deliveries: Option<u64>,
}

/// An experiment as written in a spec file or preset.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct ExperimentSpec {
    pub name: String,
    pub sweep: SweepSection,
    #[serde(default)]
    pub fixed: FixedSection,
    pub disciplines: Option<Vec<Discipline>>,
    pub outputs: Option<Vec<OutputKind>>,
    pub simulation: Option<SimSection>,
}

/// Resolved simulation settings (None window = density-derived default).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct ResolvedSim {
    pub window_side: Option<f64>,
    pub warmup_slots: u64,
    pub measure_slots: u64,
    pub seed: u64,
    pub min_deliveries: u64,
}

/// A fully explicit experiment: every field concrete, thresholds linear,
/// grid validated. This is what the manifest stores and the hash covers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct ResolvedExperiment {
    pub name: String,
    pub parameter: SweptParam,
    pub grid: Vec<f64>,
    pub lambda_sd: f64,
    pub r_dist: f64,
    pub alpha: f64,
    pub beta: f64,
    pub xi: f64,
    pub lambda_a: f64,
    pub disciplines: Vec<Discipline>,
    pub outputs: Vec<OutputKind>,
    pub simulation: Option<ResolvedSim>,
}

/// Command-line overrides applied during resolution.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub no_sim: bool,
}

impl ExperimentSpec {
    /// Validate and make every choice explicit. All spec-level errors
    /// surface here, before any numerical work starts.
    pub fn resolve(&self, overrides: &Overrides) -> Result<ResolvedExperiment> {
        if self.name.is_empty()
            || !self
                .name
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
        {
            bail!(
                "experiment name {:?} must be non-empty and use only letters, digits, \
                 '-', '_', '.' (it names the output files)",
                self.name
            );
        }
        let parameter = self.sweep.parameter;

        let mut grid = Vec::with_capacity(self.sweep.grid.len());
        for (i, entry) in self.sweep.grid.iter().enumerate() {
            let v = match entry {
                GridEntry::Num(v) => *v,
                GridEntry::Text(s) => {
                    if parameter != SweptParam::Beta {
                        bail!(
                            "grid entry {i} is a string ({s:?}), but only beta grids \
                             accept dB strings"
                        );
                    }
                    let SirThreshold(v) = s
                        .parse()
                        .with_context(|| format!("grid entry {i}"))?;
                    // FromStr also accepts bare numerals; inside a grid that
                    // would hide the units, so insist on the suffix.
                    if !s.trim().to_ascii_lowercase().ends_with("db") {
                        bail!("grid entry {i} ({s:?}) needs an explicit dB suffix");
                    }
                    v
                }
            };
            grid.push(v);
        }
        if grid.is_empty() {
            bail!("sweep grid must not be empty");
        }
        if grid.windows(2).any(|w| !(w[0] < w[1])) {
            bail!("sweep grid must be strictly increasing, got {grid:?}");
        }

        let f = &self.fixed;
        let fixed_clash = match parameter {
            SweptParam::Beta => f.beta.is_some(),
            SweptParam::Xi => f.xi.is_some(),
            SweptParam::LambdaA => f.lambda_a.is_some(),
            SweptParam::LambdaSd => f.lambda_sd.is_some(),
            SweptParam::RDist => f.r_dist.is_some(),
        };
        if fixed_clash {
            bail!("swept parameter {parameter} must not also appear under [fixed]");
        }

        let disciplines = self
            .disciplines
            .clone()
            .unwrap_or_else(|| vec![Discipline::NonPreemptive, Discipline::Preemptive]);
        if disciplines.is_empty() {
            bail!("disciplines list must not be empty");
        }
        if disciplines.len() > 2 || (disciplines.len() == 2 && disciplines[0] == disciplines[1]) {
            bail!("disciplines list must not repeat entries");
        }
        let outputs = self.outputs.clone().unwrap_or(vec![OutputKind::P1]);
        if outputs.is_empty() {
            bail!("outputs list must not be empty");
        }
        for (i, o) in outputs.iter().enumerate() {
            if outputs[..i].contains(o) {
                bail!("outputs list must not repeat entries ({} twice)", o.file_stem());
            }
        }

        let simulation = match (&self.simulation, overrides.no_sim) {
            (_, true) | (None, _) => None,
            (Some(s), false) if s.enabled == Some(false) => None,
            (Some(s), false) => Some(ResolvedSim {
                window_side: s.window_side,
                warmup_slots: s.warmup_slots.unwrap_or(defaults::WARMUP_SLOTS),
                measure_slots: s.measure_slots.unwrap_or(defaults::MEASURE_SLOTS),
                seed: overrides.seed.or(s.seed).unwrap_or(defaults::SEED),
                min_deliveries: s.min_deliveries.unwrap_or(defaults::MIN_DELIVERIES),
            }),
        };

        let resolved = ResolvedExperiment {
            name: self.name.clone(),
            parameter,
            grid,
            lambda_sd: f.lambda_sd.unwrap_or(defaults::LAMBDA_SD),
            r_dist: f.r_dist.unwrap_or(defaults::R_DIST),
            alpha: f.alpha.unwrap_or(defaults::ALPHA),
            beta: f
                .beta
                .unwrap_or(SirThreshold(db_to_linear(defaults::BETA_DB)))
                .0,
            xi: f.xi.unwrap_or(defaults::XI),
            lambda_a: f.lambda_a.unwrap_or(defaults::LAMBDA_A),
            disciplines,
            outputs,
            simulation,
        };
        // Every grid point must map to valid model parameters before any
        // computation starts.
        for (i, &v) in resolved.grid.iter().enumerate() {
            resolved
                .point_params(v)
                .with_context(|| format!("grid point {i} ({v})"))?;
        }
        Ok(resolved)
    }
}

impl ResolvedExperiment {
    /// Model parameters with the swept value substituted in.
    pub fn point_params(&self, value: f64) -> Result<(NetworkParams, TrafficParams)> {
        let mut lambda_sd = self.lambda_sd;
        let mut r_dist = self.r_dist;
        let mut beta = self.beta;
        let mut xi = self.xi;
        let mut lambda_a = self.lambda_a;
        match self.parameter {
            SweptParam::Beta => beta = value,
            SweptParam::Xi => xi = value,
            SweptParam::LambdaA => lambda_a = value,
            SweptParam::LambdaSd => lambda_sd = value,
            SweptParam::RDist => r_dist = value,
        }
        let network = NetworkParams::new(lambda_sd, r_dist, self.alpha, beta, xi)?;
        let traffic = TrafficParams::new(lambda_a)?;
        Ok((network, traffic))
    }

    /// Hash of the full resolved configuration, embedded in every output
    /// file so tables can be traced back to the exact plan that made them.
    pub fn config_hash(&self) -> String {
        let canon = serde_json::to_string(self).expect("resolved spec serializes");
        hex_digest(canon.as_bytes())
    }
}

/// SHA-256 hex digest.
pub fn hex_digest(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let out = hasher.finalize();
    let mut s = String::with_capacity(64);
    for b in out {
        s.push_str(&format!("{b:02x}"));
    }
    s
}

// ---------------------------------------------------------------------------
// Presets
// ---------------------------------------------------------------------------

/// Built-in experiment specs, written in the same TOML dialect as user
/// files so the parser exercises them too.
const PRESETS: &[(&str, &str)] = &[
    (
        "fig3",
        r#"
name = "fig3"
outputs = ["activity-cdf"]

[sweep]
parameter = "lambda-sd"
grid = [1e-4, 1e-3]

[fixed]
lambda-a = 0.1
xi = 0.5
beta = 2.0
alpha = 4.0
r-dist = 10.0

[simulation]
warmup-slots = 2000
measure-slots = 20000
seed = 1
"#,
    ),
    (
        "fig4",
        r#"
name = "fig4"
outputs = ["p1", "cdf"]

[sweep]
parameter = "r-dist"
grid = [10.0, 15.0, 20.0]

[simulation]
window-side = 800.0
warmup-slots = 2000
measure-slots = 6000
seed = 1
"#,
    ),
    (
        "fig5",
        r#"
name = "fig5"
outputs = ["p1", "std-dev"]

[sweep]
parameter = "beta"
grid = [
    "-5 dB", "-4 dB", "-3 dB", "-2 dB", "-1 dB", "0 dB", "1 dB", "2 dB",
    "3 dB", "4 dB", "5 dB", "6 dB", "7 dB", "8 dB", "9 dB", "10 dB",
    "11 dB", "12 dB", "13 dB", "14 dB", "15 dB",
]

[fixed]
alpha = 3.5
r-dist = 10.0

[simulation]
window-side = 800.0
warmup-slots = 2000
measure-slots = 6000
seed = 1
"#,
    ),
    (
        "fig6-xi",
        r#"
name = "fig6-xi"
outputs = ["p1", "std-dev"]

[sweep]
parameter = "xi"
grid = [
    0.05, 0.10, 0.15, 0.20, 0.25, 0.30, 0.35, 0.40, 0.45, 0.50,
    0.55, 0.60, 0.65, 0.70, 0.75, 0.80, 0.85, 0.90, 0.95,
]
"#,
    ),
    (
        "fig6-lambda-a",
        r#"
name = "fig6-lambda-a"
outputs = ["p1", "std-dev"]

[sweep]
parameter = "lambda-a"
grid = [
    0.05, 0.10, 0.15, 0.20, 0.25, 0.30, 0.35, 0.40, 0.45, 0.50,
    0.55, 0.60, 0.65, 0.70, 0.75, 0.80, 0.85, 0.90, 0.95,
]
"#,
    ),
    (
        "fig7-density",
        r#"
name = "fig7-density"
outputs = ["p1", "std-dev"]

[sweep]
parameter = "lambda-sd"
grid = [1e-4, 2e-4, 5e-4, 1e-3, 1.5e-3, 2e-3]
"#,
    ),
];

/// Look up a built-in preset by name.
pub fn preset(name: &str) -> Option<ExperimentSpec> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(n, text)| {
        toml::from_str(text).unwrap_or_else(|e| panic!("built-in preset {n} must parse: {e}"))
    })
}

pub fn preset_names() -> Vec<&'static str> {
    PRESETS.iter().map(|(n, _)| *n).collect()
}
