//! Simulation configuration and validation.

use paoi_core::model::{Discipline, ModelError, NetworkParams, TrafficParams};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    /// A configuration field is out of range or inconsistent.
    #[error("invalid simulation config: {detail}")]
    InvalidConfig { detail: String },
    /// Repeated attempts to draw a network produced no links.
    #[error("network stayed empty after {attempts} regeneration attempts")]
    EmptyNetwork { attempts: u32 },
    /// Parameter validation failed in the analytic layer.
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// What drives the interference field.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Full dynamics: a link radiates only when its queue is busy and its
    /// medium-access coin fires.
    #[default]
    Original,
    /// Bounding system: every transmitter radiates whenever its
    /// medium-access coin fires (dummy packets when idle), while each
    /// link's own deliveries still require a busy queue. Queues decouple,
    /// and each link sees the saturated interference field.
    DominantStep1,
    /// One link, no interference: the conditional success probability is
    /// exactly one, isolating the queueing dynamics.
    SingleLink,
}

fn default_warmup() -> u64 {
    2_000
}

fn default_measure() -> u64 {
    5_000
}

fn default_min_deliveries() -> u64 {
    50
}

/// Full description of one simulation run. Deserializable from TOML/JSON;
/// unknown fields are rejected so typos fail loudly.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub network: NetworkParams,
    pub traffic: TrafficParams,
    /// Which discipline downstream consumers care about; the run itself
    /// always tracks both on shared randomness, so this only selects what
    /// reports emphasize. `None` means report both.
    #[serde(default)]
    pub discipline: Option<Discipline>,
    /// Side of the square torus window. `None` picks
    /// `max(1000, sqrt(500 / lambda_sd))` so sparse fields still hold a few
    /// hundred links.
    #[serde(default)]
    pub window_side: Option<f64>,
    #[serde(default = "default_warmup")]
    pub warmup_slots: u64,
    #[serde(default = "default_measure")]
    pub measure_slots: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub mode: Mode,
    /// Links with fewer in-window deliveries than this are excluded from
    /// peak-age spatial statistics (their temporal means are too noisy to
    /// pool). Activity statistics always use every link.
    #[serde(default = "default_min_deliveries")]
    pub min_deliveries: u64,
    /// Attach the per-link array to the summary (large for dense fields).
    #[serde(default)]
    pub per_link_output: bool,
    /// Record one entry per delivery per discipline. Memory grows with the
    /// delivery count; intended for single-link or small-field runs.
    #[serde(default)]
    pub record_traces: bool,
}

impl SimConfig {
    /// A config with library defaults for everything but the two parameter
    /// sets.
    pub fn new(network: NetworkParams, traffic: TrafficParams) -> Self {
        Self {
            network,
            traffic,
            discipline: None,
            window_side: None,
            warmup_slots: default_warmup(),
            measure_slots: default_measure(),
            seed: 0,
            mode: Mode::default(),
            min_deliveries: default_min_deliveries(),
            per_link_output: false,
            record_traces: false,
        }
    }

    /// The torus side actually used by the run.
    pub fn window(&self) -> f64 {
        self.window_side
            .unwrap_or_else(|| 1000f64.max((500.0 / self.network.lambda_sd).sqrt()))
    }

    /// Expected number of links in the window.
    pub fn expected_links(&self) -> f64 {
        match self.mode {
            Mode::SingleLink => 1.0,
            _ => self.network.lambda_sd * self.window() * self.window(),
        }
    }

    /// Check hard constraints and collect advisory warnings (the caller
    /// decides whether to log them; [`crate::run::run`] does).
    pub fn validate(&self) -> Result<Vec<String>, SimError> {
        self.network.validate()?;
        self.traffic.validate()?;
        let mut warnings = Vec::new();
        if self.measure_slots == 0 {
            return Err(SimError::InvalidConfig {
                detail: "measure_slots must be at least 1".into(),
            });
        }
        let w = self.window();
        if !(w.is_finite() && w > 0.0) {
            return Err(SimError::InvalidConfig {
                detail: format!("window side must be positive and finite, got {w}"),
            });
        }
        if w <= 4.0 * self.network.r_dist {
            return Err(SimError::InvalidConfig {
                detail: format!(
                    "window side {w} is too small for link distance {}; torus wrap-around \
                     would dominate",
                    self.network.r_dist
                ),
            });
        }
        let expected = self.expected_links();
        if expected > 12_000.0 {
            return Err(SimError::InvalidConfig {
                detail: format!(
                    "expected link count {expected:.0} exceeds 12000; the pairwise gain \
                     table would not fit a sane memory budget"
                ),
            });
        }
        if self.mode != Mode::SingleLink && expected < 100.0 {
            warnings.push(format!(
                "expected link count {expected:.1} is below 100; spatial statistics will \
                 be noisy"
            ));
        }
        let warmup_floor = (10.0 / self.traffic.lambda_a).ceil();
        if (self.warmup_slots as f64) < warmup_floor {
            warnings.push(format!(
                "warmup of {} slots is below the suggested floor of {warmup_floor} \
                 (ten mean inter-arrival times)",
                self.warmup_slots
            ));
        }
        if self.record_traces && expected * self.measure_slots as f64 > 5e8 {
            warnings.push(
                "trace recording over this many link-slots may use a lot of memory".into(),
            );
        }
        Ok(warnings)
    }
}
