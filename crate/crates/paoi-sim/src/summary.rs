//! Per-run spatial statistics and their serialized forms.

use crate::config::{Mode, SimConfig};
use crate::network::Network;
use crate::queue::LinkState;
use paoi_core::model::Discipline;
use serde::{Deserialize, Serialize};
use std::io;

/// Per-link measurement row.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinkStats {
    pub x: f64,
    pub y: f64,
    /// In-window deliveries.
    pub deliveries: u64,
    /// In-window peak samples (deliveries with a predecessor).
    pub peaks: u64,
    /// In-window transmission attempts.
    pub attempts: u64,
    pub mean_peak_np: Option<f64>,
    pub mean_peak_p: Option<f64>,
    /// Fraction of measured slots with a busy server.
    pub busy_fraction: f64,
    /// Long-run transmission activity, `xi * busy_fraction`; never exceeds
    /// the medium-access probability.
    pub activity: f64,
    /// Empirical per-attempt delivery probability.
    pub success_prob: Option<f64>,
}

/// Spatial summary of one run: per-link temporal averages pooled across the
/// field. Peak-age statistics pool only links with at least
/// `min_deliveries` in-window deliveries (and at least one peak sample);
/// activity statistics use every link, since filtering by deliveries would
/// bias activity downward-censored links away.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpatialSummary {
    pub mode: Mode,
    pub seed_requested: u64,
    pub seed_used: u64,
    pub window_side: f64,
    pub warmup_slots: u64,
    pub measure_slots: u64,
    pub min_deliveries: u64,
    pub n_links: usize,
    pub n_links_kept: usize,
    pub n_links_excluded: usize,
    /// Spatial mean of per-link temporal mean peak age, non-preemptive.
    pub mean_peak_np: Option<f64>,
    pub se_peak_np: Option<f64>,
    pub mean_peak_p: Option<f64>,
    pub se_peak_p: Option<f64>,
    pub mean_activity: f64,
    pub se_activity: Option<f64>,
    /// Pooled deliveries over pooled attempts, all links.
    pub empirical_success_prob: Option<f64>,
    /// Per-link rows; present when the config asked for them.
    pub per_link: Option<Vec<LinkStats>>,
    // Retained for further statistics (distribution outputs) regardless of
    // whether per-link rows were requested; not part of the serial form.
    #[serde(skip)]
    kept_peak_np: Vec<f64>,
    #[serde(skip)]
    kept_peak_p: Vec<f64>,
    #[serde(skip)]
    activities: Vec<f64>,
}

fn mean_and_se(values: &[f64]) -> (Option<f64>, Option<f64>) {
    if values.is_empty() {
        return (None, None);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (Some(mean), None);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (Some(mean), Some((var / n).sqrt()))
}

impl SpatialSummary {
    pub(crate) fn build(cfg: &SimConfig, net: &Network, states: &[LinkState]) -> Self {
        let xi = cfg.network.xi;
        let measure = cfg.measure_slots as f64;
        let mut rows = Vec::with_capacity(states.len());
        let mut kept_peak_np = Vec::new();
        let mut kept_peak_p = Vec::new();
        let mut activities = Vec::with_capacity(states.len());
        let (mut pooled_attempts, mut pooled_successes) = (0u64, 0u64);
        for (i, st) in states.iter().enumerate() {
            let busy_fraction = st.busy_slots as f64 / measure;
            let activity = xi * busy_fraction;
            let mean_np = (st.peaks > 0).then(|| st.peak_sum_np / st.peaks as f64);
            let mean_p = (st.peaks > 0).then(|| st.peak_sum_p / st.peaks as f64);
            if st.successes >= cfg.min_deliveries && st.peaks > 0 {
                kept_peak_np.push(mean_np.unwrap());
                kept_peak_p.push(mean_p.unwrap());
            }
            activities.push(activity);
            pooled_attempts += st.attempts;
            pooled_successes += st.successes;
            rows.push(LinkStats {
                x: net.rx[i].0,
                y: net.rx[i].1,
                deliveries: st.successes,
                peaks: st.peaks,
                attempts: st.attempts,
                mean_peak_np: mean_np,
                mean_peak_p: mean_p,
                busy_fraction,
                activity,
                success_prob: (st.attempts > 0)
                    .then(|| st.successes as f64 / st.attempts as f64),
            });
        }
        let (mean_peak_np, se_peak_np) = mean_and_se(&kept_peak_np);
        let (mean_peak_p, se_peak_p) = mean_and_se(&kept_peak_p);
        let (mean_activity, se_activity) = mean_and_se(&activities);
        SpatialSummary {
            mode: cfg.mode,
            seed_requested: cfg.seed,
            seed_used: net.seed_used,
            window_side: net.window_side,
            warmup_slots: cfg.warmup_slots,
            measure_slots: cfg.measure_slots,
            min_deliveries: cfg.min_deliveries,
            n_links: states.len(),
            n_links_kept: kept_peak_np.len(),
            n_links_excluded: states.len() - kept_peak_np.len(),
            mean_peak_np,
            se_peak_np,
            mean_peak_p,
            se_peak_p,
            mean_activity: mean_activity.unwrap_or(f64::NAN),
            se_activity,
            empirical_success_prob: (pooled_attempts > 0)
                .then(|| pooled_successes as f64 / pooled_attempts as f64),
            per_link: cfg.per_link_output.then_some(rows),
            kept_peak_np,
            kept_peak_p,
            activities,
        }
    }

    /// Empirical CDF of per-link mean peak age over the kept links.
    pub fn ecdf_peak(&self, discipline: Discipline) -> Vec<(f64, f64)> {
        match discipline {
            Discipline::NonPreemptive => ecdf(&self.kept_peak_np),
            Discipline::Preemptive => ecdf(&self.kept_peak_p),
        }
    }

    /// Empirical CDF of per-link activity over all links.
    pub fn ecdf_activity(&self) -> Vec<(f64, f64)> {
        ecdf(&self.activities)
    }

    /// Per-link activities (unsorted), for external statistics.
    pub fn activities(&self) -> &[f64] {
        &self.activities
    }

    /// Per-link kept mean peak ages (unsorted), for external statistics.
    pub fn kept_peaks(&self, discipline: Discipline) -> &[f64] {
        match discipline {
            Discipline::NonPreemptive => &self.kept_peak_np,
            Discipline::Preemptive => &self.kept_peak_p,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serialization cannot fail")
    }
}

/// Step CDF of a sample: points `(v, F_hat(v))` at each distinct sorted
/// value.
pub fn ecdf(values: &[f64]) -> Vec<(f64, f64)> {
    let mut sorted: Vec<f64> = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut points: Vec<(f64, f64)> = Vec::with_capacity(sorted.len());
    for (i, v) in sorted.iter().enumerate() {
        let f = (i + 1) as f64 / n;
        match points.last_mut() {
            Some(last) if last.0 == *v => last.1 = f,
            _ => points.push((*v, f)),
        }
    }
    points
}

/// Kolmogorov–Smirnov statistic of a sample against a reference CDF:
/// `sup |F_hat - F|` evaluated on both sides of every jump.
pub fn ks_statistic(values: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut sorted: Vec<f64> = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, v) in sorted.iter().enumerate() {
        let f = cdf(*v);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    d
}

/// Write a step CDF as CSV with a fixed three-column schema.
pub fn write_cdf_csv<W: io::Write>(
    mut w: W,
    points: &[(f64, f64)],
    n_links: usize,
) -> io::Result<()> {
    writeln!(w, "x,F_hat,n_links")?;
    for (x, f) in points {
        writeln!(w, "{x},{f},{n_links}")?;
    }
    Ok(())
}
