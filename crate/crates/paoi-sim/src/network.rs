//! Network realization: Poisson link placement on a torus and the pairwise
//! interference geometry.

use crate::config::SimError;
use crate::rng::{draw, Stream};
use paoi_core::model::NetworkParams;

// Purpose codes for the network stream counters.
const CNT_COUNT: u64 = 0;
const CNT_POS_X: u64 = 1;
const CNT_POS_Y: u64 = 2;
const CNT_ANGLE: u64 = 3;

/// One realized field: receiver positions and their transmitters at fixed
/// distance, on a square torus.
#[derive(Debug, Clone)]
pub struct Network {
    pub window_side: f64,
    /// Seed that actually produced this field (the requested seed plus any
    /// regeneration bumps after empty draws).
    pub seed_used: u64,
    pub rx: Vec<(f64, f64)>,
    pub tx: Vec<(f64, f64)>,
}

/// Torus displacement along one axis.
#[inline]
fn fold(a: f64, b: f64, w: f64) -> f64 {
    let d = (a - b).abs();
    d.min(w - d)
}

/// Distance between two points on the square torus of side `w`.
#[inline]
pub fn torus_distance(a: (f64, f64), b: (f64, f64), w: f64) -> f64 {
    let dx = fold(a.0, b.0, w);
    let dy = fold(a.1, b.1, w);
    (dx * dx + dy * dy).sqrt()
}

/// Deterministic Poisson draw via chunked CDF inversion: a mean up to 32 per
/// chunk keeps `exp(-mean)` comfortably inside f64 range, and the chunk sum
/// is exactly Poisson of the full mean.
fn poisson_count(seed: u64, mean: f64) -> u64 {
    debug_assert!(mean.is_finite() && mean >= 0.0);
    let chunks = (mean / 32.0).ceil().max(1.0) as u64;
    let chunk_mean = mean / chunks as f64;
    let cap = (chunk_mean + 12.0 * chunk_mean.sqrt() + 30.0) as u64;
    let mut total = 0u64;
    for c in 0..chunks {
        let u = draw(seed, Stream::Net, CNT_COUNT, c, 0);
        let mut p = (-chunk_mean).exp();
        let mut cum = p;
        let mut k = 0u64;
        while u > cum && k < cap {
            k += 1;
            p *= chunk_mean / k as f64;
            cum += p;
        }
        total += k;
    }
    total
}

impl Network {
    /// Draw a Poisson number of receivers uniformly on the torus and place
    /// each link's transmitter at the fixed link distance in a uniform
    /// direction. An empty draw is retried with the seed bumped by one (and
    /// logged), since a zero-link field cannot support any statistic.
    pub fn generate(
        params: &NetworkParams,
        window_side: f64,
        seed: u64,
    ) -> Result<Network, SimError> {
        let mean = params.lambda_sd * window_side * window_side;
        const MAX_ATTEMPTS: u32 = 64;
        for attempt in 0..MAX_ATTEMPTS {
            let s = seed.wrapping_add(attempt as u64);
            let n = poisson_count(s, mean);
            if n == 0 {
                log::warn!(
                    "network draw with seed {s} came up empty (mean {mean:.3}); retrying \
                     with seed {}",
                    s.wrapping_add(1)
                );
                continue;
            }
            return Ok(Self::place(params, window_side, s, n));
        }
        Err(SimError::EmptyNetwork {
            attempts: MAX_ATTEMPTS,
        })
    }

    /// A single link centered in the window, transmitter direction still
    /// seed-dependent: the no-interference queueing testbed.
    pub fn single_link(params: &NetworkParams, window_side: f64, seed: u64) -> Network {
        let mut net = Self::place(params, window_side, seed, 1);
        net.rx[0] = (window_side / 2.0, window_side / 2.0);
        let theta = 2.0 * std::f64::consts::PI * draw(seed, Stream::Net, CNT_ANGLE, 0, 0);
        net.tx[0] = (
            (net.rx[0].0 + params.r_dist * theta.cos()).rem_euclid(window_side),
            (net.rx[0].1 + params.r_dist * theta.sin()).rem_euclid(window_side),
        );
        net
    }

    fn place(params: &NetworkParams, window_side: f64, seed: u64, n: u64) -> Network {
        let mut rx = Vec::with_capacity(n as usize);
        let mut tx = Vec::with_capacity(n as usize);
        for l in 0..n {
            let x = draw(seed, Stream::Net, CNT_POS_X, l, 0) * window_side;
            let y = draw(seed, Stream::Net, CNT_POS_Y, l, 0) * window_side;
            let theta = 2.0 * std::f64::consts::PI * draw(seed, Stream::Net, CNT_ANGLE, l, 0);
            rx.push((x, y));
            tx.push((
                (x + params.r_dist * theta.cos()).rem_euclid(window_side),
                (y + params.r_dist * theta.sin()).rem_euclid(window_side),
            ));
        }
        Network {
            window_side,
            seed_used: seed,
            rx,
            tx,
        }
    }

    pub fn n_links(&self) -> usize {
        self.rx.len()
    }
}

/// Row-major table of per-pair success factors: entry `(i, j)` is the factor
/// receiver `i` contributes to its conditional delivery probability when
/// transmitter `j` is active, `1 / (1 + beta (R / d_ij)^alpha)` under unit
/// mean fading. The diagonal (own transmitter) is set to one so callers can
/// multiply over any active set without special-casing.
pub fn success_factors(net: &Network, params: &NetworkParams) -> Vec<f64> {
    let n = net.n_links();
    let beta_r = params.beta_thr * params.r_dist.powf(params.alpha);
    let half_alpha = params.alpha / 2.0;
    let mut f = vec![1.0; n * n];
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let dx = fold(net.rx[i].0, net.tx[j].0, net.window_side);
            let dy = fold(net.rx[i].1, net.tx[j].1, net.window_side);
            let d2 = dx * dx + dy * dy;
            f[i * n + j] = 1.0 / (1.0 + beta_r * d2.powf(-half_alpha));
        }
    }
    f
}

/// Conditional probability that receiver `i` decodes this slot given the
/// active transmitter set, i.e. the product of its success factors over the
/// active interferers.
pub fn conditional_success(factors: &[f64], n: usize, i: usize, active: &[usize]) -> f64 {
    let row = &factors[i * n..(i + 1) * n];
    let mut p = 1.0;
    for &j in active {
        p *= row[j]; // diagonal entry is 1, so `j == i` needs no branch
    }
    p
}

/// Per-link delivery probability for a slot in which every other transmitter
/// radiates independently with the given activity: the product over
/// interferers of `1 - activity + activity * F_ij`. When interferers are
/// saturated (activity equal to the medium-access probability, as in the
/// dominant mode) this is each link's exact per-attempt success probability
/// on its realized field, so it serves as a per-realization reference for
/// simulated peak-age and activity statistics.
pub fn per_link_success_probs(net: &Network, params: &NetworkParams, activity: f64) -> Vec<f64> {
    assert!(
        (0.0..=1.0).contains(&activity),
        "activity must lie in [0, 1], got {activity}"
    );
    let n = net.n_links();
    let factors = success_factors(net, params);
    (0..n)
        .map(|i| {
            let row = &factors[i * n..(i + 1) * n];
            let mut mu = 1.0;
            for (j, f) in row.iter().enumerate() {
                if j != i {
                    mu *= 1.0 - activity + activity * f;
                }
            }
            mu
        })
        .collect()
}
