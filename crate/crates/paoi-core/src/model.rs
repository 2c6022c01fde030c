//! Parameter types and the transmitter-activity moment store.
//!
//! Three small value types describe a scenario: [`NetworkParams`] (geometry,
//! propagation, threshold, and the medium-access probability `xi`),
//! [`TrafficParams`] (the per-slot arrival probability `lambda_a`), and
//! [`Discipline`] (queueing discipline of the zero-buffer source queue).
//!
//! [`ActivityMoments`] represents the law of the per-interferer activity
//! fraction `zeta` — the long-run probability that a given interfering
//! transmitter is on the air in a slot — through its raw moments
//! `p_m = E[zeta^m]`. The interference functional only ever consumes these
//! moments, so the store accepts three backings: a point mass (saturated
//! queues transmit whenever the medium-access coin allows, `zeta = xi`), a
//! tail function on a known support (used when activity is modulated by a
//! random per-link success probability), or an explicit moment list. Moments
//! are computed lazily and cached.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::{Arc, Mutex};

use thiserror::Error;

use crate::numerics::{self, NumericsError, QuadOptions};

/// Errors from parameter validation and moment evaluation.
#[derive(Debug, Error)]
pub enum ModelError {
    /// A constructor argument fell outside its admissible range.
    #[error("invalid parameter {name}: {detail}")]
    InvalidParameter { name: &'static str, detail: String },
    /// A custom moment list was asked for a moment beyond its length.
    #[error("activity moment of order {m} unavailable: only {have} moments were supplied")]
    MomentUnavailable { m: u32, have: usize },
    /// The operation needs a distribution-backed activity law (point mass or
    /// tail function); a bare moment list does not determine one.
    #[error("operation requires a distribution-backed activity law, not a bare moment list")]
    LawUnavailable,
    /// A quadrature or series kernel failed while extending the moments.
    #[error("numerics failure while evaluating activity law: {0}")]
    Numerics(#[from] NumericsError),
}

/// Queueing discipline of the zero-buffer source queue.
///
/// Both disciplines hold at most one packet. A non-preemptive queue discards
/// arrivals while busy; a preemptive queue replaces the packet in service
/// with the fresh arrival.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(rename_all = "kebab-case")
)]
pub enum Discipline {
    NonPreemptive,
    Preemptive,
}

impl fmt::Display for Discipline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Discipline::NonPreemptive => write!(f, "non-preemptive"),
            Discipline::Preemptive => write!(f, "preemptive"),
        }
    }
}

/// Network-side parameters: source–destination pair density, link distance,
/// path-loss exponent, SIR threshold (linear), and medium-access probability.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NetworkParams {
    /// Density of source–destination pairs per unit area.
    pub lambda_sd: f64,
    /// Source-to-destination link distance.
    pub r_dist: f64,
    /// Path-loss exponent; must exceed 2 for the interference functional to
    /// converge.
    pub alpha: f64,
    /// SIR decoding threshold in linear units.
    pub beta_thr: f64,
    /// Per-slot medium-access (transmit) probability of a busy source.
    pub xi: f64,
}

impl NetworkParams {
    pub fn new(
        lambda_sd: f64,
        r_dist: f64,
        alpha: f64,
        beta_thr: f64,
        xi: f64,
    ) -> Result<Self, ModelError> {
        let p = Self {
            lambda_sd,
            r_dist,
            alpha,
            beta_thr,
            xi,
        };
        p.validate()?;
        Ok(p)
    }

    /// Checks every field range plus the internal consistency of the derived
    /// gamma-product constant (see [`Self::delta_hat`]).
    pub fn validate(&self) -> Result<(), ModelError> {
        fn positive(name: &'static str, v: f64) -> Result<(), ModelError> {
            if !(v > 0.0) || !v.is_finite() {
                return Err(ModelError::InvalidParameter {
                    name,
                    detail: format!("must be positive and finite, got {v}"),
                });
            }
            Ok(())
        }
        positive("lambda_sd", self.lambda_sd)?;
        positive("r_dist", self.r_dist)?;
        positive("beta_thr", self.beta_thr)?;
        if !(self.alpha > 2.0) || !self.alpha.is_finite() {
            return Err(ModelError::InvalidParameter {
                name: "alpha",
                detail: format!("path-loss exponent must exceed 2, got {}", self.alpha),
            });
        }
        if !(self.xi > 0.0 && self.xi <= 1.0) {
            return Err(ModelError::InvalidParameter {
                name: "xi",
                detail: format!("medium-access probability must lie in (0, 1], got {}", self.xi),
            });
        }
        // Cross-check the two expressions for the gamma-product constant:
        // Gamma(1+d) Gamma(1-d) and pi d / sin(pi d) agree analytically, so a
        // relative gap beyond 1e-12 would expose a broken gamma kernel.
        let d = self.delta();
        let via_gamma = numerics::gamma(1.0 + d) * numerics::gamma(1.0 - d);
        let via_sin = self.delta_hat();
        if ((via_gamma - via_sin) / via_sin).abs() > 1e-12 {
            return Err(ModelError::InvalidParameter {
                name: "alpha",
                detail: format!(
                    "gamma-product consistency check failed at delta={d}: {via_gamma} vs {via_sin}"
                ),
            });
        }
        Ok(())
    }

    /// Stability exponent `delta = 2 / alpha`, in (0, 1).
    pub fn delta(&self) -> f64 {
        2.0 / self.alpha
    }

    /// The constant `Gamma(1 + delta) Gamma(1 - delta) = pi delta / sin(pi delta)`
    /// multiplying the interference exponent. Evaluated through the sine form,
    /// which is exact up to rounding; `validate` cross-checks the gamma form.
    pub fn delta_hat(&self) -> f64 {
        let d = self.delta();
        std::f64::consts::PI * d / (std::f64::consts::PI * d).sin()
    }
}

/// Source-traffic parameters: Bernoulli arrivals with per-slot probability
/// `lambda_a`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrafficParams {
    /// Per-slot arrival probability, in (0, 1].
    pub lambda_a: f64,
}

impl TrafficParams {
    pub fn new(lambda_a: f64) -> Result<Self, ModelError> {
        let t = Self { lambda_a };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.lambda_a > 0.0 && self.lambda_a <= 1.0) {
            return Err(ModelError::InvalidParameter {
                name: "lambda_a",
                detail: format!("arrival probability must lie in (0, 1], got {}", self.lambda_a),
            });
        }
        Ok(())
    }

    /// Mean number of empty slots between a delivery and the next arrival,
    /// `1 / lambda_a - 1`. Zero under saturated arrivals.
    pub fn z_a(&self) -> f64 {
        1.0 / self.lambda_a - 1.0
    }

    /// Odds form `lambda_a / (1 - lambda_a)`; `+inf` when every slot brings an
    /// arrival.
    pub fn lambda_a_prime(&self) -> f64 {
        if self.lambda_a == 1.0 {
            f64::INFINITY
        } else {
            self.lambda_a / (1.0 - self.lambda_a)
        }
    }

    /// Stationary probability that the queue holds a packet during a slot
    /// (after the slot-start arrival), given per-slot delivery probability
    /// `service_prob` while busy. Computed in a form with no infinities:
    /// `lambda_a / (lambda_a + s (1 - lambda_a))`.
    pub fn busy_prob(&self, service_prob: f64) -> f64 {
        self.lambda_a / (self.lambda_a + service_prob * (1.0 - self.lambda_a))
    }
}

/// Provenance of an activity-moment store, recorded for diagnostics and for
/// deciding which validity checks apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MomentProvenance {
    /// Saturated queues: activity is exactly the medium-access probability.
    Saturated,
    /// Activity modulated by a random per-link success probability, described
    /// by a tail function on a known support.
    DominantStep,
    /// Caller-supplied moment list.
    Custom,
}

/// Tail function `t -> P[zeta > t]`, evaluated inside quadrature kernels.
/// Implementations must return values in [0, 1] and may signal internal
/// failure with NaN, which the quadrature surfaces as a domain error.
pub type TailFn = dyn Fn(f64) -> f64 + Send + Sync;

enum Law {
    /// All mass at one point.
    Point(f64),
    /// Support `[supp_lo, xi]` with `P[zeta > t] = tail(t)` there; the tail is
    /// identically 1 below `supp_lo`.
    Tail { supp_lo: f64, tail: Arc<TailFn> },
    /// Explicit raw moments `p_1, p_2, ...`.
    List(Vec<f64>),
}

impl Clone for Law {
    fn clone(&self) -> Self {
        match self {
            Law::Point(z) => Law::Point(*z),
            Law::Tail { supp_lo, tail } => Law::Tail {
                supp_lo: *supp_lo,
                tail: Arc::clone(tail),
            },
            Law::List(v) => Law::List(v.clone()),
        }
    }
}

impl fmt::Debug for Law {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Law::Point(z) => f.debug_tuple("Point").field(z).finish(),
            Law::Tail { supp_lo, .. } => f
                .debug_struct("Tail")
                .field("supp_lo", supp_lo)
                .field("tail", &"<fn>")
                .finish(),
            Law::List(v) => f.debug_tuple("List").field(v).finish(),
        }
    }
}

/// Raw moments `p_m = E[zeta^m]` of the per-interferer activity fraction,
/// lazily evaluated and cached.
///
/// Invariants maintained for distribution-backed stores: `0 < p_m <= xi^m`
/// and the sequence is nonincreasing in `m`. Custom lists are validated for
/// the range and monotonicity constraints required of moments of a [0, 1]
/// random variable; the order-3 moment-matrix inequalities are checked and
/// logged as warnings rather than rejected, since slightly inconsistent
/// empirical moments are still usable.
#[derive(Debug)]
pub struct ActivityMoments {
    provenance: MomentProvenance,
    xi: f64,
    law: Law,
    cache: Mutex<BTreeMap<u32, f64>>,
}

impl Clone for ActivityMoments {
    fn clone(&self) -> Self {
        Self {
            provenance: self.provenance,
            xi: self.xi,
            law: self.law.clone(),
            cache: Mutex::new(self.cache.lock().expect("moment cache poisoned").clone()),
        }
    }
}

fn check_xi(xi: f64) -> Result<(), ModelError> {
    if !(xi > 0.0 && xi <= 1.0) {
        return Err(ModelError::InvalidParameter {
            name: "xi",
            detail: format!("activity ceiling must lie in (0, 1], got {xi}"),
        });
    }
    Ok(())
}

impl ActivityMoments {
    /// Saturated-queue activity: point mass at `xi`.
    pub fn saturated(xi: f64) -> Result<Self, ModelError> {
        check_xi(xi)?;
        Ok(Self {
            provenance: MomentProvenance::Saturated,
            xi,
            law: Law::Point(xi),
            cache: Mutex::new(BTreeMap::new()),
        })
    }

    /// Activity concentrated at a single value `z0 <= xi` (degenerate
    /// modulating law).
    pub fn dominant_point(xi: f64, z0: f64) -> Result<Self, ModelError> {
        check_xi(xi)?;
        if !(z0 > 0.0 && z0 <= xi) {
            return Err(ModelError::InvalidParameter {
                name: "z0",
                detail: format!("point activity must lie in (0, xi={xi}], got {z0}"),
            });
        }
        Ok(Self {
            provenance: MomentProvenance::DominantStep,
            xi,
            law: Law::Point(z0),
            cache: Mutex::new(BTreeMap::new()),
        })
    }

    /// Activity with support `[supp_lo, xi]` described by its tail function.
    /// The tail must be nonincreasing with `tail(supp_lo) = 1` and
    /// `tail(xi) = 0`; below `supp_lo` it is treated as identically 1.
    pub fn dominant_tail(xi: f64, supp_lo: f64, tail: Arc<TailFn>) -> Result<Self, ModelError> {
        check_xi(xi)?;
        if !(supp_lo >= 0.0 && supp_lo <= xi) {
            return Err(ModelError::InvalidParameter {
                name: "supp_lo",
                detail: format!("support floor must lie in [0, xi={xi}], got {supp_lo}"),
            });
        }
        Ok(Self {
            provenance: MomentProvenance::DominantStep,
            xi,
            law: Law::Tail { supp_lo, tail },
            cache: Mutex::new(BTreeMap::new()),
        })
    }

    /// Caller-supplied moments `p_1, p_2, ...` of an activity variable with
    /// ceiling `xi`.
    pub fn custom(xi: f64, moments: Vec<f64>) -> Result<Self, ModelError> {
        check_xi(xi)?;
        if moments.is_empty() {
            return Err(ModelError::InvalidParameter {
                name: "moments",
                detail: "at least one moment is required".into(),
            });
        }
        let mut prev = 1.0;
        for (i, &p) in moments.iter().enumerate() {
            if !(p > 0.0 && p <= 1.0) || !p.is_finite() {
                return Err(ModelError::InvalidParameter {
                    name: "moments",
                    detail: format!("moment {} must lie in (0, 1], got {p}", i + 1),
                });
            }
            if p > prev * (1.0 + 1e-12) {
                return Err(ModelError::InvalidParameter {
                    name: "moments",
                    detail: format!(
                        "moments of a [0,1] variable must be nonincreasing; moment {} = {p} exceeds its predecessor {prev}",
                        i + 1
                    ),
                });
            }
            prev = p;
        }
        // Order-3 moment-matrix (Cauchy–Schwarz) inequalities: violations mean
        // the numbers cannot be moments of any distribution, but empirical
        // estimates may miss by sampling noise, so warn instead of rejecting.
        if moments.len() >= 2 && moments[1] < moments[0] * moments[0] * (1.0 - 1e-12) {
            log::warn!(
                "activity moments violate p_2 >= p_1^2 ({} < {}); proceeding anyway",
                moments[1],
                moments[0] * moments[0]
            );
        }
        if moments.len() >= 3 && moments[0] * moments[2] < moments[1] * moments[1] * (1.0 - 1e-12)
        {
            log::warn!(
                "activity moments violate p_1 p_3 >= p_2^2 ({} < {}); proceeding anyway",
                moments[0] * moments[2],
                moments[1] * moments[1]
            );
        }
        if moments[0] > xi {
            log::warn!(
                "first activity moment {} exceeds the activity ceiling xi = {xi}",
                moments[0]
            );
        }
        Ok(Self {
            provenance: MomentProvenance::Custom,
            xi,
            law: Law::List(moments),
            cache: Mutex::new(BTreeMap::new()),
        })
    }

    pub fn provenance(&self) -> MomentProvenance {
        self.provenance
    }

    /// Activity ceiling: no transmitter can be active more often than its
    /// medium-access probability.
    pub fn xi(&self) -> f64 {
        self.xi
    }

    /// The single support point if the law is a point mass, else `None`.
    pub fn as_point(&self) -> Option<f64> {
        match &self.law {
            Law::Point(z) => Some(*z),
            _ => None,
        }
    }

    /// Whether a distribution (not just a moment list) backs this store.
    pub fn is_law_backed(&self) -> bool {
        !matches!(self.law, Law::List(_))
    }

    /// Raw moment `p_m = E[zeta^m]`; `m = 0` returns 1. Lazily computed and
    /// cached for distribution-backed laws.
    pub fn moment(&self, m: u32) -> Result<f64, ModelError> {
        if m == 0 {
            return Ok(1.0);
        }
        if let Some(&v) = self.cache.lock().expect("moment cache poisoned").get(&m) {
            return Ok(v);
        }
        let v = match &self.law {
            Law::Point(z) => z.powi(m as i32),
            Law::Tail { supp_lo, tail } => {
                // E[zeta^m] = m * Int_0^xi t^(m-1) P[zeta > t] dt, with the
                // tail identically 1 on [0, supp_lo].
                let mf = m as f64;
                let head = supp_lo.powi(m as i32);
                let body = if *supp_lo < self.xi {
                    let opts = QuadOptions {
                        rel_tol: 1e-12,
                        abs_tol: 1e-16,
                        ..QuadOptions::default()
                    };
                    numerics::integrate(
                        |t| mf * t.powi(m as i32 - 1) * tail(t),
                        *supp_lo,
                        self.xi,
                        &opts,
                    )?
                    .value
                } else {
                    0.0
                };
                // Quadrature noise must not push the moment past its hard
                // bounds [0, xi^m]. At depths where xi^m itself underflows
                // the moment is below f64 resolution and rounds to zero.
                (head + body).clamp(0.0, self.xi.powi(m as i32))
            }
            Law::List(v) => {
                return v
                    .get(m as usize - 1)
                    .copied()
                    .ok_or(ModelError::MomentUnavailable { m, have: v.len() });
            }
        };
        self.cache
            .lock()
            .expect("moment cache poisoned")
            .insert(m, v);
        Ok(v)
    }

    /// Expectation `E[g(zeta)]` of a C^1 function over a distribution-backed
    /// law, using `E[g] = g(supp_lo) + Int_{supp_lo}^{xi} g'(t) P[zeta > t] dt`.
    /// `dg` must be the derivative of `g` and integrable on the support.
    pub fn expect_smooth(
        &self,
        g: impl Fn(f64) -> f64,
        dg: impl Fn(f64) -> f64,
    ) -> Result<f64, ModelError> {
        match &self.law {
            Law::Point(z) => Ok(g(*z)),
            Law::Tail { supp_lo, tail } => {
                if *supp_lo >= self.xi {
                    return Ok(g(*supp_lo));
                }
                let opts = QuadOptions {
                    rel_tol: 1e-12,
                    abs_tol: 1e-16,
                    ..QuadOptions::default()
                };
                let q = numerics::integrate(|t| dg(t) * tail(t), *supp_lo, self.xi, &opts)?;
                Ok(g(*supp_lo) + q.value)
            }
            Law::List(_) => Err(ModelError::LawUnavailable),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn network_params_validation() {
        assert!(NetworkParams::new(1e-3, 15.0, 4.0, 2.0, 0.5).is_ok());
        assert!(NetworkParams::new(0.0, 15.0, 4.0, 2.0, 0.5).is_err());
        assert!(NetworkParams::new(1e-3, 15.0, 2.0, 2.0, 0.5).is_err());
        assert!(NetworkParams::new(1e-3, 15.0, 4.0, 2.0, 0.0).is_err());
        assert!(NetworkParams::new(1e-3, 15.0, 4.0, 2.0, 1.1).is_err());
        assert!(NetworkParams::new(1e-3, -1.0, 4.0, 2.0, 0.5).is_err());
    }

    #[test]
    fn delta_hat_alpha_four_is_half_pi() {
        let p = NetworkParams::new(1e-3, 15.0, 4.0, 2.0, 0.5).unwrap();
        assert_eq!(p.delta(), 0.5);
        assert!((p.delta_hat() - std::f64::consts::PI / 2.0).abs() < 1e-14);
    }

    #[test]
    fn traffic_derived_quantities() {
        let t = TrafficParams::new(0.3).unwrap();
        assert!((t.z_a() - 7.0 / 3.0).abs() < 1e-15);
        assert!((t.lambda_a_prime() - 3.0 / 7.0).abs() < 1e-15);

        let sat = TrafficParams::new(1.0).unwrap();
        assert_eq!(sat.z_a(), 0.0);
        assert_eq!(sat.lambda_a_prime(), f64::INFINITY);

        assert!(TrafficParams::new(0.0).is_err());
        assert!(TrafficParams::new(1.5).is_err());
    }

    #[test]
    fn busy_prob_matches_odds_form() {
        // lambda' / (lambda' + s) in the stable direct form.
        let t = TrafficParams::new(0.3).unwrap();
        let s = 0.5;
        let lp = t.lambda_a_prime();
        assert!((t.busy_prob(s) - lp / (lp + s)).abs() < 1e-15);
        // Saturated arrivals keep the queue always busy.
        let sat = TrafficParams::new(1.0).unwrap();
        assert_eq!(sat.busy_prob(0.7), 1.0);
        // Zero service leaves the queue busy forever once seeded.
        assert_eq!(t.busy_prob(0.0), 1.0);
    }

    #[test]
    fn saturated_moments_are_powers_of_xi() {
        let acts = ActivityMoments::saturated(0.5).unwrap();
        assert_eq!(acts.provenance(), MomentProvenance::Saturated);
        for m in 1..=6u32 {
            let p = acts.moment(m).unwrap();
            assert!((p - 0.5f64.powi(m as i32)).abs() < 1e-15, "m={m}: {p}");
        }
        assert_eq!(acts.moment(0).unwrap(), 1.0);
    }

    #[test]
    fn tail_law_uniform_matches_closed_moments() {
        // zeta uniform on [0, xi]: tail(t) = 1 - t/xi, E[zeta^m] = xi^m/(m+1).
        let xi = 0.5;
        let acts = ActivityMoments::dominant_tail(
            xi,
            0.0,
            Arc::new(move |t: f64| (1.0 - t / xi).clamp(0.0, 1.0)),
        )
        .unwrap();
        for m in 1..=4u32 {
            let want = xi.powi(m as i32) / (m as f64 + 1.0);
            let got = acts.moment(m).unwrap();
            assert!(
                ((got - want) / want).abs() < 1e-10,
                "m={m}: got {got}, want {want}"
            );
        }
    }

    #[test]
    fn tail_law_point_via_step_tail() {
        // Step tail: all mass at z0 = 0.3 inside ceiling 0.5.
        let acts = ActivityMoments::dominant_tail(
            0.5,
            0.3,
            Arc::new(|t: f64| if t < 0.3 { 1.0 } else { 0.0 }),
        )
        .unwrap();
        let p1 = acts.moment(1).unwrap();
        assert!((p1 - 0.3).abs() < 1e-10, "{p1}");
        let p2 = acts.moment(2).unwrap();
        assert!((p2 - 0.09).abs() < 1e-10, "{p2}");
    }

    #[test]
    fn expect_smooth_on_uniform_law() {
        // E[zeta^2] via expect_smooth with g = t^2 against the closed form.
        let xi = 0.8;
        let acts = ActivityMoments::dominant_tail(
            xi,
            0.0,
            Arc::new(move |t: f64| (1.0 - t / xi).clamp(0.0, 1.0)),
        )
        .unwrap();
        let got = acts
            .expect_smooth(|t| t * t, |t| 2.0 * t)
            .unwrap();
        let want = xi * xi / 3.0;
        assert!(((got - want) / want).abs() < 1e-10, "got {got}, want {want}");
    }

    #[test]
    fn custom_moments_validation_and_lookup() {
        let acts = ActivityMoments::custom(0.5, vec![0.4, 0.2, 0.11]).unwrap();
        assert_eq!(acts.moment(2).unwrap(), 0.2);
        assert!(matches!(
            acts.moment(4),
            Err(ModelError::MomentUnavailable { m: 4, have: 3 })
        ));
        assert!(matches!(
            acts.expect_smooth(|t| t, |_| 1.0),
            Err(ModelError::LawUnavailable)
        ));
        // Increasing sequences cannot be moments of a [0,1] variable.
        assert!(ActivityMoments::custom(0.5, vec![0.2, 0.4]).is_err());
        assert!(ActivityMoments::custom(0.5, vec![]).is_err());
        assert!(ActivityMoments::custom(0.5, vec![1.5]).is_err());
    }

    #[test]
    fn moment_cache_returns_identical_values() {
        let acts = ActivityMoments::dominant_tail(
            0.5,
            0.0,
            Arc::new(|t: f64| (1.0 - 2.0 * t).clamp(0.0, 1.0)),
        )
        .unwrap();
        let a = acts.moment(3).unwrap();
        let b = acts.moment(3).unwrap();
        assert_eq!(a, b);
    }
}
