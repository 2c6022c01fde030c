//! Spatial moments of the link success probability and the two-step
//! interference bound.
//!
//! In a stationary field of interfering transmitters with Rayleigh fading and
//! power-law path loss, the probability `mu` that a given link decodes in a
//! slot is itself random across space. Its integer moments (positive and
//! negative) have the exponential form
//!
//! ```text
//! M_b = exp( -pi lambda_sd beta^delta R^2 delta_hat C(b) )
//! ```
//!
//! where `C(b)` is a series in the raw moments of the per-interferer activity
//! fraction. This module evaluates `C(b)` (with closed forms for the inverse
//! moments `b = -1, -2` when the activity law is known), fits a beta
//! distribution to `(M_1, M_2)` by moment matching, and constructs the
//! bounding "dominant" system in which each queue is replaced by a busier
//! one: first with saturated interferers, then with interferers whose
//! activity is modulated by the step-one success law. Success probabilities
//! under the dominant system lower-bound the true ones, so age statistics
//! derived from them are upper bounds.

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use thiserror::Error;

use crate::model::{ActivityMoments, ModelError, NetworkParams, TrafficParams};
use crate::numerics::{self, Kahan, NumericsError, SeriesControl};

/// Errors from moment evaluation, beta fitting, and the dominant-system
/// construction.
#[derive(Debug, Error)]
pub enum AnalyticError {
    /// `(M_1, M_2)` cannot be matched by any beta distribution.
    #[error("invalid beta-fit moments: need 0 < M1^2 < M2 < M1 < 1, got M1={m1}, M2={m2}")]
    InvalidMoments { m1: f64, m2: f64 },
    /// The activity series cancelled away too much precision to report a
    /// trustworthy value.
    #[error("activity series for C({b}) lost {digits_lost:.1} significant digits (limit 10)")]
    SeriesUnstable { b: i32, digits_lost: f64 },
    /// An argument fell outside the documented domain.
    #[error("domain error in {what}: {detail}")]
    Domain { what: &'static str, detail: String },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

// ---------------------------------------------------------------------------
// Beta approximation of the success-probability law
// ---------------------------------------------------------------------------

/// Beta distribution `Beta(kappa1, kappa2)` matched to the first two moments
/// of the spatial success-probability law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaApprox {
    pub kappa1: f64,
    pub kappa2: f64,
}

impl BetaApprox {
    pub fn mean(&self) -> f64 {
        self.kappa1 / (self.kappa1 + self.kappa2)
    }

    pub fn second_moment(&self) -> f64 {
        let s = self.kappa1 + self.kappa2;
        self.kappa1 * (self.kappa1 + 1.0) / (s * (s + 1.0))
    }

    pub fn variance(&self) -> f64 {
        let s = self.kappa1 + self.kappa2;
        self.kappa1 * self.kappa2 / (s * s * (s + 1.0))
    }

    /// Regularized-incomplete-beta CDF, total on the real line (clamped
    /// outside [0, 1]). Internal evaluation failure — which would indicate a
    /// broken continued fraction, not bad input — is logged and surfaces as
    /// NaN so downstream quadratures fail loudly instead of silently.
    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        if x >= 1.0 {
            return 1.0;
        }
        match numerics::reg_inc_beta(x, self.kappa1, self.kappa2) {
            Ok(v) => v,
            Err(e) => {
                log::error!("incomplete beta failed at x={x}, kappa=({}, {}): {e}", self.kappa1, self.kappa2);
                f64::NAN
            }
        }
    }

    /// Integer moment `E[mu^b]` under the beta law, for positive or negative
    /// `b`. Inverse moments of order `n` exist only when `kappa1 > n`;
    /// otherwise the moment diverges and `+inf` is returned.
    pub fn moment(&self, b: i32) -> f64 {
        if b == 0 {
            return 1.0;
        }
        let s = self.kappa1 + self.kappa2;
        if b > 0 {
            let mut prod = 1.0;
            for j in 0..b {
                prod *= (self.kappa1 + j as f64) / (s + j as f64);
            }
            prod
        } else {
            let n = -b;
            if self.kappa1 <= n as f64 {
                return f64::INFINITY;
            }
            let mut prod = 1.0;
            for j in 1..=n {
                prod *= (s - j as f64) / (self.kappa1 - j as f64);
            }
            prod
        }
    }
}

/// Moment-matched beta fit: solves `mean = M1`, `E[mu^2] = M2`.
///
/// Valid exactly when `0 < M1^2 < M2 < M1 < 1` (positive variance, support
/// inside the unit interval). Outside that region the moments belong to a
/// (near-)degenerate law and the caller should fall back to a point mass;
/// see [`fit_beta_or_point`].
pub fn fit_beta(m1: f64, m2: f64) -> Result<BetaApprox, AnalyticError> {
    let valid = m1 > 0.0 && m1 < 1.0 && m2 > m1 * m1 && m2 < m1 && m1.is_finite() && m2.is_finite();
    if !valid {
        return Err(AnalyticError::InvalidMoments { m1, m2 });
    }
    let kappa2 = (m1 - m2) * (1.0 - m1) / (m2 - m1 * m1);
    let kappa1 = m1 * kappa2 / (1.0 - m1);
    Ok(BetaApprox { kappa1, kappa2 })
}

/// Law of the spatial success probability: a fitted beta, or a point mass
/// when the moments are too degenerate to fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MuLaw {
    Beta(BetaApprox),
    Point(f64),
}

impl MuLaw {
    /// CDF of the success probability, total on the real line.
    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            MuLaw::Beta(ba) => ba.cdf(x),
            MuLaw::Point(p) => {
                if x >= *p {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Integer moment `E[mu^b]`, positive or negative `b`.
    pub fn moment(&self, b: i32) -> f64 {
        match self {
            MuLaw::Beta(ba) => ba.moment(b),
            MuLaw::Point(p) => p.powi(b),
        }
    }

    pub fn mean(&self) -> f64 {
        self.moment(1)
    }
}

/// Fits a beta law to `(M1, M2)`, degrading to a point mass at `M1` (with a
/// log note) when no beta matches — e.g. when the variance underflows.
pub fn fit_beta_or_point(m1: f64, m2: f64) -> MuLaw {
    match fit_beta(m1, m2) {
        Ok(ba) => MuLaw::Beta(ba),
        Err(e) => {
            log::info!("beta fit degenerate ({e}); using point mass at {m1}");
            MuLaw::Point(m1)
        }
    }
}

/// Fraction of links whose per-slot success probability is at least `x`:
/// the complementary CDF of the fitted success law.
pub fn meta_distribution(x: f64, law: &MuLaw) -> f64 {
    1.0 - law.cdf(x)
}

// ---------------------------------------------------------------------------
// The activity series C(b) and the success moments M_b
// ---------------------------------------------------------------------------

/// Activity series
/// `C(b) = sum_{m>=1} (b choose m) (delta-1 choose m-1) p_m`,
/// evaluated term by term. For positive integer `b` the sum terminates at
/// `m = b`; for negative `b` the terms share one sign and decay at least
/// geometrically because `p_m <= xi^m`.
///
/// Positive-`b` terms alternate, and their binomial growth outpaces the
/// moment decay until `m` is well past `b/2`; once that cancellation has
/// consumed ten significant digits the value would be noise, so the
/// evaluation aborts with [`AnalyticError::SeriesUnstable`] instead. The
/// scale for that test is `max(|partial sum|, p_1)`: `|C(b)|` never falls
/// below the first raw activity moment, so a partial sum passing through
/// zero mid-cancellation cannot trip the monitor by itself.
pub fn c_coefficient_series(
    b: i32,
    acts: &ActivityMoments,
    delta: f64,
    ctrl: &SeriesControl,
) -> Result<f64, AnalyticError> {
    ctrl.validate()?;
    let anchor = acts.moment(1)?;
    let mut sum = Kahan::default();
    let mut abs_mass = Kahan::default();
    let mut small_streak = 0usize;
    let mut last = f64::NAN;
    for k in 0..ctrl.max_terms {
        let m = k as u32 + 1;
        let coef = numerics::gen_binomial(b as f64, m) * numerics::gen_binomial(delta - 1.0, m - 1);
        let t = if coef == 0.0 {
            0.0
        } else {
            let t = coef * acts.moment(m)?;
            // An overflowed coefficient against an underflowed moment is an
            // indeterminate inf * 0. Negative-b terms all share one sign, so
            // by that depth the sum is already saturated; keep the sign
            // rather than poison the accumulator.
            if t.is_nan() && b < 0 {
                f64::NEG_INFINITY
            } else {
                t
            }
        };
        sum.add(t);
        abs_mass.add(t.abs());
        last = t;
        let scale = sum.value().abs().max(anchor);
        if abs_mass.value() > 1e10 * scale {
            return Err(AnalyticError::SeriesUnstable {
                b,
                digits_lost: (abs_mass.value() / scale).log10(),
            });
        }
        let threshold = ctrl.abs_tol.max(ctrl.rel_tol * sum.value().abs());
        if t.abs() <= threshold {
            small_streak += 1;
            if small_streak >= 2 {
                return Ok(sum.value());
            }
        } else {
            small_streak = 0;
        }
    }
    Err(NumericsError::SeriesBudget {
        partial: sum.value(),
        last_term: last.abs(),
        terms: ctrl.max_terms,
    }
    .into())
}

/// Activity series `C(b)`, using closed forms for the inverse-moment orders
/// `b = -1` and `b = -2` when the activity store is distribution-backed:
///
/// ```text
/// C(-1) = -E[ zeta (1-zeta)^(delta-1) ]
/// C(-2) = (delta-1) E[ zeta (1-zeta)^(delta-2) ] - (delta+1) E[ zeta (1-zeta)^(delta-1) ]
/// ```
///
/// All other orders (and moment-list stores) go through the series. The
/// closed forms correctly produce infinite values when the activity can reach
/// 1, where the inverse success moments genuinely diverge.
pub fn c_coefficient(
    b: i32,
    acts: &ActivityMoments,
    delta: f64,
    ctrl: &SeriesControl,
) -> Result<f64, AnalyticError> {
    let g1 = move |t: f64| t * (1.0 - t).powf(delta - 1.0);
    let dg1 = move |t: f64| (1.0 - t).powf(delta - 2.0) * (1.0 - delta * t);
    let g2 = move |t: f64| t * (1.0 - t).powf(delta - 2.0);
    let dg2 = move |t: f64| (1.0 - t).powf(delta - 3.0) * (1.0 + (1.0 - delta) * t);

    match b {
        -1 if acts.as_point().is_some() => Ok(-g1(acts.as_point().unwrap())),
        -2 if acts.as_point().is_some() => {
            let z = acts.as_point().unwrap();
            Ok((delta - 1.0) * g2(z) - (delta + 1.0) * g1(z))
        }
        -1 if acts.is_law_backed() && acts.xi() < 1.0 => Ok(-acts.expect_smooth(g1, dg1)?),
        -2 if acts.is_law_backed() && acts.xi() < 1.0 => {
            let e1 = acts.expect_smooth(g1, dg1)?;
            let e2 = acts.expect_smooth(g2, dg2)?;
            Ok((delta - 1.0) * e2 - (delta + 1.0) * e1)
        }
        _ => c_coefficient_series(b, acts, delta, ctrl),
    }
}

/// Scale of the interference exponent:
/// `pi lambda_sd beta^delta R^2 delta_hat`.
pub fn interference_exponent_scale(params: &NetworkParams) -> f64 {
    std::f64::consts::PI
        * params.lambda_sd
        * params.beta_thr.powf(params.delta())
        * params.r_dist
        * params.r_dist
        * params.delta_hat()
}

/// Spatial moment `M_b = E[mu^b]` of the link success probability under the
/// activity law in `acts`; negative `b` yields the inverse moments that feed
/// the age formulas. A diverging inverse moment is returned as `+inf` with a
/// log note rather than as an error, since the age bounds remain
/// well-defined (infinite) in that case.
pub fn moment_success(
    b: i32,
    params: &NetworkParams,
    acts: &ActivityMoments,
    ctrl: &SeriesControl,
) -> Result<f64, AnalyticError> {
    if (acts.xi() - params.xi).abs() > 1e-12 {
        return Err(AnalyticError::Domain {
            what: "moment_success",
            detail: format!(
                "activity ceiling {} does not match medium-access probability {}",
                acts.xi(),
                params.xi
            ),
        });
    }
    let c = c_coefficient(b, acts, params.delta(), ctrl)?;
    let exponent = -interference_exponent_scale(params) * c;
    if exponent > 709.0 {
        log::warn!("success moment M_{b} overflows (exponent {exponent:.3e}); reporting +inf");
        return Ok(f64::INFINITY);
    }
    Ok(exponent.exp())
}

/// Cache of success moments `M_b` for one network/activity combination, so
/// the age formulas can ask for the same inverse moments repeatedly without
/// re-summing the activity series.
#[derive(Debug)]
pub struct SuccessMoments {
    params: NetworkParams,
    acts: ActivityMoments,
    ctrl: SeriesControl,
    cache: Mutex<BTreeMap<i32, f64>>,
}

impl Clone for SuccessMoments {
    fn clone(&self) -> Self {
        Self {
            params: self.params,
            acts: self.acts.clone(),
            ctrl: self.ctrl,
            cache: Mutex::new(self.cache.lock().expect("moment cache poisoned").clone()),
        }
    }
}

impl SuccessMoments {
    pub fn new(
        params: NetworkParams,
        acts: ActivityMoments,
        ctrl: SeriesControl,
    ) -> Result<Self, AnalyticError> {
        params.validate()?;
        ctrl.validate()?;
        if (acts.xi() - params.xi).abs() > 1e-12 {
            return Err(AnalyticError::Domain {
                what: "SuccessMoments",
                detail: format!(
                    "activity ceiling {} does not match medium-access probability {}",
                    acts.xi(),
                    params.xi
                ),
            });
        }
        Ok(Self {
            params,
            acts,
            ctrl,
            cache: Mutex::new(BTreeMap::new()),
        })
    }

    /// Cached `M_b`.
    pub fn get(&self, b: i32) -> Result<f64, AnalyticError> {
        if let Some(&v) = self.cache.lock().expect("moment cache poisoned").get(&b) {
            return Ok(v);
        }
        let v = moment_success(b, &self.params, &self.acts, &self.ctrl)?;
        self.cache
            .lock()
            .expect("moment cache poisoned")
            .insert(b, v);
        Ok(v)
    }

    pub fn params(&self) -> &NetworkParams {
        &self.params
    }

    pub fn activity(&self) -> &ActivityMoments {
        &self.acts
    }
}

// ---------------------------------------------------------------------------
// Dominant-system activity law
// ---------------------------------------------------------------------------

/// Activity fraction of a queue whose per-slot success probability is `mu`:
/// the medium-access probability times the stationary busy probability, in a
/// form stable for every `lambda_a` in (0, 1].
fn modulated_activity(xi: f64, lambda_a: f64, mu: f64) -> f64 {
    xi * lambda_a / (lambda_a + xi * mu * (1.0 - lambda_a))
}

/// Activity law of interferers in the step-two dominant system: each
/// interferer's busy fraction is driven by its own success probability drawn
/// from the step-one law. Deterministic laws (including the saturated-arrival
/// limit, where the activity is a step at `xi`) become point masses; a beta
/// step-one law yields a tail-function store on the exact support.
pub fn dominant_activity(
    params: &NetworkParams,
    traffic: &TrafficParams,
    step1: &MuLaw,
) -> Result<ActivityMoments, AnalyticError> {
    params.validate()?;
    traffic.validate()?;
    let xi = params.xi;
    let lambda_a = traffic.lambda_a;
    if lambda_a == 1.0 {
        // Every slot brings an arrival: interferer queues never idle.
        return Ok(ActivityMoments::dominant_point(xi, xi)?);
    }
    match step1 {
        MuLaw::Point(mu0) => {
            Ok(ActivityMoments::dominant_point(xi, modulated_activity(xi, lambda_a, *mu0))?)
        }
        MuLaw::Beta(ba) => {
            let ba = *ba;
            let supp_lo = modulated_activity(xi, lambda_a, 1.0);
            let lambda_prime = lambda_a / (1.0 - lambda_a);
            // P[zeta > t] = P[mu < lambda' (xi - t) / (t xi)].
            let tail = move |t: f64| {
                if t >= xi {
                    0.0
                } else {
                    ba.cdf(lambda_prime * (xi - t) / (t * xi))
                }
            };
            Ok(ActivityMoments::dominant_tail(xi, supp_lo, Arc::new(tail))?)
        }
    }
}

/// CDF of the dominant-system interferer activity at `t`.
///
/// Domain: `0 < t <= xi`; `t = xi` returns exactly 1 (activity never exceeds
/// the medium-access probability), and the CDF tends to 0 as `t` approaches
/// the support floor from above.
pub fn activity_cdf_dominant(
    t: f64,
    params: &NetworkParams,
    traffic: &TrafficParams,
    step1: &MuLaw,
) -> Result<f64, AnalyticError> {
    params.validate()?;
    traffic.validate()?;
    let xi = params.xi;
    // Grids over (0, xi] built by multiplication often land a rounding step
    // above xi; absorb that rather than reject it.
    if !(t > 0.0 && t <= xi * (1.0 + 4.0 * f64::EPSILON)) {
        return Err(AnalyticError::Domain {
            what: "activity_cdf_dominant",
            detail: format!("t must lie in (0, xi={xi}], got {t}"),
        });
    }
    if t >= xi {
        return Ok(1.0);
    }
    let lambda_a = traffic.lambda_a;
    if lambda_a == 1.0 {
        return Ok(0.0); // all mass at xi, and t < xi here
    }
    match step1 {
        MuLaw::Point(mu0) => {
            Ok(if t >= modulated_activity(xi, lambda_a, *mu0) {
                1.0
            } else {
                0.0
            })
        }
        MuLaw::Beta(ba) => {
            let lambda_prime = lambda_a / (1.0 - lambda_a);
            Ok(1.0 - ba.cdf(lambda_prime * (xi - t) / (t * xi)))
        }
    }
}

/// Raw moment `E[zeta^m]` of the dominant-system activity; always in
/// `(0, xi^m]`.
pub fn activity_moment_dominant(
    m: u32,
    params: &NetworkParams,
    traffic: &TrafficParams,
    step1: &MuLaw,
) -> Result<f64, AnalyticError> {
    Ok(dominant_activity(params, traffic, step1)?.moment(m)?)
}

// ---------------------------------------------------------------------------
// Two-step bound
// ---------------------------------------------------------------------------

/// The two stages of the dominant-system bound, bundled: saturated-interferer
/// moments and law (step one), the modulated activity they imply, and the
/// tightened moments and law computed from that activity (step two).
///
/// Success probabilities satisfy `M_1(step one) <= M_1(step two) <= M_1(true
/// system)`, so age statistics derived from step two are upper bounds that
/// are tighter than the saturated ones.
#[derive(Debug, Clone)]
pub struct TwoStep {
    pub step1_moments: SuccessMoments,
    pub step1_law: MuLaw,
    pub activity: ActivityMoments,
    pub step2_moments: SuccessMoments,
    pub step2_law: MuLaw,
}

/// Builds the full two-step construction for one parameter set.
pub fn two_step(
    params: &NetworkParams,
    traffic: &TrafficParams,
    ctrl: &SeriesControl,
) -> Result<TwoStep, AnalyticError> {
    let saturated = ActivityMoments::saturated(params.xi)?;
    let step1_moments = SuccessMoments::new(*params, saturated, *ctrl)?;
    let step1_law = fit_beta_or_point(step1_moments.get(1)?, step1_moments.get(2)?);
    let activity = dominant_activity(params, traffic, &step1_law)?;
    let step2_moments = SuccessMoments::new(*params, activity.clone(), *ctrl)?;
    let step2_law = fit_beta_or_point(step2_moments.get(1)?, step2_moments.get(2)?);
    Ok(TwoStep {
        step1_moments,
        step1_law,
        activity,
        step2_moments,
        step2_law,
    })
}
