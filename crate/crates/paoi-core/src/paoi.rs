//! Peak-age statistics of zero-buffer source queues, conditioned on a link's
//! per-slot success probability and averaged over the spatial law of that
//! probability.
//!
//! Time is slotted. A source generates packets as a Bernoulli process with
//! per-slot probability `lambda_a`, holds at most one packet, transmits in a
//! slot with probability `xi` while holding one, and a transmission delivers
//! with the link's success probability `mu`. The peak age of information is
//! the age of the previous delivery measured in the slot a fresh delivery
//! arrives, sampled at delivery instants.
//!
//! Conditioned on `mu`, a non-preemptive queue (arrivals during service are
//! discarded) has mean peak age `Z_a + 2/(xi mu)`; a preemptive queue
//! (arrivals replace the packet in service) has `Z_a + 1/(xi mu) + 1/q`
//! where `q = lambda_a + xi mu (1 - lambda_a)` is the parameter of its
//! geometric service time. Spatial moments of the peak age follow by
//! expanding the powers of these conditional forms and taking expectations
//! over `mu`: the non-preemptive case needs only the inverse success moments
//! `M_{-n}`, while the preemptive case additionally needs the mixed
//! expectations `S(n; m) = E[mu^-m q^-n]` evaluated by [`s_nm`].

use thiserror::Error;

use crate::analytic::{AnalyticError, MuLaw, SuccessMoments};
use crate::model::{Discipline, TrafficParams};
use crate::numerics::{self, Kahan, NumericsError, QuadOptions, SeriesControl};

/// Errors from the peak-age formulas.
#[derive(Debug, Error)]
pub enum PaoiError {
    /// An argument fell outside the documented domain.
    #[error("domain error in {what}: {detail}")]
    Domain { what: &'static str, detail: String },
    /// The mixed-moment series lost too much precision to cancellation; use
    /// the quadrature path with a distribution-backed law instead.
    #[error("mixed-moment series lost {digits_lost:.1} significant digits (limit 10); use the quadrature path")]
    SeriesUnstable { digits_lost: f64 },
    /// The quadrature path was requested without a distribution-backed law.
    #[error("quadrature path requires a distribution-backed success law, not bound moments")]
    LawRequired,
    #[error(transparent)]
    Analytic(#[from] AnalyticError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

fn check_unit(what: &'static str, name: &str, v: f64) -> Result<(), PaoiError> {
    if !(v > 0.0 && v <= 1.0) {
        return Err(PaoiError::Domain {
            what,
            detail: format!("{name} must lie in (0, 1], got {v}"),
        });
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Conditional (per-link) statistics
// ---------------------------------------------------------------------------

/// Geometric service parameter of the preemptive queue: the probability that
/// a slot either delivers the packet in service or replaces it with a fresher
/// arrival, `q = lambda_a + xi mu (1 - lambda_a)`.
pub fn service_prob_preemptive(mu: f64, xi: f64, traffic: &TrafficParams) -> f64 {
    traffic.lambda_a + xi * mu * (1.0 - traffic.lambda_a)
}

/// Mean peak age of a non-preemptive queue with success probability `mu`:
/// `Z_a + 2/(xi mu)`.
pub fn mean_paoi_np(mu: f64, xi: f64, traffic: &TrafficParams) -> Result<f64, PaoiError> {
    check_unit("mean_paoi_np", "mu", mu)?;
    check_unit("mean_paoi_np", "xi", xi)?;
    Ok(traffic.z_a() + 2.0 / (xi * mu))
}

/// Mean peak age of a preemptive queue with success probability `mu`:
/// `Z_a + 1/(xi mu) + 1/q`.
pub fn mean_paoi_p(mu: f64, xi: f64, traffic: &TrafficParams) -> Result<f64, PaoiError> {
    check_unit("mean_paoi_p", "mu", mu)?;
    check_unit("mean_paoi_p", "xi", xi)?;
    Ok(traffic.z_a() + 1.0 / (xi * mu) + 1.0 / service_prob_preemptive(mu, xi, traffic))
}

/// PMF of the non-preemptive service time (slots from start of service to
/// delivery): geometric on {1, 2, ...} with parameter `xi mu`.
pub fn service_pmf_np(n: u32, mu: f64, xi: f64) -> Result<f64, PaoiError> {
    check_unit("service_pmf_np", "mu", mu)?;
    check_unit("service_pmf_np", "xi", xi)?;
    if n == 0 {
        return Err(PaoiError::Domain {
            what: "service_pmf_np",
            detail: "service time is supported on {1, 2, ...}".into(),
        });
    }
    let s = xi * mu;
    Ok(s * (1.0 - s).powi(n as i32 - 1))
}

/// PMF of the preemptive effective service time (slots from a delivered
/// packet's arrival to its delivery): geometric on {1, 2, ...} with parameter
/// `q = lambda_a + xi mu (1 - lambda_a)`.
pub fn service_pmf_p(n: u32, mu: f64, xi: f64, traffic: &TrafficParams) -> Result<f64, PaoiError> {
    check_unit("service_pmf_p", "mu", mu)?;
    check_unit("service_pmf_p", "xi", xi)?;
    if n == 0 {
        return Err(PaoiError::Domain {
            what: "service_pmf_p",
            detail: "service time is supported on {1, 2, ...}".into(),
        });
    }
    let q = service_prob_preemptive(mu, xi, traffic);
    Ok(q * (1.0 - q).powi(n as i32 - 1))
}

/// Moment generating function `E[exp(t A)]` of the preemptive peak age:
/// the product of three independent geometric transforms,
///
/// ```text
/// M(t) = lambda_a xi mu q exp(2t)
///        / [ (1-(1-lambda_a)e^t) (1-(1-xi mu)e^t) (1-(1-q)e^t) ]
/// ```
///
/// defined for `e^t` below the smallest pole `1/(1-r)` over
/// `r in {lambda_a, xi mu, q}`.
pub fn paoi_mgf_p(t: f64, mu: f64, xi: f64, traffic: &TrafficParams) -> Result<f64, PaoiError> {
    check_unit("paoi_mgf_p", "mu", mu)?;
    check_unit("paoi_mgf_p", "xi", xi)?;
    let s = xi * mu;
    let q = service_prob_preemptive(mu, xi, traffic);
    let et = t.exp();
    for r in [traffic.lambda_a, s, q] {
        if r < 1.0 && et >= 1.0 / (1.0 - r) {
            return Err(PaoiError::Domain {
                what: "paoi_mgf_p",
                detail: format!(
                    "t = {t} is at or beyond the radius of convergence (pole at exp(t) = {})",
                    1.0 / (1.0 - r)
                ),
            });
        }
    }
    let num = traffic.lambda_a * s * q * (2.0 * t).exp();
    let den = (1.0 - (1.0 - traffic.lambda_a) * et) * (1.0 - (1.0 - s) * et) * (1.0 - (1.0 - q) * et);
    Ok(num / den)
}

// ---------------------------------------------------------------------------
// Spatial context: who provides the success moments
// ---------------------------------------------------------------------------

/// Source of the spatial success-probability information used by the moment
/// expansions. The `Moments` variant carries the exact bound moments from the
/// interference functional and supports the series path only; the `Law`
/// variant carries a fitted distribution and supports both paths.
#[derive(Debug, Clone, Copy)]
pub enum MomentSource<'a> {
    Moments(&'a SuccessMoments),
    Law(&'a MuLaw),
}

/// One spatial scenario: traffic, medium access, and a success-moment source.
///
/// A context built on exact bound moments can additionally carry a fitted
/// law via [`SpatialContext::with_fallback_law`]; [`s_nm`] then reroutes the
/// mixed moments whose series cancel badly to quadrature against that law,
/// while the pure inverse moments keep coming from the exact store.
#[derive(Debug, Clone, Copy)]
pub struct SpatialContext<'a> {
    traffic: &'a TrafficParams,
    xi: f64,
    source: MomentSource<'a>,
    fallback: Option<&'a MuLaw>,
}

impl<'a> SpatialContext<'a> {
    pub fn new(
        traffic: &'a TrafficParams,
        xi: f64,
        source: MomentSource<'a>,
    ) -> Result<Self, PaoiError> {
        traffic.validate().map_err(AnalyticError::from)?;
        check_unit("SpatialContext", "xi", xi)?;
        if let MomentSource::Moments(sm) = source {
            let sm_xi = sm.params().xi;
            if (sm_xi - xi).abs() > 1e-12 {
                return Err(PaoiError::Domain {
                    what: "SpatialContext",
                    detail: format!(
                        "xi = {xi} does not match the moment store's medium-access probability {sm_xi}"
                    ),
                });
            }
        }
        Ok(Self {
            traffic,
            xi,
            source,
            fallback: None,
        })
    }

    /// Arm a fitted law as the refuge for mixed-moment series that lose too
    /// many digits to cancellation (deep medium-access probabilities, slow
    /// damping). Only consulted on the [`SnmPath::Auto`] path; explicit path
    /// choices and the pure moment lookups are unaffected.
    pub fn with_fallback_law(mut self, law: &'a MuLaw) -> Self {
        self.fallback = Some(law);
        self
    }

    pub fn traffic(&self) -> &TrafficParams {
        self.traffic
    }

    pub fn xi(&self) -> f64 {
        self.xi
    }

    pub fn source(&self) -> MomentSource<'a> {
        self.source
    }

    /// Spatial success moment `M_b = E[mu^b]` from whichever source backs
    /// this context.
    pub fn moment(&self, b: i32) -> Result<f64, PaoiError> {
        match self.source {
            MomentSource::Moments(sm) => Ok(sm.get(b)?),
            MomentSource::Law(law) => Ok(law.moment(b)),
        }
    }
}

/// Evaluation strategy for [`s_nm`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SnmPath {
    /// Series for a moment source, quadrature for a law source.
    Auto,
    /// Power-series expansion in the success moments.
    Series,
    /// Numerical integration against the success law (law sources only).
    Quadrature,
}

// ---------------------------------------------------------------------------
// Mixed moments S(n; m) = E[mu^-m q^-n]
// ---------------------------------------------------------------------------

/// Mixed spatial moment `S(n; m) = E[mu^-m (lambda_a + xi mu (1-lambda_a))^-n]`.
///
/// The series path expands `q^-n` around saturation,
///
/// ```text
/// S(n; m) = sum_{k>=0} C(n+k-1, k) (1-lambda_a)^k
///           sum_{l=0}^{k} (-1)^l C(k, l) xi^l M_{l-m},
/// ```
///
/// truncating under the same two-consecutive-small-terms rule as
/// [`numerics::sum_series`]. The inner alternating sums cancel, so the
/// running absolute mass is tracked and the evaluation aborts with
/// [`PaoiError::SeriesUnstable`] once more than ten significant digits are
/// lost (which happens for small arrival probabilities and deep medium-access
/// probabilities); the quadrature path is immune but requires a
/// distribution-backed law. Under [`SnmPath::Auto`], a context that carries
/// both exact moments and a fitted law ([`SpatialContext::with_fallback_law`])
/// reroutes exactly the unstable mixed moments to that quadrature, with a
/// logged warning. `S(0; m)` is returned directly as `M_{-m}` from the source
/// on every path, preserving exact consistency between the expanded and
/// closed forms of the age moments.
pub fn s_nm(
    n: u32,
    m: u32,
    ctx: &SpatialContext,
    path: SnmPath,
    ctrl: &SeriesControl,
) -> Result<f64, PaoiError> {
    ctrl.validate()?;
    // The whole expectation diverges exactly when E[mu^-m] does; q <= 1 makes
    // S(n; m) >= M_{-m} >= 1.
    let base = ctx.moment(-(m as i32))?;
    if base.is_infinite() {
        return Ok(f64::INFINITY);
    }
    if n == 0 {
        return Ok(base);
    }
    match (path, ctx.source) {
        (SnmPath::Series, _) => s_nm_series(n, m, ctx, ctrl, base),
        (SnmPath::Auto, MomentSource::Moments(_)) => {
            match s_nm_series(n, m, ctx, ctrl, base) {
                Err(PaoiError::SeriesUnstable { digits_lost }) => match ctx.fallback {
                    Some(law) => {
                        log::warn!(
                            "mixed moment S({n}; {m}) series lost {digits_lost:.1} digits; \
                             integrating the fitted law instead"
                        );
                        s_nm_quadrature(n, m, ctx, law)
                    }
                    None => Err(PaoiError::SeriesUnstable { digits_lost }),
                },
                other => other,
            }
        }
        (SnmPath::Quadrature, MomentSource::Law(law))
        | (SnmPath::Auto, MomentSource::Law(law)) => s_nm_quadrature(n, m, ctx, law),
        (SnmPath::Quadrature, MomentSource::Moments(_)) => Err(PaoiError::LawRequired),
    }
}

fn s_nm_series(
    n: u32,
    m: u32,
    ctx: &SpatialContext,
    ctrl: &SeriesControl,
    base: f64,
) -> Result<f64, PaoiError> {
    let lambda_a = ctx.traffic.lambda_a;
    let damp = 1.0 - lambda_a;
    let xi = ctx.xi;
    // moments[j] = M_{j - m}; extended on demand as the inner sums deepen.
    let mut moments: Vec<f64> = vec![base];
    let mut sum = Kahan::default();
    let mut abs_mass = Kahan::default();
    let mut outer = 1.0; // C(n+k-1, k) (1-lambda_a)^k
    let mut small_streak = 0usize;
    let mut last = f64::NAN;
    for k in 0..ctrl.max_terms {
        while moments.len() <= k {
            let order = moments.len() as i32 - m as i32;
            // A success moment that overflowed f64, or whose own activity
            // series cancelled to noise, ends the expansion the same way as
            // cancellation here: only the quadrature path, which integrates
            // the law directly, can go deeper.
            let mo = match ctx.moment(order) {
                Ok(v) if !v.is_finite() => {
                    return Err(PaoiError::SeriesUnstable {
                        digits_lost: f64::INFINITY,
                    })
                }
                Ok(v) => v,
                Err(PaoiError::Analytic(AnalyticError::SeriesUnstable {
                    digits_lost, ..
                })) => return Err(PaoiError::SeriesUnstable { digits_lost }),
                Err(e) => return Err(e),
            };
            moments.push(mo);
        }
        // Inner alternating sum over l with incremental C(k, l) and xi^l.
        let mut inner = Kahan::default();
        let mut inner_abs = Kahan::default();
        let mut binom = 1.0;
        let mut xi_pow = 1.0;
        let mut sign = 1.0;
        for (l, &mo) in moments.iter().enumerate().take(k + 1) {
            let t = sign * binom * xi_pow * mo;
            inner.add(t);
            inner_abs.add(t.abs());
            binom *= (k - l) as f64 / (l + 1) as f64;
            xi_pow *= xi;
            sign = -sign;
        }
        let term = outer * inner.value();
        if !term.is_finite() {
            // The binomial weights outgrow f64 before the truncation rule
            // fires (very slow damping); same remedy as lost digits.
            return Err(PaoiError::SeriesUnstable {
                digits_lost: f64::INFINITY,
            });
        }
        sum.add(term);
        abs_mass.add(outer * inner_abs.value());
        last = term;
        // Cancellation monitor: every term is positive analytically, so the
        // partial sum is a valid scale (it never undershoots the k=0 term).
        let scale = sum.value().abs().max(base);
        if abs_mass.value() > 1e10 * scale {
            return Err(PaoiError::SeriesUnstable {
                digits_lost: (abs_mass.value() / scale).log10(),
            });
        }
        let threshold = ctrl.abs_tol.max(ctrl.rel_tol * sum.value().abs());
        if term.abs() <= threshold {
            small_streak += 1;
            if small_streak >= 2 {
                return Ok(sum.value());
            }
        } else {
            small_streak = 0;
        }
        outer *= (n as f64 + k as f64) / (k as f64 + 1.0) * damp;
    }
    Err(NumericsError::SeriesBudget {
        partial: sum.value(),
        last_term: last.abs(),
        terms: ctrl.max_terms,
    }
    .into())
}

fn s_nm_quadrature(
    n: u32,
    m: u32,
    ctx: &SpatialContext,
    law: &MuLaw,
) -> Result<f64, PaoiError> {
    let lambda_a = ctx.traffic.lambda_a;
    let xi = ctx.xi;
    match law {
        MuLaw::Point(p) => {
            // Degenerate law: evaluate the integrand at the atom.
            let q = lambda_a + xi * p * (1.0 - lambda_a);
            Ok(p.powi(-(m as i32)) * q.powi(-(n as i32)))
        }
        MuLaw::Beta(ba) => {
            if m > 0 && ba.kappa1 <= m as f64 {
                log::warn!(
                    "inverse moment order {m} at or beyond first beta shape {}; S({n}; {m}) diverges",
                    ba.kappa1
                );
                return Ok(f64::INFINITY);
            }
            let (k1, k2) = (ba.kappa1, ba.kappa2);
            let ln_b = numerics::ln_beta(k1, k2);
            // Target: int_0^1 u^{a-1} (1-u)^{k2-1} W(u) du / B(k1, k2) with
            // a = k1 - m > 0 and W(u) = (lambda_a + xi u (1-lambda_a))^{-n}.
            // Either endpoint weight can be integrably singular (a < 1 or
            // k2 < 1), which polynomial panels in u cannot resolve to full
            // precision, so each half is integrated under the power
            // substitution that flattens its own endpoint: v = u^a on
            // [0, 1/2] and w = (1-u)^{k2} on [1/2, 1] reduce the weight to
            // the constants 1/a and 1/k2.
            let a = k1 - m as f64;
            let w = move |u: f64| (lambda_a + xi * u * (1.0 - lambda_a)).powi(-(n as i32));
            let left = move |v: f64| {
                let u = v.powf(1.0 / a).min(0.5);
                ((k2 - 1.0) * (-u).ln_1p() - ln_b).exp() * w(u) / a
            };
            let right = move |t: f64| {
                let u = 1.0 - t.powf(1.0 / k2).min(0.5);
                ((a - 1.0) * u.ln() - ln_b).exp() * w(u) / k2
            };
            // The substituted variable covers many decades when the shape
            // exponent is large, so seed the panel scan on a geometric
            // ladder instead of leaving a single coarse panel.
            let ladder = |hi: f64| -> Vec<f64> {
                [1e-12, 1e-9, 1e-6, 1e-3, 1e-1, 0.5]
                    .into_iter()
                    .map(|f| f * hi)
                    .filter(|s| *s > 0.0 && *s < hi)
                    .collect::<Vec<_>>()
            };
            let tol = QuadOptions {
                rel_tol: 1e-11,
                abs_tol: 1e-15,
                ..QuadOptions::default()
            };
            let left_hi = 0.5f64.powf(a);
            let left_val =
                numerics::integrate(left, 0.0, left_hi, &tol.clone().with_seeds(&ladder(left_hi)))?
                    .value;
            let right_hi = 0.5f64.powf(k2);
            let right_val = numerics::integrate(
                right,
                0.0,
                right_hi,
                &tol.with_seeds(&ladder(right_hi)),
            )?
            .value;
            Ok(left_val + right_val)
        }
    }
}

// ---------------------------------------------------------------------------
// Spatial peak-age moments
// ---------------------------------------------------------------------------

/// Spatial moment `E[Abar^b]` of the conditional mean peak age, for either
/// discipline.
///
/// Non-preemptive queues expand `(Z_a + 2/(xi mu))^b` into inverse success
/// moments; preemptive queues expand `(Z_a + 1/(xi mu) + 1/q)^b` into the
/// mixed moments [`s_nm`]. Diverging inverse moments propagate as `+inf`
/// (every term is nonnegative). Orders `b >= 3` are supported but inherit the
/// approximation quality of the underlying moment source unbounded by any
/// tested tolerance; orders 1 and 2 are the validated surface.
pub fn moment_paoi(
    b: u32,
    discipline: Discipline,
    ctx: &SpatialContext,
    path: SnmPath,
    ctrl: &SeriesControl,
) -> Result<f64, PaoiError> {
    if b == 0 {
        return Ok(1.0);
    }
    let z = ctx.traffic.z_a();
    let xi = ctx.xi;
    let mut sum = Kahan::default();
    match discipline {
        Discipline::NonPreemptive => {
            for n in 0..=b {
                let coef = numerics::gen_binomial(b as f64, n)
                    * z.powi((b - n) as i32)
                    * (2.0 / xi).powi(n as i32);
                if coef == 0.0 {
                    continue; // skip before the moment can inject inf * 0
                }
                let mom = ctx.moment(-(n as i32))?;
                if mom.is_infinite() {
                    return Ok(f64::INFINITY);
                }
                sum.add(coef * mom);
            }
        }
        Discipline::Preemptive => {
            for l in 0..=b {
                for m in 0..=(b - l) {
                    let n = b - l - m;
                    let coef = numerics::gen_binomial(b as f64, l)
                        * numerics::gen_binomial((b - l) as f64, m)
                        * z.powi(l as i32)
                        * xi.powi(-(m as i32));
                    if coef == 0.0 {
                        continue;
                    }
                    let s = s_nm(n, m, ctx, path, ctrl)?;
                    if s.is_infinite() {
                        return Ok(f64::INFINITY);
                    }
                    sum.add(coef * s);
                }
            }
        }
    }
    Ok(sum.value())
}

/// Spatial variance of the conditional mean peak age, `E[Abar^2] - E[Abar]^2`.
pub fn variance_paoi(
    discipline: Discipline,
    ctx: &SpatialContext,
    path: SnmPath,
    ctrl: &SeriesControl,
) -> Result<f64, PaoiError> {
    let p1 = moment_paoi(1, discipline, ctx, path, ctrl)?;
    let p2 = moment_paoi(2, discipline, ctx, path, ctrl)?;
    if p1.is_infinite() || p2.is_infinite() {
        return Ok(f64::INFINITY);
    }
    Ok(p2 - p1 * p1)
}

// Closed first- and second-moment forms, written directly in the raw inputs
// so tests can pin the expansion code against them.

/// `Z_a + (2/xi) M_{-1}`.
pub fn closed_np_p1(z_a: f64, xi: f64, m_inv1: f64) -> f64 {
    z_a + 2.0 / xi * m_inv1
}

/// `Z_a^2 + (4 Z_a / xi) M_{-1} + (4 / xi^2) M_{-2}`.
pub fn closed_np_p2(z_a: f64, xi: f64, m_inv1: f64, m_inv2: f64) -> f64 {
    z_a * z_a + 4.0 * z_a / xi * m_inv1 + 4.0 / (xi * xi) * m_inv2
}

/// `(4 / xi^2) (M_{-2} - M_{-1}^2)`: the variance after the `Z_a` terms cancel.
pub fn closed_np_variance(xi: f64, m_inv1: f64, m_inv2: f64) -> f64 {
    4.0 / (xi * xi) * (m_inv2 - m_inv1 * m_inv1)
}

/// `Z_a + (1/xi) M_{-1} + S(1; 0)`.
pub fn closed_p_p1(z_a: f64, xi: f64, m_inv1: f64, s10: f64) -> f64 {
    z_a + m_inv1 / xi + s10
}

/// `Z_a^2 + (2 Z_a/xi) M_{-1} + M_{-2}/xi^2 + 2 Z_a S(1;0) + (2/xi) S(1;1) + S(2;0)`.
pub fn closed_p_p2(
    z_a: f64,
    xi: f64,
    m_inv1: f64,
    m_inv2: f64,
    s10: f64,
    s11: f64,
    s20: f64,
) -> f64 {
    z_a * z_a
        + 2.0 * z_a / xi * m_inv1
        + m_inv2 / (xi * xi)
        + 2.0 * z_a * s10
        + 2.0 / xi * s11
        + s20
}

// ---------------------------------------------------------------------------
// Spatial distribution of the conditional mean peak age
// ---------------------------------------------------------------------------

fn prob_at_least(law: &MuLaw, x: f64) -> f64 {
    match law {
        MuLaw::Beta(ba) => 1.0 - ba.cdf(x),
        MuLaw::Point(p) => {
            if *p >= x {
                1.0
            } else {
                0.0
            }
        }
    }
}

/// Fraction of links whose conditional mean peak age is at most `x`:
/// `P[Abar(mu) <= x]` under the spatial success law.
///
/// The conditional mean is strictly decreasing in `mu` for both disciplines,
/// so for the non-preemptive queue the threshold inverts in closed form
/// (`mu* = 2 / (xi (x - Z_a))`), while the preemptive threshold is found by
/// bisection on the bracket `[1e-12, 1]` to width `1e-10`. Values of `x`
/// below the best achievable mean give 0; the CDF tends to 1 as `x` grows.
pub fn cdf_mean_paoi(
    x: f64,
    discipline: Discipline,
    law: &MuLaw,
    xi: f64,
    traffic: &TrafficParams,
) -> Result<f64, PaoiError> {
    check_unit("cdf_mean_paoi", "xi", xi)?;
    traffic.validate().map_err(AnalyticError::from)?;
    if !x.is_finite() {
        return Err(PaoiError::Domain {
            what: "cdf_mean_paoi",
            detail: format!("x must be finite, got {x}"),
        });
    }
    let z = traffic.z_a();
    match discipline {
        Discipline::NonPreemptive => {
            if x <= z {
                return Ok(0.0);
            }
            let mu_star = 2.0 / (xi * (x - z));
            Ok(prob_at_least(law, mu_star))
        }
        Discipline::Preemptive => {
            let (lo, hi, tol) = (1e-12, 1.0, 1e-10);
            let f = |mu: f64| {
                z + 1.0 / (xi * mu) + 1.0 / service_prob_preemptive(mu, xi, traffic) - x
            };
            if f(hi) > 0.0 {
                // Even a perfect link has mean age above x.
                return Ok(0.0);
            }
            if f(lo) < 0.0 {
                // Every success probability above the bracket floor already
                // meets x; the remaining mass below 1e-12 is negligible for
                // any fitted law.
                return Ok(prob_at_least(law, lo));
            }
            let root = numerics::find_root_decreasing(f, lo, hi, tol)?;
            Ok(prob_at_least(law, root))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::BetaApprox;

    fn traffic(lambda_a: f64) -> TrafficParams {
        TrafficParams::new(lambda_a).unwrap()
    }

    #[test]
    fn conditional_means_exact_rationals() {
        // lambda_a = 0.3, xi = 0.5, mu = 1: Z_a = 7/3, so the non-preemptive
        // mean is 7/3 + 4 = 19/3 and the preemptive mean is
        // 7/3 + 2 + 1/0.65 = 229/39.
        let t = traffic(0.3);
        let np = mean_paoi_np(1.0, 0.5, &t).unwrap();
        assert!((np - 19.0 / 3.0).abs() < 1e-12, "{np}");
        let p = mean_paoi_p(1.0, 0.5, &t).unwrap();
        assert!((p - 229.0 / 39.0).abs() < 1e-12, "{p}");
        assert!(p < np);
    }

    #[test]
    fn saturation_limits() {
        // xi mu = 1: both disciplines collapse to Z_a + 2.
        let t = traffic(0.3);
        let np = mean_paoi_np(1.0, 1.0, &t).unwrap();
        let p = mean_paoi_p(1.0, 1.0, &t).unwrap();
        assert!((np - (t.z_a() + 2.0)).abs() < 1e-12);
        assert!((p - (t.z_a() + 2.0)).abs() < 1e-12);
        // lambda_a -> 1: Z_a -> 0 and q -> 1.
        let sat = traffic(1.0);
        let np = mean_paoi_np(0.8, 0.5, &sat).unwrap();
        assert!((np - 2.0 / 0.4).abs() < 1e-12);
        let p = mean_paoi_p(0.8, 0.5, &sat).unwrap();
        assert!((p - (1.0 / 0.4 + 1.0)).abs() < 1e-12);
    }

    #[test]
    fn service_pmfs_normalize_and_have_right_means() {
        let t = traffic(0.3);
        let (mu, xi) = (0.7, 0.5);
        let q = service_prob_preemptive(mu, xi, &t);
        assert!((q - (0.3 + 0.35 * 0.7)).abs() < 1e-15);
        let mut total = 0.0;
        let mut mean = 0.0;
        for n in 1..=2000u32 {
            let p = service_pmf_p(n, mu, xi, &t).unwrap();
            total += p;
            mean += n as f64 * p;
        }
        assert!((total - 1.0).abs() < 1e-10);
        assert!((mean - 1.0 / q).abs() < 1e-9);
        let p1 = service_pmf_np(1, mu, xi).unwrap();
        assert!((p1 - 0.35).abs() < 1e-15);
        assert!(service_pmf_np(0, mu, xi).is_err());
    }

    #[test]
    fn mgf_matches_mean_and_second_moment() {
        let t = traffic(0.3);
        let (mu, xi) = (0.7, 0.5);
        assert!((paoi_mgf_p(0.0, mu, xi, &t).unwrap() - 1.0).abs() < 1e-12);
        // Central differences at 0.
        let h = 1e-5;
        let mp = paoi_mgf_p(h, mu, xi, &t).unwrap();
        let mm = paoi_mgf_p(-h, mu, xi, &t).unwrap();
        let mean = (mp - mm) / (2.0 * h);
        let want = mean_paoi_p(mu, xi, &t).unwrap();
        assert!(
            ((mean - want) / want).abs() < 1e-8,
            "mgf mean {mean} vs formula {want}"
        );
        // Second derivative = E[A^2] = mean^2 plus the variances of the three
        // independent geometric components.
        let m2 = (mp - 2.0 + mm) / (h * h);
        let (s, q) = (xi * mu, service_prob_preemptive(mu, xi, &t));
        let var = (1.0 - q) / (q * q)
            + (1.0 - t.lambda_a) / (t.lambda_a * t.lambda_a)
            + (1.0 - s) / (s * s);
        let expect = want * want + var;
        assert!(
            ((m2 - expect) / expect).abs() < 1e-5,
            "mgf second moment {m2} vs closed {expect}"
        );
        // Beyond the pole the mgf is undefined.
        let pole = -(1.0f64 - 0.3).ln(); // smallest pole: the arrival factor
        assert!(paoi_mgf_p(pole + 1e-3, mu, xi, &t).is_err());
    }

    #[test]
    fn s_nm_series_and_quadrature_agree_on_beta_law() {
        let t = traffic(0.4);
        let law = MuLaw::Beta(BetaApprox { kappa1: 14.0, kappa2: 6.0 });
        let ctx = SpatialContext::new(&t, 0.5, MomentSource::Law(&law)).unwrap();
        let ctrl = SeriesControl::default();
        for n in 0..=2u32 {
            for m in 0..=2u32 {
                let a = s_nm(n, m, &ctx, SnmPath::Series, &ctrl).unwrap();
                let b = s_nm(n, m, &ctx, SnmPath::Quadrature, &ctrl).unwrap();
                assert!(
                    ((a - b) / b).abs() < 1e-8,
                    "S({n};{m}): series {a} vs quadrature {b}"
                );
            }
        }
    }

    #[test]
    fn s_nm_point_law_closed_value() {
        let t = traffic(0.3);
        let law = MuLaw::Point(0.7);
        let ctx = SpatialContext::new(&t, 0.5, MomentSource::Law(&law)).unwrap();
        let ctrl = SeriesControl::default();
        let q = service_prob_preemptive(0.7, 0.5, &t);
        let want = 0.7f64.powi(-2) * q.powi(-1);
        let got = s_nm(1, 2, &ctx, SnmPath::Quadrature, &ctrl).unwrap();
        assert!(((got - want) / want).abs() < 1e-12);
        let via_series = s_nm(1, 2, &ctx, SnmPath::Series, &ctrl).unwrap();
        assert!(((via_series - want) / want).abs() < 1e-9, "{via_series} vs {want}");
    }

    #[test]
    fn s_nm_diverges_with_heavy_beta() {
        // kappa1 = 2 means E[mu^-2] diverges.
        let t = traffic(0.5);
        let law = MuLaw::Beta(BetaApprox { kappa1: 2.0, kappa2: 2.0 });
        let ctx = SpatialContext::new(&t, 0.5, MomentSource::Law(&law)).unwrap();
        let s = s_nm(1, 2, &ctx, SnmPath::Auto, &SeriesControl::default()).unwrap();
        assert_eq!(s, f64::INFINITY);
    }

    #[test]
    fn s_nm_series_aborts_for_tiny_arrival_probability() {
        // lambda_a = 0.02 makes the expansion hopeless; the monitor must
        // refuse rather than return cancelled garbage.
        let t = traffic(0.02);
        let law = MuLaw::Beta(BetaApprox { kappa1: 14.0, kappa2: 6.0 });
        let ctx = SpatialContext::new(&t, 0.9, MomentSource::Law(&law)).unwrap();
        let err = s_nm(2, 2, &ctx, SnmPath::Series, &SeriesControl::default());
        match err {
            Err(PaoiError::SeriesUnstable { digits_lost }) => assert!(digits_lost > 10.0),
            other => panic!("expected instability, got {other:?}"),
        }
        // The same request through quadrature succeeds.
        let ok = s_nm(2, 2, &ctx, SnmPath::Quadrature, &SeriesControl::default()).unwrap();
        assert!(ok.is_finite() && ok > 1.0);
    }

    #[test]
    fn moment_expansion_matches_closed_forms() {
        let t = traffic(0.3);
        let law = MuLaw::Beta(BetaApprox { kappa1: 14.0, kappa2: 6.0 });
        let ctx = SpatialContext::new(&t, 0.5, MomentSource::Law(&law)).unwrap();
        let ctrl = SeriesControl::default();
        let z = t.z_a();
        let m1 = ctx.moment(-1).unwrap();
        let m2 = ctx.moment(-2).unwrap();

        let np1 = moment_paoi(1, Discipline::NonPreemptive, &ctx, SnmPath::Auto, &ctrl).unwrap();
        assert!((np1 - closed_np_p1(z, 0.5, m1)).abs() < 1e-10 * np1);
        let np2 = moment_paoi(2, Discipline::NonPreemptive, &ctx, SnmPath::Auto, &ctrl).unwrap();
        assert!((np2 - closed_np_p2(z, 0.5, m1, m2)).abs() < 1e-10 * np2);

        let s10 = s_nm(1, 0, &ctx, SnmPath::Auto, &ctrl).unwrap();
        let s11 = s_nm(1, 1, &ctx, SnmPath::Auto, &ctrl).unwrap();
        let s20 = s_nm(2, 0, &ctx, SnmPath::Auto, &ctrl).unwrap();
        let p1 = moment_paoi(1, Discipline::Preemptive, &ctx, SnmPath::Auto, &ctrl).unwrap();
        assert!((p1 - closed_p_p1(z, 0.5, m1, s10)).abs() < 1e-10 * p1);
        let p2 = moment_paoi(2, Discipline::Preemptive, &ctx, SnmPath::Auto, &ctrl).unwrap();
        assert!((p2 - closed_p_p2(z, 0.5, m1, m2, s10, s11, s20)).abs() < 1e-10 * p2);

        // Variance identity and ordering.
        let var_np = variance_paoi(Discipline::NonPreemptive, &ctx, SnmPath::Auto, &ctrl).unwrap();
        assert!((var_np - closed_np_variance(0.5, m1, m2)).abs() < 1e-10 * var_np.max(1.0));
        assert!(var_np >= 0.0);
        assert!(p1 < np1, "preemption should reduce the spatial mean");
    }

    #[test]
    fn closed_helpers_worked_example() {
        // Z = 1, xi = 0.5, M_{-1} = 2, M_{-2} = 5:
        // P1 = 1 + 8 = 9; P2 = 1 + 16 + 80 = 97; Var = 16 (= 97 - 81).
        assert_eq!(closed_np_p1(1.0, 0.5, 2.0), 9.0);
        assert_eq!(closed_np_p2(1.0, 0.5, 2.0, 5.0), 97.0);
        assert_eq!(closed_np_variance(0.5, 2.0, 5.0), 16.0);
    }

    #[test]
    fn infinite_inverse_moment_propagates_as_infinity() {
        let t = traffic(0.3);
        let law = MuLaw::Beta(BetaApprox { kappa1: 2.0, kappa2: 2.0 });
        let ctx = SpatialContext::new(&t, 0.5, MomentSource::Law(&law)).unwrap();
        let ctrl = SeriesControl::default();
        let p2 = moment_paoi(2, Discipline::NonPreemptive, &ctx, SnmPath::Auto, &ctrl).unwrap();
        assert_eq!(p2, f64::INFINITY);
        // First moment only needs M_{-1} = 3 and stays finite.
        let p1 = moment_paoi(1, Discipline::NonPreemptive, &ctx, SnmPath::Auto, &ctrl).unwrap();
        assert!((p1 - closed_np_p1(t.z_a(), 0.5, 3.0)).abs() < 1e-12);
        let v = variance_paoi(Discipline::NonPreemptive, &ctx, SnmPath::Auto, &ctrl).unwrap();
        assert_eq!(v, f64::INFINITY);
    }

    #[test]
    fn saturated_arrivals_drop_the_idle_term() {
        // lambda_a = 1: Z_a = 0, so the n = b term alone survives in the
        // non-preemptive expansion and q = 1 collapses the mixed moments.
        let t = traffic(1.0);
        let law = MuLaw::Beta(BetaApprox { kappa1: 14.0, kappa2: 6.0 });
        let ctx = SpatialContext::new(&t, 0.5, MomentSource::Law(&law)).unwrap();
        let ctrl = SeriesControl::default();
        let m1 = law.moment(-1);
        let np1 = moment_paoi(1, Discipline::NonPreemptive, &ctx, SnmPath::Auto, &ctrl).unwrap();
        assert!((np1 - 4.0 * m1).abs() < 1e-12);
        let p1 = moment_paoi(1, Discipline::Preemptive, &ctx, SnmPath::Auto, &ctrl).unwrap();
        assert!((p1 - (2.0 * m1 + 1.0)).abs() < 1e-10, "{p1}");
    }

    #[test]
    fn cdf_mean_paoi_shapes() {
        let t = traffic(0.3);
        let law = MuLaw::Beta(BetaApprox { kappa1: 14.0, kappa2: 6.0 });
        let xi = 0.5;
        for disc in [Discipline::NonPreemptive, Discipline::Preemptive] {
            // Below the best achievable mean the CDF is zero.
            let best = match disc {
                Discipline::NonPreemptive => mean_paoi_np(1.0, xi, &t).unwrap(),
                Discipline::Preemptive => mean_paoi_p(1.0, xi, &t).unwrap(),
            };
            assert_eq!(cdf_mean_paoi(best - 0.1, disc, &law, xi, &t).unwrap(), 0.0);
            // Monotone nondecreasing, tending to 1.
            let mut prev: f64 = 0.0;
            for i in 0..=60 {
                let x = best + i as f64 * 0.5;
                let f = cdf_mean_paoi(x, disc, &law, xi, &t).unwrap();
                assert!((0.0..=1.0).contains(&f));
                assert!(f >= prev - 1e-12, "{disc}: CDF dipped at x={x}");
                prev = f;
            }
            assert!(prev > 0.99, "{disc}: CDF only reached {prev}");
        }
    }

    #[test]
    fn cdf_round_trips_through_the_conditional_mean() {
        // For a continuous law, F(Abar(mu)) = P[mu' >= mu] = 1 - CDF(mu).
        let t = traffic(0.3);
        let ba = BetaApprox { kappa1: 14.0, kappa2: 6.0 };
        let law = MuLaw::Beta(ba);
        let xi = 0.5;
        for mu in [0.3, 0.5, 0.8, 0.95] {
            let x = mean_paoi_p(mu, xi, &t).unwrap();
            let f = cdf_mean_paoi(x, Discipline::Preemptive, &law, xi, &t).unwrap();
            let want = 1.0 - ba.cdf(mu);
            assert!(
                (f - want).abs() < 1e-6,
                "mu={mu}: CDF {f} vs complementary {want}"
            );
        }
    }

    #[test]
    fn point_law_cdf_is_a_step_including_the_atom() {
        let t = traffic(0.3);
        let law = MuLaw::Point(0.7);
        let xi = 0.5;
        let at = mean_paoi_np(0.7, xi, &t).unwrap();
        assert_eq!(
            cdf_mean_paoi(at + 1e-9, Discipline::NonPreemptive, &law, xi, &t).unwrap(),
            1.0
        );
        assert_eq!(
            cdf_mean_paoi(at - 1e-9, Discipline::NonPreemptive, &law, xi, &t).unwrap(),
            0.0
        );
    }
}
