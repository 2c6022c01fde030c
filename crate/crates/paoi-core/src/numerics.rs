//! Numerical kernels shared by the analytic modules.
//!
//! Provides generalized binomial coefficients, log-gamma, the regularized
//! incomplete beta function, globally adaptive Gauss–Legendre quadrature,
//! series summation with explicit truncation control, and bracketed
//! bisection root finding. Everything works in plain `f64`; all routines are
//! pure functions and safe to call concurrently.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;
use std::sync::OnceLock;

use thiserror::Error;

/// Errors surfaced by the numerical kernels.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum NumericsError {
    /// An argument fell outside the documented domain of an operation.
    #[error("domain error in {what}: {detail}")]
    Domain { what: &'static str, detail: String },
    /// Adaptive quadrature exhausted its panel budget. `estimate` is the best
    /// value reached, `error` the accompanying error bound.
    #[error("quadrature did not converge within {panels} panels (estimate {estimate:e}, error bound {error:e})")]
    QuadratureBudget {
        estimate: f64,
        error: f64,
        panels: usize,
    },
    /// Series summation hit `max_terms` before the truncation rule fired.
    #[error("series truncation rule not met after {terms} terms (partial sum {partial:e}, last term {last_term:e})")]
    SeriesBudget {
        partial: f64,
        last_term: f64,
        terms: usize,
    },
    /// The continued fraction for the incomplete beta did not converge.
    #[error("incomplete-beta continued fraction did not converge (x={x}, a={a}, b={b})")]
    BetaCfBudget { x: f64, a: f64, b: f64 },
    /// No sign change over the root bracket.
    #[error("no sign change on bracket: f(lo)={f_lo:e}, f(hi)={f_hi:e}")]
    NoRoot { f_lo: f64, f_hi: f64 },
}

/// Truncation control for infinite series.
///
/// A series is truncated once `|term| < max(abs_tol, rel_tol * |partial|)`
/// holds for two consecutive terms; the two-term rule guards against the
/// sign-alternating sums in the moment expansions, where a single term can
/// pass through zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesControl {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_terms: usize,
}

impl Default for SeriesControl {
    fn default() -> Self {
        // The outer service-moment series decays geometrically with ratio
        // (1 - lambda_a); small arrival rates need the generous term budget.
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-14,
            max_terms: 10_000,
        }
    }
}

impl SeriesControl {
    pub fn validate(&self) -> Result<(), NumericsError> {
        if !(self.rel_tol > 0.0) || !(self.abs_tol > 0.0) || self.max_terms == 0 {
            return Err(NumericsError::Domain {
                what: "SeriesControl",
                detail: format!(
                    "rel_tol={}, abs_tol={}, max_terms={} (all must be positive)",
                    self.rel_tol, self.abs_tol, self.max_terms
                ),
            });
        }
        Ok(())
    }
}

/// Kahan compensated accumulator. Keeps long sums accurate to O(eps)
/// independent of length, which the alternating series here rely on.
#[derive(Debug, Clone, Copy, Default)]
pub struct Kahan {
    sum: f64,
    carry: f64,
}

impl Kahan {
    pub fn add(&mut self, x: f64) {
        let y = x - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum
    }
}

// ---------------------------------------------------------------------------
// Gamma-family special functions
// ---------------------------------------------------------------------------

// Lanczos approximation, g = 7, 9 coefficients. Relative accuracy is a few
// ulps over the positive axis, comfortably inside the 1e-12 cross-check the
// parameter layer applies against the reflection identity.
const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural log of the gamma function for `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // Reflection: Gamma(x) Gamma(1-x) = pi / sin(pi x); valid on (0, 0.5).
        PI.ln() - (PI * x).sin().ln() - ln_gamma(1.0 - x)
    } else {
        let z = x - 1.0;
        let mut sum = LANCZOS_COEF[0];
        for (i, c) in LANCZOS_COEF.iter().enumerate().skip(1) {
            sum += c / (z + i as f64);
        }
        let base = z + LANCZOS_G + 0.5;
        0.5 * (2.0 * PI).ln() + (z + 0.5) * base.ln() - base + sum.ln()
    }
}

/// Gamma function for `x > 0`.
pub fn gamma(x: f64) -> f64 {
    ln_gamma(x).exp()
}

/// Natural log of the complete beta function `B(a, b)` for `a, b > 0`.
pub fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

// ---------------------------------------------------------------------------
// Generalized binomial coefficient
// ---------------------------------------------------------------------------

/// Generalized binomial coefficient `(x choose k)` with real upper argument:
/// the product of `(x - i + 1) / i` over `i = 1..=k`, and 1 for `k = 0`.
///
/// Total function: integer `x >= 0` with `k > x` hits a zero factor and
/// returns 0, matching the combinatorial convention.
pub fn gen_binomial(x: f64, k: u32) -> f64 {
    let mut prod = 1.0;
    for i in 1..=k {
        prod *= (x - i as f64 + 1.0) / i as f64;
    }
    prod
}

// ---------------------------------------------------------------------------
// Regularized incomplete beta
// ---------------------------------------------------------------------------

const BETA_CF_MAX_ITER: usize = 400;
const BETA_CF_EPS: f64 = 1e-15;
const BETA_CF_FPMIN: f64 = 1e-300;

/// Regularized incomplete beta function `I_x(a, b)`.
///
/// Evaluated with the Lentz continued fraction, switching to the symmetric
/// complement when `x` exceeds `(a + 1) / (a + b + 2)` so the fraction always
/// converges quickly. Accuracy is close to machine precision for moderate
/// shape parameters.
pub fn reg_inc_beta(x: f64, a: f64, b: f64) -> Result<f64, NumericsError> {
    if !(a > 0.0) || !(b > 0.0) || !a.is_finite() || !b.is_finite() {
        return Err(NumericsError::Domain {
            what: "reg_inc_beta",
            detail: format!("shape parameters must be positive finite, got a={a}, b={b}"),
        });
    }
    if !(0.0..=1.0).contains(&x) {
        return Err(NumericsError::Domain {
            what: "reg_inc_beta",
            detail: format!("x must lie in [0,1], got {x}"),
        });
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x == 1.0 {
        return Ok(1.0);
    }
    // Shared log prefactor x^a (1-x)^b / B(a,b); ln_1p keeps accuracy as x->0.
    let ln_front = a * x.ln() + b * (-x).ln_1p() - ln_beta(a, b);
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        Ok(front * beta_cf(x, a, b)? / a)
    } else {
        Ok(1.0 - front * beta_cf(1.0 - x, b, a)? / b)
    }
}

/// Modified Lentz evaluation of the incomplete-beta continued fraction.
fn beta_cf(x: f64, a: f64, b: f64) -> Result<f64, NumericsError> {
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < BETA_CF_FPMIN {
        d = BETA_CF_FPMIN;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=BETA_CF_MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        // Even step.
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < BETA_CF_FPMIN {
            d = BETA_CF_FPMIN;
        }
        c = 1.0 + aa / c;
        if c.abs() < BETA_CF_FPMIN {
            c = BETA_CF_FPMIN;
        }
        d = 1.0 / d;
        h *= d * c;
        // Odd step.
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < BETA_CF_FPMIN {
            d = BETA_CF_FPMIN;
        }
        c = 1.0 + aa / c;
        if c.abs() < BETA_CF_FPMIN {
            c = BETA_CF_FPMIN;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < BETA_CF_EPS {
            return Ok(h);
        }
    }
    Err(NumericsError::BetaCfBudget { x, a, b })
}

// ---------------------------------------------------------------------------
// Adaptive quadrature
// ---------------------------------------------------------------------------

const GL_HI: usize = 20;
const GL_LO: usize = 10;

/// Options for [`integrate`]. `seeds` lists interior abscissae at which the
/// initial interval is pre-split — used by callers that know where a sharp
/// feature (e.g. a concentrated density) lives, so the first error scan
/// cannot overlook it.
#[derive(Debug, Clone)]
pub struct QuadOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_panels: usize,
    pub seeds: Vec<f64>,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-14,
            max_panels: 4000,
            seeds: Vec::new(),
        }
    }
}

impl QuadOptions {
    pub fn with_tol(rel_tol: f64) -> Self {
        Self {
            rel_tol,
            ..Self::default()
        }
    }

    pub fn with_seeds(mut self, seeds: &[f64]) -> Self {
        self.seeds = seeds.to_vec();
        self
    }
}

/// Result of an adaptive integration: the estimate, an error bound, and the
/// number of panels used.
#[derive(Debug, Clone, Copy)]
pub struct Quadrature {
    pub value: f64,
    pub error: f64,
    pub panels: usize,
}

fn legendre_nodes(n: usize) -> (Vec<f64>, Vec<f64>) {
    // Roots of the Legendre polynomial P_n by Newton iteration from the
    // Chebyshev initial guess; weights 2 / ((1 - z^2) P_n'(z)^2).
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = 1.0;
            let mut p2 = 0.0;
            for j in 1..=n {
                let p3 = p2;
                p2 = p1;
                p1 = ((2.0 * j as f64 - 1.0) * z * p2 - (j as f64 - 1.0) * p3) / j as f64;
            }
            pp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        let w = 2.0 / ((1.0 - z * z) * pp * pp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn gl_rules() -> &'static ((Vec<f64>, Vec<f64>), (Vec<f64>, Vec<f64>)) {
    static RULES: OnceLock<((Vec<f64>, Vec<f64>), (Vec<f64>, Vec<f64>))> = OnceLock::new();
    RULES.get_or_init(|| (legendre_nodes(GL_HI), legendre_nodes(GL_LO)))
}

fn gl_apply(f: &dyn Fn(f64) -> f64, lo: f64, hi: f64, rule: &(Vec<f64>, Vec<f64>)) -> f64 {
    let half = 0.5 * (hi - lo);
    let mid = 0.5 * (hi + lo);
    let mut acc = Kahan::default();
    for (z, w) in rule.0.iter().zip(rule.1.iter()) {
        acc.add(w * f(mid + half * z));
    }
    half * acc.value()
}

struct Panel {
    err: f64,
    lo: f64,
    hi: f64,
    val: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err)
    }
}

fn eval_panel(f: &dyn Fn(f64) -> f64, lo: f64, hi: f64) -> Result<Panel, NumericsError> {
    let (hi_rule, lo_rule) = gl_rules();
    let val = gl_apply(f, lo, hi, hi_rule);
    let coarse = gl_apply(f, lo, hi, lo_rule);
    if !val.is_finite() || !coarse.is_finite() {
        return Err(NumericsError::Domain {
            what: "integrate",
            detail: format!("integrand not finite on a quadrature node in [{lo}, {hi}]"),
        });
    }
    Ok(Panel {
        err: (val - coarse).abs(),
        lo,
        hi,
        val,
    })
}

/// Globally adaptive Gauss–Legendre quadrature of `f` over `(lo, hi)`.
///
/// The interval is cut at `opts.seeds`, every panel is scored by the
/// difference between a 20- and a 10-point rule, and the worst panel is
/// bisected until the summed error bound meets the tolerance. Nodes are
/// strictly interior, so integrable endpoint singularities are handled by
/// panels shrinking geometrically toward the endpoint.
pub fn integrate(
    f: impl Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    opts: &QuadOptions,
) -> Result<Quadrature, NumericsError> {
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(NumericsError::Domain {
            what: "integrate",
            detail: format!("need finite lo < hi, got [{lo}, {hi}]"),
        });
    }
    let f_ref: &dyn Fn(f64) -> f64 = &f;
    let mut cuts: Vec<f64> = Vec::with_capacity(opts.seeds.len() + 2);
    cuts.push(lo);
    let mut seeds: Vec<f64> = opts
        .seeds
        .iter()
        .copied()
        .filter(|s| *s > lo && *s < hi)
        .collect();
    seeds.sort_by(f64::total_cmp);
    seeds.dedup();
    cuts.extend(seeds);
    cuts.push(hi);

    let mut heap = BinaryHeap::new();
    for pair in cuts.windows(2) {
        heap.push(eval_panel(f_ref, pair[0], pair[1])?);
    }

    loop {
        let mut total = Kahan::default();
        let mut total_err = Kahan::default();
        for p in heap.iter() {
            total.add(p.val);
            total_err.add(p.err);
        }
        let value = total.value();
        let error = total_err.value();
        let target = opts.abs_tol.max(opts.rel_tol * value.abs());
        if error <= target {
            return Ok(Quadrature {
                value,
                error,
                panels: heap.len(),
            });
        }
        if heap.len() >= opts.max_panels {
            return Err(NumericsError::QuadratureBudget {
                estimate: value,
                error,
                panels: heap.len(),
            });
        }
        let worst = heap.pop().expect("heap cannot be empty");
        let mid = 0.5 * (worst.lo + worst.hi);
        if !(worst.lo < mid && mid < worst.hi) {
            // Panel narrower than f64 spacing: keep its value, stop refining it.
            heap.push(Panel {
                err: 0.0,
                ..worst
            });
            continue;
        }
        heap.push(eval_panel(f_ref, worst.lo, mid)?);
        heap.push(eval_panel(f_ref, mid, worst.hi)?);
    }
}

// ---------------------------------------------------------------------------
// Series summation
// ---------------------------------------------------------------------------

/// Outcome of [`sum_series`]: the truncated sum and how many terms were taken.
#[derive(Debug, Clone, Copy)]
pub struct SeriesSum {
    pub value: f64,
    pub terms: usize,
}

/// Sums `term(0) + term(1) + ...`, truncating once the magnitude of two
/// consecutive terms falls below `max(abs_tol, rel_tol * |partial sum|)`.
///
/// `term` is called with strictly increasing indices starting from 0, so
/// stateful closures that build coefficients incrementally are safe.
pub fn sum_series(
    mut term: impl FnMut(usize) -> f64,
    ctrl: &SeriesControl,
) -> Result<SeriesSum, NumericsError> {
    ctrl.validate()?;
    let mut acc = Kahan::default();
    let mut small_streak = 0usize;
    let mut last = f64::NAN;
    for k in 0..ctrl.max_terms {
        let t = term(k);
        acc.add(t);
        last = t;
        let threshold = ctrl.abs_tol.max(ctrl.rel_tol * acc.value().abs());
        if t.abs() <= threshold {
            small_streak += 1;
            if small_streak >= 2 {
                return Ok(SeriesSum {
                    value: acc.value(),
                    terms: k + 1,
                });
            }
        } else {
            small_streak = 0;
        }
    }
    Err(NumericsError::SeriesBudget {
        partial: acc.value(),
        last_term: last.abs(),
        terms: ctrl.max_terms,
    })
}

// ---------------------------------------------------------------------------
// Root finding
// ---------------------------------------------------------------------------

/// Bisection root of a strictly decreasing function with `f(lo) >= 0 >= f(hi)`.
///
/// Returns the bracket midpoint once the bracket width is at most `tol`.
/// A bracket with no sign change yields [`NumericsError::NoRoot`], which
/// callers map to a saturated CDF value (0 or 1).
pub fn find_root_decreasing(
    f: impl Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    tol: f64,
) -> Result<f64, NumericsError> {
    if !(lo < hi) || !(tol > 0.0) {
        return Err(NumericsError::Domain {
            what: "find_root_decreasing",
            detail: format!("need lo < hi and tol > 0, got lo={lo}, hi={hi}, tol={tol}"),
        });
    }
    let f_lo = f(lo);
    let f_hi = f(hi);
    if !(f_lo >= 0.0 && f_hi <= 0.0) {
        return Err(NumericsError::NoRoot { f_lo, f_hi });
    }
    let (mut a, mut b) = (lo, hi);
    // 200 halvings take any finite bracket below any representable tolerance.
    for _ in 0..200 {
        if b - a <= tol {
            break;
        }
        let m = 0.5 * (a + b);
        if f(m) >= 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binomial_matches_integer_grid() {
        // (n choose k) for integers n >= k via factorials.
        fn fact(n: u64) -> f64 {
            (1..=n).map(|i| i as f64).product()
        }
        for n in 0..=20u32 {
            for k in 0..=20u32 {
                let expect = if k <= n {
                    fact(n as u64) / (fact(k as u64) * fact((n - k) as u64))
                } else {
                    0.0
                };
                let got = gen_binomial(n as f64, k);
                assert!(
                    (got - expect).abs() <= 1e-9 * expect.abs().max(1.0),
                    "({n} choose {k}) = {got}, want {expect}"
                );
            }
        }
    }

    #[test]
    fn binomial_real_arguments() {
        assert_eq!(gen_binomial(-0.5, 0), 1.0);
        assert!((gen_binomial(-0.5, 2) - 0.375).abs() < 1e-15);
        assert!((gen_binomial(-1.0, 3) + 1.0).abs() < 1e-15);
        assert!((gen_binomial(-2.0, 3) + 4.0).abs() < 1e-15);
        assert!((gen_binomial(0.5, 3) - 0.0625).abs() < 1e-15);
    }

    #[test]
    fn ln_gamma_known_values() {
        assert!((gamma(0.5) - PI.sqrt()).abs() < 1e-13);
        assert!((gamma(1.0) - 1.0).abs() < 1e-13);
        assert!((gamma(1.5) - 0.5 * PI.sqrt()).abs() < 1e-13);
        assert!((gamma(5.0) - 24.0).abs() < 1e-11);
        // Reflection product at delta = 0.5: Gamma(1.5) Gamma(0.5) = pi/2.
        let prod = gamma(1.5) * gamma(0.5);
        assert!((prod - PI / 2.0).abs() < 1e-12);
    }

    #[test]
    fn inc_beta_boundaries_and_known_values() {
        assert_eq!(reg_inc_beta(0.0, 2.0, 3.0).unwrap(), 0.0);
        assert_eq!(reg_inc_beta(1.0, 2.0, 3.0).unwrap(), 1.0);
        assert!((reg_inc_beta(0.5, 1.0, 1.0).unwrap() - 0.5).abs() < 1e-14);
        // I_x(1, b) = 1 - (1-x)^b and I_x(a, 1) = x^a.
        assert!((reg_inc_beta(0.2, 1.0, 3.0).unwrap() - (1.0 - 0.8f64.powi(3))).abs() < 1e-14);
        assert!((reg_inc_beta(0.5, 2.0, 1.0).unwrap() - 0.25).abs() < 1e-14);
        // Symmetric Beta(2,2) median; arcsine law at x = 1/4 gives 1/3.
        assert!((reg_inc_beta(0.5, 2.0, 2.0).unwrap() - 0.5).abs() < 1e-14);
        let arcsine = reg_inc_beta(0.25, 0.5, 0.5).unwrap();
        assert!((arcsine - 1.0 / 3.0).abs() < 1e-13, "got {arcsine}");
    }

    #[test]
    fn inc_beta_rejects_bad_domain() {
        assert!(reg_inc_beta(-0.1, 1.0, 1.0).is_err());
        assert!(reg_inc_beta(1.1, 1.0, 1.0).is_err());
        assert!(reg_inc_beta(0.5, 0.0, 1.0).is_err());
        assert!(reg_inc_beta(0.5, 1.0, -2.0).is_err());
        assert!(reg_inc_beta(f64::NAN, 1.0, 1.0).is_err());
    }

    #[test]
    fn quadrature_polynomials_and_trig() {
        let opts = QuadOptions::default();
        let one = integrate(|_| 1.0, 0.0, 1.0, &opts).unwrap();
        assert!((one.value - 1.0).abs() < 1e-12);
        let lin = integrate(|t| t, 0.0, 1.0, &opts).unwrap();
        assert!((lin.value - 0.5).abs() < 1e-12);
        let cubic = integrate(|t| t * t * t, 0.0, 1.0, &opts).unwrap();
        assert!((cubic.value - 0.25).abs() < 1e-12);
        let sine = integrate(f64::sin, 0.0, PI, &opts).unwrap();
        assert!((sine.value - 2.0).abs() < 1e-10);
    }

    #[test]
    fn quadrature_near_singular_upper_endpoint() {
        // Closed form: integral of (1-t)^(-1/2) over [0, 0.99] is 2(1 - 0.1).
        let q = integrate(|t| (1.0 - t).powf(-0.5), 0.0, 0.99, &QuadOptions::default()).unwrap();
        assert!((q.value - 1.8).abs() < 1e-9, "got {}", q.value);
    }

    #[test]
    fn quadrature_integrable_endpoint_singularity() {
        // t^(-1/2) integrates to 2 over [0,1] despite blowing up at 0.
        let q = integrate(
            |t| t.powf(-0.5),
            0.0,
            1.0,
            &QuadOptions {
                rel_tol: 1e-9,
                ..QuadOptions::default()
            },
        )
        .unwrap();
        assert!((q.value - 2.0).abs() < 1e-7, "got {}", q.value);
    }

    #[test]
    fn quadrature_honors_seed_splits() {
        // A spike of width 1e-4 at 0.5 is invisible to a single coarse panel;
        // the seeded split pins it.
        let spike = |t: f64| {
            let d = (t - 0.5) / 1e-4;
            (-0.5 * d * d).exp()
        };
        let exact = 1e-4 * (2.0 * PI).sqrt(); // Gaussian mass, tails negligible
        let opts = QuadOptions::default().with_seeds(&[0.499, 0.5, 0.501]);
        let q = integrate(spike, 0.0, 1.0, &opts).unwrap();
        assert!(
            ((q.value - exact) / exact).abs() < 1e-8,
            "got {} want {exact}",
            q.value
        );
    }

    #[test]
    fn series_geometric_and_zero() {
        let ctrl = SeriesControl::default();
        let geo = sum_series(|k| 0.5f64.powi(k as i32), &ctrl).unwrap();
        assert!((geo.value - 2.0).abs() < 1e-10);
        let zero = sum_series(|_| 0.0, &ctrl).unwrap();
        assert_eq!(zero.value, 0.0);
    }

    #[test]
    fn series_budget_error_carries_partial() {
        let ctrl = SeriesControl {
            max_terms: 50,
            ..SeriesControl::default()
        };
        let err = sum_series(|_| 1.0, &ctrl).unwrap_err();
        match err {
            NumericsError::SeriesBudget { partial, terms, .. } => {
                assert_eq!(terms, 50);
                assert!((partial - 50.0).abs() < 1e-9);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn root_bisection_examples() {
        let r = find_root_decreasing(|x| 1.0 - 2.0 * x, 0.0, 1.0, 1e-12).unwrap();
        assert!((r - 0.5).abs() < 1e-11);
        let r = find_root_decreasing(|x| 0.25 - x * x, 0.0, 1.0, 1e-12).unwrap();
        assert!((r - 0.5).abs() < 1e-11);
        let r = find_root_decreasing(f64::cos, 0.0, 3.0, 1e-12).unwrap();
        assert!((r - PI / 2.0).abs() < 1e-11);
    }

    #[test]
    fn root_requires_sign_change() {
        let err = find_root_decreasing(|x| x + 1.0, 0.0, 1.0, 1e-9).unwrap_err();
        assert!(matches!(err, NumericsError::NoRoot { .. }));
    }

    #[test]
    fn legendre_weights_sum_to_two() {
        let (rule_hi, rule_lo) = gl_rules();
        let s: f64 = rule_hi.1.iter().sum();
        assert!((s - 2.0).abs() < 1e-13);
        let s: f64 = rule_lo.1.iter().sum();
        assert!((s - 2.0).abs() < 1e-13);
    }
}
