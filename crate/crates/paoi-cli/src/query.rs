//! Analytic point queries: one quantity per invocation, printed together
//! with the resolved parameters and the intermediate fit values so results
//! can be traced by eye.

use anyhow::Result;
use clap::{Args, ValueEnum};
use paoi_core::analytic::{
    activity_cdf_dominant, meta_distribution, two_step, MuLaw, SuccessMoments, TwoStep,
};
use paoi_core::model::{Discipline, NetworkParams, TrafficParams};
use paoi_core::numerics::SeriesControl;
use paoi_core::paoi::{
    cdf_mean_paoi, moment_paoi, s_nm, MomentSource, PaoiError, SnmPath, SpatialContext,
};

use crate::spec::{defaults, SirThreshold};

/// Model parameters shared by every query, with the baseline defaults.
#[derive(Debug, Args)]
pub struct ParamArgs {
    /// Density of source-destination pairs per unit area.
    #[arg(long, default_value_t = defaults::LAMBDA_SD)]
    pub lambda_sd: f64,
    /// Source-destination link distance.
    #[arg(long, default_value_t = defaults::R_DIST)]
    pub r_dist: f64,
    /// Path-loss exponent (must exceed 2).
    #[arg(long, default_value_t = defaults::ALPHA)]
    pub alpha: f64,
    /// SIR threshold: a plain number is linear, a "3 dB" string is decibel.
    #[arg(long, default_value = "3 dB")]
    pub beta: SirThreshold,
    /// Medium-access probability.
    #[arg(long, default_value_t = defaults::XI)]
    pub xi: f64,
    /// Per-slot packet arrival probability.
    #[arg(long, default_value_t = defaults::LAMBDA_A)]
    pub lambda_a: f64,
}

/// Which stage of the dominant-system bound a query reads from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LawChoice {
    /// Saturated interferers: the looser, simpler bound.
    Step1,
    /// Activity-modulated interferers: the tighter bound (default).
    Step2,
}

/// Accepts both the short and the spelled-out discipline names.
pub fn parse_discipline(s: &str) -> Result<Discipline, String> {
    match s.to_ascii_lowercase().as_str() {
        "np" | "non-preemptive" => Ok(Discipline::NonPreemptive),
        "p" | "preemptive" => Ok(Discipline::Preemptive),
        other => Err(format!(
            "unknown discipline {other:?}; use np, p, non-preemptive, or preemptive"
        )),
    }
}

#[derive(Debug, Args)]
pub struct MomentQuery {
    #[command(flatten)]
    pub params: ParamArgs,
    /// Queue discipline (np or p).
    #[arg(long, value_parser = parse_discipline)]
    pub discipline: Discipline,
    /// Moment order of the spatial mean-peak-age distribution.
    #[arg(long, default_value_t = 1)]
    pub b: u32,
    #[arg(long, value_enum, default_value_t = LawChoice::Step2)]
    pub law: LawChoice,
}

#[derive(Debug, Args)]
pub struct CdfQuery {
    #[command(flatten)]
    pub params: ParamArgs,
    #[arg(long, value_parser = parse_discipline)]
    pub discipline: Discipline,
    /// Age value at which to evaluate the spatial CDF.
    #[arg(long)]
    pub x: f64,
    #[arg(long, value_enum, default_value_t = LawChoice::Step2)]
    pub law: LawChoice,
}

#[derive(Debug, Args)]
pub struct MetaQuery {
    #[command(flatten)]
    pub params: ParamArgs,
    /// Reliability threshold: fraction of links whose conditional success
    /// probability exceeds this value.
    #[arg(long)]
    pub x: f64,
    #[arg(long, value_enum, default_value_t = LawChoice::Step2)]
    pub law: LawChoice,
}

#[derive(Debug, Args)]
pub struct ActivityQuery {
    #[command(flatten)]
    pub params: ParamArgs,
    /// Raw moment order of the dominant-system interferer activity.
    #[arg(long)]
    pub m: Option<u32>,
    /// Evaluate the activity CDF at this point of (0, xi].
    #[arg(long)]
    pub t: Option<f64>,
}

/// The fully resolved analytic state every query starts from.
struct Resolved {
    params: NetworkParams,
    traffic: TrafficParams,
    ts: TwoStep,
}

fn resolve(p: &ParamArgs) -> Result<Resolved> {
    let params = NetworkParams::new(p.lambda_sd, p.r_dist, p.alpha, p.beta.0, p.xi)?;
    let traffic = TrafficParams::new(p.lambda_a)?;
    let ts = two_step(&params, &traffic, &SeriesControl::default())?;
    Ok(Resolved {
        params,
        traffic,
        ts,
    })
}

fn law_line(label: &str, moments: &SuccessMoments, law: &MuLaw) -> Result<String> {
    let m1 = moments.get(1)?;
    let m2 = moments.get(2)?;
    let fit = match law {
        MuLaw::Beta(ba) => format!("kappa1 = {}  kappa2 = {}", ba.kappa1, ba.kappa2),
        MuLaw::Point(p) => format!("point mass at mu = {p}"),
    };
    Ok(format!("{label}: M1 = {m1}  M2 = {m2}  {fit}"))
}

/// Print the parameter echo and both bound stages; every query leads with
/// this block.
fn print_preamble(r: &Resolved) -> Result<()> {
    let p = &r.params;
    println!(
        "parameters: lambda-sd = {}  r-dist = {}  alpha = {}  beta = {} ({:.4} dB)  xi = {}  lambda-a = {}",
        p.lambda_sd,
        p.r_dist,
        p.alpha,
        p.beta_thr,
        10.0 * p.beta_thr.log10(),
        p.xi,
        r.traffic.lambda_a
    );
    println!("{}", law_line("step-one success law", &r.ts.step1_moments, &r.ts.step1_law)?);
    println!("dominant activity: p-bar-1 = {}", r.ts.activity.moment(1)?);
    println!("{}", law_line("step-two success law", &r.ts.step2_moments, &r.ts.step2_law)?);
    Ok(())
}

fn pick_law<'a>(ts: &'a TwoStep, choice: LawChoice) -> (&'a SuccessMoments, &'a MuLaw) {
    match choice {
        LawChoice::Step1 => (&ts.step1_moments, &ts.step1_law),
        LawChoice::Step2 => (&ts.step2_moments, &ts.step2_law),
    }
}

/// Evaluate one spatial moment, preferring the exact-moment series and
/// rerouting mixed moments that cancel badly to the fitted-law quadrature.
/// Returns the value and the path that produced it: "series" when the
/// expansion alone sufficed, a combined tag when any term needed the law.
fn moment_with_fallback(
    moments: &SuccessMoments,
    law: &MuLaw,
    traffic: &TrafficParams,
    xi: f64,
    discipline: Discipline,
    b: u32,
    ctrl: &SeriesControl,
) -> Result<(f64, &'static str)> {
    let exact = SpatialContext::new(traffic, xi, MomentSource::Moments(moments))?;
    match moment_paoi(b, discipline, &exact, SnmPath::Auto, ctrl) {
        Ok(v) => Ok((v, "series")),
        Err(PaoiError::SeriesUnstable { .. }) => {
            let hybrid = exact.with_fallback_law(law);
            Ok((
                moment_paoi(b, discipline, &hybrid, SnmPath::Auto, ctrl)?,
                "series + fitted-law quadrature for the unstable mixed moments",
            ))
        }
        Err(e) => Err(e.into()),
    }
}

impl MomentQuery {
    pub fn run(&self) -> Result<()> {
        let r = resolve(&self.params)?;
        print_preamble(&r)?;
        let ctrl = SeriesControl::default();
        let (moments, law) = pick_law(&r.ts, self.law);
        let xi = r.params.xi;
        let (value, path) =
            moment_with_fallback(moments, law, &r.traffic, xi, self.discipline, self.b, &ctrl)?;
        // The first moment decomposes into named pieces; show them.
        if self.b == 1 {
            let z = r.traffic.z_a();
            let ctx = SpatialContext::new(&r.traffic, xi, MomentSource::Moments(moments))?;
            let m_inv1 = ctx.moment(-1)?;
            match self.discipline {
                Discipline::NonPreemptive => {
                    println!("decomposition: Z_a = {z}  M_-1 = {m_inv1}  (Z_a + (2/xi) M_-1)");
                }
                Discipline::Preemptive => {
                    let s10 = s_nm(1, 0, &ctx.with_fallback_law(law), SnmPath::Auto, &ctrl)?;
                    println!(
                        "decomposition: Z_a = {z}  M_-1 = {m_inv1}  S(1;0) = {s10}  \
                         (Z_a + (1/xi) M_-1 + S(1;0))"
                    );
                }
            }
        }
        println!("path: {path}");
        println!("result = {value}");
        Ok(())
    }
}

impl CdfQuery {
    pub fn run(&self) -> Result<()> {
        let r = resolve(&self.params)?;
        print_preamble(&r)?;
        let (_, law) = pick_law(&r.ts, self.law);
        let value = cdf_mean_paoi(self.x, self.discipline, law, r.params.xi, &r.traffic)?;
        println!("cdf at x = {}", self.x);
        println!("result = {value}");
        Ok(())
    }
}

impl MetaQuery {
    pub fn run(&self) -> Result<()> {
        let r = resolve(&self.params)?;
        print_preamble(&r)?;
        let (_, law) = pick_law(&r.ts, self.law);
        let value = meta_distribution(self.x, law);
        println!("fraction of links with success probability above {}", self.x);
        println!("result = {value}");
        Ok(())
    }
}

impl ActivityQuery {
    pub fn run(&self) -> Result<()> {
        let r = resolve(&self.params)?;
        print_preamble(&r)?;
        let mut result = None;
        // Default to the first moment when nothing specific was asked for.
        let m = self.m.or(if self.t.is_none() { Some(1) } else { None });
        if let Some(m) = m {
            let v = r.ts.activity.moment(m)?;
            println!("activity-moment({m}) = {v}");
            result = Some(v);
        }
        if let Some(t) = self.t {
            let v = activity_cdf_dominant(t, &r.params, &r.traffic, &r.ts.step1_law)?;
            println!("activity-cdf({t}) = {v}");
            result = Some(v);
        }
        println!("result = {}", result.expect("at least one quantity evaluated"));
        Ok(())
    }
}
