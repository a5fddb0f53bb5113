//! κ-sweeps: T̂(κ) from one source, a least-squares fit in the predicted
//! law's coordinates, and a verdict.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conditions::{Bound, ConditionPolicy, Conditions, GammaConfig};
use crate::error::{Error, Result};
use crate::predictor::{predict, Regime, ScalingLaw};
use crate::problem::ProblemSpec;
use crate::volterra::{estimate_blowup_time, StepPolicy};

/// Fits need at least this many points.
pub const MIN_POINTS: usize = 4;
pub const MIN_R_SQUARED: f64 = 0.98;
/// Relative deviation allowed for a finite-limit law.
pub const FINITE_LIMIT_TOL: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Volterra,
    UpperBound,
    LowerBound,
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Source::Volterra => "volterra",
            Source::UpperBound => "upper_bound",
            Source::LowerBound => "lower_bound",
        })
    }
}

impl FromStr for Source {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().replace('-', "_").as_str() {
            "volterra" => Ok(Source::Volterra),
            "upper_bound" | "upper" => Ok(Source::UpperBound),
            "lower_bound" | "lower" => Ok(Source::LowerBound),
            other => Err(Error::invalid(
                "method",
                format!("expected volterra, upper_bound or lower_bound, got `{other}`"),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Match,
    Mismatch,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub kappa: f64,
    #[serde(rename = "T_hat")]
    pub t_hat: f64,
    pub source: Source,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedPoint {
    pub kappa: f64,
    pub reason: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fit {
    /// Slope in the law's coordinates; for a finite limit, T̂ at the smallest κ.
    #[serde(with = "crate::float_serde")]
    pub exponent: f64,
    #[serde(with = "crate::float_serde")]
    pub stderr: f64,
    #[serde(with = "crate::float_serde")]
    pub r_squared: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub points: Vec<SweepPoint>,
    pub dropped: Vec<DroppedPoint>,
    #[serde(with = "crate::float_serde")]
    pub fitted_exponent: f64,
    #[serde(with = "crate::float_serde")]
    pub fit_stderr: f64,
    #[serde(with = "crate::float_serde")]
    pub r_squared: f64,
    pub predicted: ScalingLaw,
    pub verdict: Verdict,
    #[serde(with = "crate::float_serde")]
    pub tolerance: f64,
}

impl SweepResult {
    /// `kappa,T_hat,source`
    pub fn to_csv(&self) -> String {
        let mut out = String::from("kappa,T_hat,source\n");
        for p in &self.points {
            out.push_str(&format!("{:e},{:e},{}\n", p.kappa, p.t_hat, p.source));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub step: StepPolicy,
    pub gammas: GammaConfig,
    pub conditions: ConditionPolicy,
    /// Overrides max(0.1 |predicted|, 0.05).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            step: StepPolicy::default(),
            gammas: GammaConfig::default(),
            conditions: ConditionPolicy::default(),
            tolerance: None,
        }
    }
}

/// n geometric points from `lo` to `hi` inclusive.
pub fn geometric(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let ratio = (hi / lo).ln() / (n - 1) as f64;
    (0..n)
        .map(|i| if i == n - 1 { hi } else { lo * (ratio * i as f64).exp() })
        .collect()
}

fn check_kappas(kappas: &[f64]) -> Result<()> {
    if kappas.len() < MIN_POINTS {
        return Err(Error::invalid(
            "kappas",
            format!("need at least {MIN_POINTS} values, got {}", kappas.len()),
        ));
    }
    if kappas.iter().any(|&k| !(k > 0.0 && k.is_finite())) {
        return Err(Error::invalid("kappas", "values must be positive and finite"));
    }
    let ratios: Vec<f64> = kappas.windows(2).map(|w| (w[1] / w[0]).ln()).collect();
    let first = ratios[0];
    if first == 0.0 || ratios.iter().any(|r| (r - first).abs() > 1e-6 * first.abs()) {
        return Err(Error::invalid("kappas", "values must form a geometric sequence"));
    }
    Ok(())
}

fn linear_fit(xs: &[f64], ys: &[f64]) -> Fit {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - my - slope * (x - mx)).powi(2))
        .sum();
    let r_squared = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    let stderr = if xs.len() > 2 {
        (ss_res / (n - 2.0) / sxx).sqrt()
    } else {
        f64::NAN
    };
    Fit {
        exponent: slope,
        stderr,
        r_squared,
    }
}

/// Least squares in the law's natural coordinates. Log-lifespan laws
/// report r itself, so a small-κ fit returns minus the fitted slope.
pub fn fit_law(points: &[(f64, f64)], law: &ScalingLaw) -> Result<Fit> {
    if points.len() < MIN_POINTS {
        return Err(Error::invalid(
            "points",
            format!("need at least {MIN_POINTS} points, got {}", points.len()),
        ));
    }
    if points.iter().any(|&(k, t)| !(k > 0.0 && k.is_finite() && t > 0.0 && t.is_finite())) {
        return Err(Error::invalid("points", "kappa and T_hat must be positive and finite"));
    }
    let need = |ok: bool, what: &str| -> Result<()> {
        if ok {
            Ok(())
        } else {
            Err(Error::invalid("points", format!("{law} coordinates need {what}")))
        }
    };
    let ln_k: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ln_t: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    match *law {
        ScalingLaw::PowerLaw { .. } => Ok(linear_fit(&ln_k, &ln_t)),
        ScalingLaw::PowerLogLaw { log_power, .. } => {
            need(ln_k.iter().all(|&l| l > 0.0), "kappa > 1")?;
            let q = log_power.value();
            let xs: Vec<f64> = ln_k.iter().map(|&l| l - q * l.ln()).collect();
            Ok(linear_fit(&xs, &ln_t))
        }
        ScalingLaw::LogLifespanLarge { .. } => {
            need(ln_t.iter().all(|&l| l != 0.0), "T_hat != 1")?;
            let ys: Vec<f64> = ln_t.iter().map(|l| l.abs().ln()).collect();
            Ok(linear_fit(&ln_k, &ys))
        }
        ScalingLaw::LogLifespanSmall { .. } => {
            need(ln_t.iter().all(|&l| l > 0.0), "T_hat > 1")?;
            let ys: Vec<f64> = ln_t.iter().map(|l| l.ln()).collect();
            let fit = linear_fit(&ln_k, &ys);
            Ok(Fit {
                exponent: -fit.exponent,
                ..fit
            })
        }
        ScalingLaw::PowerOverLogSmall { .. } => {
            need(ln_k.iter().all(|&l| l < 0.0), "kappa < 1")?;
            let xs: Vec<f64> = ln_k.iter().map(|&l| -l - (-l).ln()).collect();
            Ok(linear_fit(&xs, &ln_t))
        }
        ScalingLaw::FiniteLimit { .. } => {
            let (_, t) = points
                .iter()
                .copied()
                .min_by(|a, b| a.0.total_cmp(&b.0))
                .expect("nonempty");
            Ok(Fit {
                exponent: t,
                stderr: f64::NAN,
                r_squared: f64::NAN,
            })
        }
        ScalingLaw::NoLocalSolutionAllKappa | ScalingLaw::NoLocalSolutionLargeKappa | ScalingLaw::GlobalForSmallKappa => {
            Err(Error::Inapplicable(format!("{law} has no finite life span to fit")))
        }
    }
}

/// Default match band: max(0.1 |predicted|, 0.05).
pub fn default_tolerance(law: &ScalingLaw) -> f64 {
    match law {
        ScalingLaw::FiniteLimit { .. } => FINITE_LIMIT_TOL,
        _ => law.exponent().map_or(f64::NAN, |e| (0.1 * e.abs()).max(0.05)),
    }
}

fn judge(fit: &Fit, law: &ScalingLaw, tol: f64) -> Verdict {
    match *law {
        ScalingLaw::FiniteLimit { value } => {
            if ((fit.exponent - value) / value).abs() <= tol {
                Verdict::Match
            } else {
                Verdict::Mismatch
            }
        }
        _ => match law.exponent() {
            Some(e) if (fit.exponent - e).abs() <= tol && fit.r_squared >= MIN_R_SQUARED => Verdict::Match,
            Some(_) => Verdict::Mismatch,
            None => Verdict::Inconclusive,
        },
    }
}

/// Per-κ life-span estimates for one source.
struct Estimator {
    source: Source,
    step: StepPolicy,
    conditions: Option<Conditions>,
}

impl Estimator {
    fn new(template: &ProblemSpec, source: Source, config: &SweepConfig) -> Result<Self> {
        let conditions = match source {
            Source::Volterra => {
                if template.n != 1 {
                    return Err(Error::invalid("N", "the volterra source needs N = 1"));
                }
                None
            }
            _ => Some(Conditions::new(*template, config.gammas, config.conditions)?),
        };
        Ok(Estimator {
            source,
            step: config.step,
            conditions,
        })
    }

    fn estimate(&self, template: &ProblemSpec, kappa: f64) -> Result<std::result::Result<f64, String>> {
        let problem = template.with_kappa(kappa);
        problem.validate()?;
        let bound = match (self.source, &self.conditions) {
            (Source::Volterra, _) => {
                let est = match estimate_blowup_time(&problem, &self.step) {
                    Ok(est) => est,
                    Err(e) if e.is_numerical() => return Ok(Err(e.to_string())),
                    Err(e) => return Err(e),
                };
                return Ok(est
                    .t_est
                    .ok_or_else(|| format!("no blow-up before the horizon {:e}", self.step.horizon)));
            }
            (Source::UpperBound, Some(c)) => c.with_kappa(kappa)?.upper_bound_lifespan(),
            (Source::LowerBound, Some(c)) => c.with_kappa(kappa)?.lower_bound_lifespan(),
            _ => unreachable!("conditions are built for bound sources"),
        };
        match bound {
            Ok(Bound::Value { t }) => Ok(Ok(t)),
            Ok(Bound::Zero) => Ok(Err("condition fails at every T on the grid".into())),
            Ok(Bound::UnboundedOnGrid) => Ok(Err("condition holds up to the top of the T-grid".into())),
            Err(e) if e.is_numerical() => Ok(Err(e.to_string())),
            Err(e) => Err(e),
        }
    }
}

/// T̂(κ) for every κ (in parallel), then the fit and the verdict.
pub fn run_sweep(
    template: &ProblemSpec,
    kappas: &[f64],
    source: Source,
    regime: Regime,
    config: &SweepConfig,
) -> Result<SweepResult> {
    template.validate()?;
    check_kappas(kappas)?;
    let predicted = predict(template.n, template.p, &template.profile, regime)?;
    let estimator = Estimator::new(template, source, config)?;
    let mut sorted = kappas.to_vec();
    sorted.sort_by(f64::total_cmp);
    let outcomes: Vec<std::result::Result<f64, String>> = sorted
        .par_iter()
        .map(|&k| estimator.estimate(template, k))
        .collect::<Result<_>>()?;
    let mut points = Vec::new();
    let mut dropped = Vec::new();
    for (&kappa, outcome) in sorted.iter().zip(outcomes) {
        match outcome {
            Ok(t_hat) => points.push(SweepPoint { kappa, t_hat, source }),
            Err(reason) => dropped.push(DroppedPoint { kappa, reason }),
        }
    }
    let tolerance = config.tolerance.unwrap_or_else(|| default_tolerance(&predicted));
    let pairs: Vec<(f64, f64)> = points.iter().map(|p| (p.kappa, p.t_hat)).collect();
    let (fit, verdict) = if pairs.len() < MIN_POINTS {
        (None, Verdict::Inconclusive)
    } else {
        match fit_law(&pairs, &predicted) {
            Ok(fit) => (Some(fit), judge(&fit, &predicted, tolerance)),
            Err(e) if e.is_regime_error() || matches!(e, Error::Invalid { .. }) => (None, Verdict::Inconclusive),
            Err(e) => return Err(e),
        }
    };
    let fit = fit.unwrap_or(Fit {
        exponent: f64::NAN,
        stderr: f64::NAN,
        r_squared: f64::NAN,
    });
    Ok(SweepResult {
        points,
        dropped,
        fitted_exponent: fit.exponent,
        fit_stderr: fit.stderr,
        r_squared: fit.r_squared,
        predicted,
        verdict,
        tolerance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::param::Param;
    use crate::profiles::InitialProfile;

    fn law(s: &str) -> ScalingLaw {
        s.parse().unwrap()
    }

    #[test]
    fn exact_power_points() {
        let pts: Vec<(f64, f64)> = geometric(1.0, 100.0, 6).into_iter().map(|k| (k, k.powi(-4))).collect();
        let fit = fit_law(&pts, &law("power:e=-4")).unwrap();
        assert!((fit.exponent + 4.0).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
        assert!(fit.stderr < 1e-10);
    }

    #[test]
    fn exact_power_log_points() {
        let pts: Vec<(f64, f64)> = geometric(10.0, 1e4, 8)
            .into_iter()
            .map(|k| (k, (k * k.ln().powi(-2)).powf(-0.5)))
            .collect();
        let fit = fit_law(&pts, &law("power-log:e=-1/2,q=2")).unwrap();
        assert!((fit.exponent + 0.5).abs() < 1e-6);
    }

    #[test]
    fn exact_log_lifespan_points() {
        let pts: Vec<(f64, f64)> = geometric(10.0, 1e4, 6)
            .into_iter()
            .map(|k| (k, (-k.powf(1.0 / 3.0)).exp()))
            .collect();
        let fit = fit_law(&pts, &law("loglife-large:r=1/3")).unwrap();
        assert!((fit.exponent - 1.0 / 3.0).abs() < 1e-6);
        let pts: Vec<(f64, f64)> = geometric(1e-4, 1e-1, 6)
            .into_iter()
            .map(|k| (k, k.powf(-0.5).exp()))
            .collect();
        let fit = fit_law(&pts, &law("loglife-small:r=1/2")).unwrap();
        assert!((fit.exponent - 0.5).abs() < 1e-6);
    }

    #[test]
    fn exact_power_over_log_points() {
        let pts: Vec<(f64, f64)> = geometric(1e-6, 1e-2, 5)
            .into_iter()
            .map(|k| (k, (1.0 / k / (1.0 / k).ln()).powi(2)))
            .collect();
        let fit = fit_law(&pts, &law("power-over-log:e=2")).unwrap();
        assert!((fit.exponent - 2.0).abs() < 1e-9);
    }

    #[test]
    fn finite_limit_uses_smallest_kappa() {
        let pts = vec![(1e-1, 0.9), (1e-2, 0.99), (1e-3, 0.999), (1e-4, 0.9999)];
        let l = law("finite-limit:T=1");
        let fit = fit_law(&pts, &l).unwrap();
        assert_eq!(fit.exponent, 0.9999);
        assert_eq!(judge(&fit, &l, FINITE_LIMIT_TOL), Verdict::Match);
    }

    #[test]
    fn fit_preconditions() {
        let pts = vec![(1.0, 1.0), (2.0, 0.5), (4.0, 0.25)];
        assert!(fit_law(&pts, &law("power:e=-1")).is_err());
        let pts = vec![(1.0, 1.0), (2.0, f64::INFINITY), (4.0, 0.25), (8.0, 0.1)];
        assert!(fit_law(&pts, &law("power:e=-1")).is_err());
        let pts = vec![(1.0, 1.0), (2.0, 0.5), (4.0, 0.25), (8.0, 0.1)];
        assert!(fit_law(&pts, &law("global:small-kappa")).unwrap_err().is_regime_error());
    }

    #[test]
    fn verdict_rules() {
        let l = law("power:e=-4/3");
        let good = Fit { exponent: -1.3, stderr: 0.01, r_squared: 0.99 };
        assert_eq!(judge(&good, &l, default_tolerance(&l)), Verdict::Match);
        let noisy = Fit { r_squared: 0.9, ..good };
        assert_eq!(judge(&noisy, &l, default_tolerance(&l)), Verdict::Mismatch);
        let off = Fit { exponent: -1.0, ..good };
        assert_eq!(judge(&off, &l, default_tolerance(&l)), Verdict::Mismatch);
        assert_eq!(default_tolerance(&law("power:e=-1/4")), 0.05);
    }

    #[test]
    fn kappas_must_be_geometric() {
        assert!(check_kappas(&[1.0, 2.0, 4.0]).is_err());
        assert!(check_kappas(&[1.0, 2.0, 3.0, 4.0]).is_err());
        assert!(check_kappas(&[1.0, 2.0, 4.0, 8.0]).is_ok());
        assert!(check_kappas(&geometric(1e-4, 1e-1, 8)).is_ok());
    }

    #[test]
    fn constant_data_volterra_sweep() {
        let template = ProblemSpec::new(1, Param::integer(3), 1.0, InitialProfile::Constant { c: 1.0 }).unwrap();
        let res = run_sweep(
            &template,
            &[1.0, 2.0, 4.0, 8.0, 16.0],
            Source::Volterra,
            Regime::LargeKappa,
            &SweepConfig::default(),
        )
        .unwrap();
        assert_eq!(res.points.len(), 5);
        assert!((res.fitted_exponent + 4.0).abs() < 0.12, "{}", res.fitted_exponent);
        assert_eq!(res.verdict, Verdict::Match);
        assert!(res.to_csv().starts_with("kappa,T_hat,source\n1e0,"));
    }

    #[test]
    fn sources_agree_on_constant_data() {
        let template = ProblemSpec::new(1, Param::ratio(3, 2), 1.0, InitialProfile::Constant { c: 1.0 }).unwrap();
        let kappas = geometric(1.0, 100.0, 4);
        for source in [Source::Volterra, Source::UpperBound, Source::LowerBound] {
            let res = run_sweep(&template, &kappas, source, Regime::LargeKappa, &SweepConfig::default()).unwrap();
            assert_eq!(res.verdict, Verdict::Match, "{source}: {}", res.fitted_exponent);
            assert!((res.fitted_exponent + 1.0).abs() < 0.02, "{source}: {}", res.fitted_exponent);
        }
    }

    #[test]
    fn failing_points_are_dropped() {
        // A > 1/(p-1): no T passes the necessary condition.
        let template = ProblemSpec::new(
            1,
            Param::integer(3),
            1.0,
            InitialProfile::SingularLog {
                a: Param::ratio(4, 5),
                b: Param::integer(0),
            },
        )
        .unwrap();
        let res = run_sweep(
            &template,
            &geometric(10.0, 1e3, 4),
            Source::UpperBound,
            Regime::LargeKappa,
            &SweepConfig::default(),
        )
        .unwrap();
        assert!(res.points.is_empty());
        assert_eq!(res.dropped.len(), 4);
        assert_eq!(res.verdict, Verdict::Inconclusive);
        assert!(res.fitted_exponent.is_nan());
    }

    #[test]
    fn sweep_is_deterministic_and_round_trips() {
        let template = ProblemSpec::new(1, Param::integer(2), 1.0, InitialProfile::Constant { c: 1.0 }).unwrap();
        let kappas = geometric(1.0, 8.0, 4);
        let cfg = SweepConfig::default();
        let a = run_sweep(&template, &kappas, Source::UpperBound, Regime::LargeKappa, &cfg).unwrap();
        let b = run_sweep(&template, &kappas, Source::UpperBound, Regime::LargeKappa, &cfg).unwrap();
        assert_eq!(a, b);
        let json = serde_json::to_string(&a).unwrap();
        assert_eq!(serde_json::from_str::<SweepResult>(&json).unwrap(), a);
    }

    #[test]
    fn volterra_needs_one_dimension() {
        let template = ProblemSpec::new(2, Param::integer(3), 1.0, InitialProfile::Constant { c: 1.0 }).unwrap();
        let err = run_sweep(
            &template,
            &geometric(1.0, 100.0, 4),
            Source::Volterra,
            Regime::LargeKappa,
            &SweepConfig::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Invalid { .. }));
    }
}
