//! Closed-form life-span asymptotics as κ → ∞ (singular data) and κ → 0
//! (slowly decaying or Gaussian data).

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::param::Param;
use crate::profiles::InitialProfile;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    LargeKappa,
    SmallKappa,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::LargeKappa => "large-kappa",
            Regime::SmallKappa => "small-kappa",
        })
    }
}

impl FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "large-kappa" | "large" => Ok(Regime::LargeKappa),
            "small-kappa" | "small" => Ok(Regime::SmallKappa),
            other => Err(Error::invalid("regime", format!("expected large-kappa or small-kappa, got `{other}`"))),
        }
    }
}

/// Asymptotic shape of T(κψ), up to two-sided constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "kebab-case")]
pub enum ScalingLaw {
    /// T ≍ κ^e
    PowerLaw { exponent: Param },
    /// T ≍ [κ (log κ)^{-q}]^e
    PowerLogLaw { exponent: Param, log_power: Param },
    /// |log T| ≍ κ^r as κ → ∞
    LogLifespanLarge { r: Param },
    /// log T ≍ κ^{-r} as κ → 0
    LogLifespanSmall { r: Param },
    /// T ≍ (κ^{-1} / log κ^{-1})^e
    PowerOverLogSmall { exponent: Param },
    FiniteLimit { value: f64 },
    NoLocalSolutionAllKappa,
    NoLocalSolutionLargeKappa,
    GlobalForSmallKappa,
}

impl ScalingLaw {
    /// The slope a sweep should recover in the law's own coordinates.
    pub fn exponent(&self) -> Option<f64> {
        exponent_of(self)
    }
}

pub fn exponent_of(law: &ScalingLaw) -> Option<f64> {
    match law {
        ScalingLaw::PowerLaw { exponent }
        | ScalingLaw::PowerLogLaw { exponent, .. }
        | ScalingLaw::PowerOverLogSmall { exponent } => Some(exponent.value()),
        ScalingLaw::LogLifespanLarge { r } | ScalingLaw::LogLifespanSmall { r } => Some(r.value()),
        _ => None,
    }
}

impl fmt::Display for ScalingLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScalingLaw::PowerLaw { exponent } => write!(f, "power:e={exponent}"),
            ScalingLaw::PowerLogLaw { exponent, log_power } => write!(f, "power-log:e={exponent},q={log_power}"),
            ScalingLaw::LogLifespanLarge { r } => write!(f, "loglife-large:r={r}"),
            ScalingLaw::LogLifespanSmall { r } => write!(f, "loglife-small:r={r}"),
            ScalingLaw::PowerOverLogSmall { exponent } => write!(f, "power-over-log:e={exponent}"),
            ScalingLaw::FiniteLimit { value } => write!(f, "finite-limit:T={value}"),
            ScalingLaw::NoLocalSolutionAllKappa => f.write_str("no-local:all"),
            ScalingLaw::NoLocalSolutionLargeKappa => f.write_str("no-local:large-kappa"),
            ScalingLaw::GlobalForSmallKappa => f.write_str("global:small-kappa"),
        }
    }
}

fn law_field(fields: &str, key: &str) -> Result<Param> {
    fields
        .split(',')
        .filter_map(|kv| kv.split_once('='))
        .find(|(k, _)| k.trim() == key)
        .ok_or_else(|| Error::invalid("law", format!("missing `{key}=` in `{fields}`")))?
        .1
        .parse()
}

impl FromStr for ScalingLaw {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (head, rest) = s.split_once(':').unwrap_or((s, ""));
        Ok(match (head, rest) {
            ("power", f) => ScalingLaw::PowerLaw { exponent: law_field(f, "e")? },
            ("power-log", f) => ScalingLaw::PowerLogLaw {
                exponent: law_field(f, "e")?,
                log_power: law_field(f, "q")?,
            },
            ("loglife-large", f) => ScalingLaw::LogLifespanLarge { r: law_field(f, "r")? },
            ("loglife-small", f) => ScalingLaw::LogLifespanSmall { r: law_field(f, "r")? },
            ("power-over-log", f) => ScalingLaw::PowerOverLogSmall { exponent: law_field(f, "e")? },
            ("finite-limit", f) => ScalingLaw::FiniteLimit { value: law_field(f, "T")?.value() },
            ("no-local", "all") => ScalingLaw::NoLocalSolutionAllKappa,
            ("no-local", "large-kappa") => ScalingLaw::NoLocalSolutionLargeKappa,
            ("global", "small-kappa") => ScalingLaw::GlobalForSmallKappa,
            _ => return Err(Error::invalid("law", format!("unrecognised law `{s}`"))),
        })
    }
}

fn one() -> Param {
    Param::integer(1)
}

/// -2(p-1) / (1 - A(p-1))
fn singular_exponent(p: &Param, a: &Param) -> Param {
    let pm1 = p.sub(&one());
    Param::integer(2).mul(&pm1).div(&one().sub(&a.mul(&pm1))).neg()
}

/// 1/(2(p-1)) - m/2
fn decay_gap(p: &Param, m: &Param) -> Param {
    let half = Param::ratio(1, 2);
    half.mul(&p.sub(&one()).recip()).sub(&half.mul(m))
}

fn power_log(p: &Param, a: &Param, q: Param) -> ScalingLaw {
    let exponent = singular_exponent(p, a);
    if q.eq_to(&Param::integer(0)) {
        ScalingLaw::PowerLaw { exponent }
    } else {
        ScalingLaw::PowerLogLaw { exponent, log_power: q }
    }
}

fn large_kappa(n: usize, p: &Param, a: Param, b: Param) -> ScalingLaw {
    let nn = Param::integer(n as i64);
    let threshold = Param::singular_threshold(p);
    let zero = Param::integer(0);
    match p.compare(&Param::critical_exponent(n)) {
        Ordering::Less => {
            // Admissibility already forces B > 1 when A = N.
            if a.lt(&nn) {
                power_log(p, &a, b)
            } else {
                power_log(p, &a, b.sub(&one()))
            }
        }
        Ordering::Greater => match a.compare(&threshold) {
            Ordering::Less => power_log(p, &a, b),
            Ordering::Equal => match b.compare(&zero) {
                Ordering::Greater => ScalingLaw::LogLifespanLarge { r: b.recip() },
                Ordering::Equal => ScalingLaw::NoLocalSolutionLargeKappa,
                Ordering::Less => ScalingLaw::NoLocalSolutionAllKappa,
            },
            Ordering::Greater => ScalingLaw::NoLocalSolutionAllKappa,
        },
        Ordering::Equal => {
            if a.lt(&nn) {
                // Subcritical singularity: local existence holds for every B.
                power_log(p, &a, b)
            } else {
                let excess = b.sub(&nn).sub(&one());
                match excess.compare(&zero) {
                    Ordering::Greater => ScalingLaw::LogLifespanLarge { r: excess.recip() },
                    Ordering::Equal => ScalingLaw::NoLocalSolutionLargeKappa,
                    Ordering::Less => ScalingLaw::NoLocalSolutionAllKappa,
                }
            }
        }
    }
}

fn small_kappa(n: usize, p: &Param, a: Param) -> ScalingLaw {
    let nn = Param::integer(n as i64);
    let threshold = Param::singular_threshold(p);
    let criticality = p.compare(&Param::critical_exponent(n));
    if a.eq_to(&nn) {
        return match criticality {
            Ordering::Less => ScalingLaw::PowerOverLogSmall {
                exponent: decay_gap(p, &nn).recip(),
            },
            Ordering::Equal => ScalingLaw::LogLifespanSmall {
                r: p.sub(&one()).div(p),
            },
            Ordering::Greater => ScalingLaw::GlobalForSmallKappa,
        };
    }
    let m = if a.lt(&nn) { a } else { nn };
    match criticality {
        Ordering::Less => ScalingLaw::PowerLaw {
            exponent: decay_gap(p, &m).recip().neg(),
        },
        Ordering::Equal if a.lt(&threshold) => ScalingLaw::PowerLaw {
            exponent: decay_gap(p, &a).recip().neg(),
        },
        Ordering::Equal => ScalingLaw::LogLifespanSmall { r: p.sub(&one()) },
        Ordering::Greater if a.lt(&threshold) => ScalingLaw::PowerLaw {
            exponent: decay_gap(p, &a).recip().neg(),
        },
        Ordering::Greater => ScalingLaw::GlobalForSmallKappa,
    }
}

/// The life-span law for data κψ in the given regime.
///
/// Constant data is accepted in both regimes: T(κc) = κ^{-2(p-1)} T(c) exactly.
pub fn predict(n: usize, p: Param, profile: &InitialProfile, regime: Regime) -> Result<ScalingLaw> {
    if n == 0 {
        return Err(Error::invalid("N", "dimension must be at least 1"));
    }
    if !p.gt(&one()) || !p.value().is_finite() {
        return Err(Error::invalid("p", format!("need p > 1, got {p}")));
    }
    profile.validate(n)?;
    match (*profile, regime) {
        (InitialProfile::SingularLog { a, b }, Regime::LargeKappa) => {
            if !profile.admissible(n) {
                return Err(Error::Inadmissible(format!(
                    "singular-log A = {a}, B = {b} is not locally integrable in dimension {n}; T = 0 for every kappa"
                )));
            }
            Ok(large_kappa(n, &p, a, b))
        }
        (InitialProfile::PowerDecay { a }, Regime::SmallKappa) => Ok(small_kappa(n, &p, a)),
        (InitialProfile::GaussianGrowth { lambda }, Regime::SmallKappa) => Ok(ScalingLaw::FiniteLimit {
            value: 1.0 / (4.0 * lambda),
        }),
        (InitialProfile::Constant { .. }, _) => Ok(ScalingLaw::PowerLaw {
            exponent: Param::integer(-2).mul(&p.sub(&one())),
        }),
        (profile, regime) => Err(Error::Inapplicable(format!(
            "no life-span law for {} data in the {regime} regime",
            profile_name(&profile)
        ))),
    }
}

fn profile_name(profile: &InitialProfile) -> &'static str {
    match profile {
        InitialProfile::SingularLog { .. } => "singular-log",
        InitialProfile::PowerDecay { .. } => "power-decay",
        InitialProfile::GaussianGrowth { .. } => "gaussian-growth",
        InitialProfile::Constant { .. } => "constant",
    }
}
