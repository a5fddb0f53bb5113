//! Initial-data families, their admissibility, and the special functions Φ, ρ
//! and Ψ used by the solvability conditions.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::geometry::{half_ball_measure, unit_ball_volume, unit_sphere_area};
use crate::numeric::integrate::{gauss_kronrod, graded, Tolerance};
use crate::numeric::roots::bisect;
use crate::param::Param;

/// ln(e + e^v), evaluated without overflow for large v.
pub(crate) fn ln_e_plus_exp(v: f64) -> f64 {
    if v > 1.0 {
        v + (1.0 - v).exp().ln_1p()
    } else {
        1.0 + (v - 1.0).exp().ln_1p()
    }
}

/// Initial data ψ; the solution starts from κψ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InitialProfile {
    /// |x|^{-A} [log(e + 1/|x|)]^{-B} on the unit half-ball, zero outside.
    SingularLog { a: Param, b: Param },
    /// (1 + |x|)^{-A}
    PowerDecay { a: Param },
    /// exp(λ x_N²)
    GaussianGrowth { lambda: f64 },
    Constant { c: f64 },
}

impl InitialProfile {
    pub fn singular_log(a: f64, b: f64) -> Self {
        InitialProfile::SingularLog {
            a: Param::float(a),
            b: Param::float(b),
        }
    }

    pub fn power_decay(a: f64) -> Self {
        InitialProfile::PowerDecay { a: Param::float(a) }
    }

    /// Checks the parameter ranges of the family itself (A ∈ [0, N], A > 0, λ > 0, c > 0).
    pub fn validate(&self, n: usize) -> Result<()> {
        match *self {
            InitialProfile::SingularLog { a, .. } => {
                if a.value() < 0.0 || a.value() > n as f64 + 1e-12 {
                    return Err(Error::invalid("profile", format!("singular-log needs 0 <= A <= N, got A = {a}")));
                }
            }
            InitialProfile::PowerDecay { a } => {
                if !(a.value() > 0.0) {
                    return Err(Error::invalid("profile", format!("power-decay needs A > 0, got A = {a}")));
                }
            }
            InitialProfile::GaussianGrowth { lambda } => {
                if !(lambda > 0.0 && lambda.is_finite()) {
                    return Err(Error::invalid("profile", format!("gaussian-growth needs lambda > 0, got {lambda}")));
                }
            }
            InitialProfile::Constant { c } => {
                if !(c > 0.0 && c.is_finite()) {
                    return Err(Error::invalid("profile", format!("constant needs c > 0, got {c}")));
                }
            }
        }
        Ok(())
    }

    /// Local integrability range of the singular-log family:
    /// B > 0 if A = 0, any B if 0 < A < N, B > 1 if A = N.
    pub fn admissible(&self, n: usize) -> bool {
        match *self {
            InitialProfile::SingularLog { a, b } => {
                let n = Param::integer(n as i64);
                let zero = Param::integer(0);
                if a.eq_to(&zero) {
                    b.gt(&zero)
                } else if a.gt(&zero) && a.lt(&n) {
                    true
                } else if a.eq_to(&n) {
                    b.gt(&Param::integer(1))
                } else {
                    false
                }
            }
            _ => true,
        }
    }

    pub fn is_radial(&self) -> bool {
        !matches!(self, InitialProfile::GaussianGrowth { .. })
    }

    /// Radius of the support, if bounded.
    pub fn support_radius(&self) -> Option<f64> {
        match self {
            InitialProfile::SingularLog { .. } => Some(1.0),
            _ => None,
        }
    }

    /// Whether ψ may blow up at the origin.
    pub fn singular_at_origin(&self) -> bool {
        matches!(self, InitialProfile::SingularLog { .. })
    }

    /// ψ(x) for x in the closed half-space (the last coordinate is x_N).
    /// Returns +∞ at the origin for singular data.
    pub fn eval(&self, x: &[f64]) -> f64 {
        match *self {
            InitialProfile::GaussianGrowth { lambda } => {
                let xn = x.last().copied().unwrap_or(0.0);
                (lambda * xn * xn).exp()
            }
            _ => {
                let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                self.eval_radial(r)
            }
        }
    }

    /// ψ as a function of |x| for the radial families.
    pub fn eval_radial(&self, r: f64) -> f64 {
        match *self {
            InitialProfile::SingularLog { .. } if r >= 1.0 => 0.0,
            InitialProfile::SingularLog { a, .. } if r == 0.0 => {
                if a.value() > 0.0 {
                    f64::INFINITY
                } else {
                    self.ln_radial(f64::NEG_INFINITY).exp()
                }
            }
            InitialProfile::GaussianGrowth { .. } => f64::NAN,
            _ => self.ln_radial(r.ln()).exp(),
        }
    }

    /// ln ψ at |x| = e^{ln_r}; stays accurate deep in the singular layer.
    pub(crate) fn ln_radial(&self, ln_r: f64) -> f64 {
        self.ln_radial_weighted(ln_r, 0.0)
    }

    /// ln(ψ(r)·r^extra) at r = e^{ln_r}. The powers are combined before the
    /// log factor is added so that A = extra does not cancel catastrophically.
    pub(crate) fn ln_radial_weighted(&self, ln_r: f64, extra: f64) -> f64 {
        let weight = if extra == 0.0 { 0.0 } else { extra * ln_r };
        match *self {
            InitialProfile::SingularLog { a, b } => {
                if ln_r >= 0.0 {
                    return f64::NEG_INFINITY;
                }
                let (a, b) = (a.value(), b.value());
                let log_factor = ln_e_plus_exp(-ln_r).ln();
                let power = if a == extra { 0.0 } else { (extra - a) * ln_r };
                let log_term = if b == 0.0 { 0.0 } else { -b * log_factor };
                power + log_term
            }
            InitialProfile::PowerDecay { a } => -a.value() * ln_r.exp().ln_1p() + weight,
            InitialProfile::Constant { c } => c.ln() + weight,
            InitialProfile::GaussianGrowth { .. } => f64::NAN,
        }
    }

    /// Whether ∫_{B_+(0,σ)} ψ(y)^power dy diverges (only possible for singular-log data).
    pub fn power_diverges_at_origin(&self, n: usize, power: f64) -> bool {
        match *self {
            InitialProfile::SingularLog { a, b } => {
                let (pa, pb) = (power * a.value(), power * b.value());
                let n = n as f64;
                let scale = 1f64.max(n);
                if (pa - n).abs() <= 1e-12 * scale {
                    pb <= 1.0
                } else {
                    pa > n
                }
            }
            _ => false,
        }
    }

    /// Whether ∫_{B_+(0,σ)} Φ(sψ(y)) dy diverges; Φ adds [log]^N, i.e. shifts B by -N.
    pub fn orlicz_diverges_at_origin(&self, n: usize) -> bool {
        match *self {
            InitialProfile::SingularLog { a, b } => {
                let n = Param::integer(n as i64);
                if a.eq_to(&n) {
                    !b.gt(&n.add(&Param::integer(1)))
                } else {
                    a.gt(&n)
                }
            }
            _ => false,
        }
    }
}

impl fmt::Display for InitialProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitialProfile::SingularLog { a, b } => write!(f, "singular-log:A={a},B={b}"),
            InitialProfile::PowerDecay { a } => write!(f, "power-decay:A={a}"),
            InitialProfile::GaussianGrowth { lambda } => write!(f, "gaussian-growth:lambda={lambda}"),
            InitialProfile::Constant { c } => write!(f, "constant:c={c}"),
        }
    }
}

impl FromStr for InitialProfile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |msg: String| Error::invalid("profile", msg);
        let (family, args) = s
            .split_once(':')
            .ok_or_else(|| bad(format!("expected <family>:<key>=<value>,..., got '{s}'")))?;
        let mut fields = Vec::new();
        for part in args.split(',').filter(|p| !p.trim().is_empty()) {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| bad(format!("expected key=value, got '{part}'")))?;
            let value: Param = v
                .parse()
                .map_err(|_| bad(format!("cannot parse value of {} in '{s}'", k.trim())))?;
            fields.push((k.trim().to_string(), value));
        }
        let take = |key: &str| -> Result<Param> {
            fields
                .iter()
                .find(|(k, _)| k == key)
                .map(|(_, v)| *v)
                .ok_or_else(|| bad(format!("missing {key} in '{s}'")))
        };
        let expect_keys = |keys: &[&str]| -> Result<()> {
            match fields.iter().find(|(k, _)| !keys.contains(&k.as_str())) {
                Some((k, _)) => Err(bad(format!("unexpected key {k} in '{s}'"))),
                None => Ok(()),
            }
        };
        let profile = match family.trim() {
            "singular-log" => {
                expect_keys(&["A", "B"])?;
                InitialProfile::SingularLog {
                    a: take("A")?,
                    b: take("B")?,
                }
            }
            "power-decay" => {
                expect_keys(&["A"])?;
                InitialProfile::PowerDecay { a: take("A")? }
            }
            "gaussian-growth" => {
                expect_keys(&["lambda"])?;
                InitialProfile::GaussianGrowth {
                    lambda: take("lambda")?.value(),
                }
            }
            "constant" => {
                expect_keys(&["c"])?;
                InitialProfile::Constant { c: take("c")?.value() }
            }
            other => return Err(bad(format!("unknown profile family '{other}'"))),
        };
        Ok(profile)
    }
}

/// Φ(s) = s [log(e + s)]^N
pub fn phi_orlicz(s: f64, n: usize) -> f64 {
    if s == 0.0 {
        return 0.0;
    }
    s * (std::f64::consts::E + s).ln().powi(n as i32)
}

/// ρ(s) = s^{-N} [log(e + 1/s)]^{-N}
pub fn rho(s: f64, n: usize) -> Result<f64> {
    if !(s > 0.0) {
        return Err(Error::Domain(format!("rho needs s > 0, got {s}")));
    }
    let n = n as i32;
    let ln_inv = ln_e_plus_exp(-s.ln());
    Ok((s * ln_inv).powi(-n))
}

/// Inverse of Φ on [0, ∞), to 1e-12 relative.
pub fn phi_inverse(tau: f64, n: usize) -> f64 {
    if !(tau > 0.0) {
        return 0.0;
    }
    if tau == f64::INFINITY {
        return f64::INFINITY;
    }
    // Φ(s) ≥ s and log(e+s) ≤ log(e+τ) for s ≤ τ give the bracket below.
    let mut hi = tau;
    let mut lo = tau / (std::f64::consts::E + tau).ln().powi(n as i32);
    let target = tau.ln();
    let residual = |s: f64| s.ln() + n as f64 * (std::f64::consts::E + s).ln().ln() - target;
    let mut s = (lo * hi).sqrt();
    for _ in 0..100 {
        let r = residual(s);
        if r == 0.0 {
            return s;
        }
        if r > 0.0 {
            hi = s;
        } else {
            lo = s;
        }
        // Newton in ln s: d residual / d ln s = 1 + N s / ((e + s) log(e + s)).
        let e_s = std::f64::consts::E + s;
        let slope = 1.0 + n as f64 * s / (e_s * e_s.ln());
        let mut next = s * (-r / slope).exp();
        if !(next > lo && next < hi) {
            next = (lo * hi).sqrt();
        }
        if (next - s).abs() <= 1e-15 * s || (hi - lo) <= 1e-15 * hi {
            return next;
        }
        s = next;
    }
    s
}

/// Ψ(τ) = τ^{a₁} [log(e + 1/τ)]^{a₂}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLogSpec {
    pub a1: f64,
    pub a2: f64,
}

/// The sub-interval (0, tau_max] on which Ψ is increasing, and Ψ(tau_max).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonotoneRange {
    pub tau_max: f64,
    pub value_max: f64,
}

impl PowerLogSpec {
    pub fn new(a1: f64, a2: f64) -> Result<Self> {
        if !(a1 > 0.0) {
            return Err(Error::invalid("a1", format!("must be positive, got {a1}")));
        }
        Ok(PowerLogSpec { a1, a2 })
    }

    fn ln_psi(&self, ln_tau: f64) -> f64 {
        let log_term = if self.a2 == 0.0 {
            0.0
        } else {
            self.a2 * ln_e_plus_exp(-ln_tau).ln()
        };
        self.a1 * ln_tau + log_term
    }

    /// First sign change of the finite-difference slope of Ψ on a log grid
    /// (20 points per decade over [1e-300, 1e300]).
    pub fn monotone_range(&self) -> MonotoneRange {
        const PER_DECADE: f64 = 20.0;
        let step = std::f64::consts::LN_10 / PER_DECADE;
        let start = -300.0 * std::f64::consts::LN_10;
        let count = (600.0 * PER_DECADE) as usize;
        let mut prev_ln = start;
        let mut prev = self.ln_psi(prev_ln);
        for k in 1..=count {
            let ln_tau = start + k as f64 * step;
            let cur = self.ln_psi(ln_tau);
            if cur <= prev {
                return MonotoneRange {
                    tau_max: prev_ln.exp(),
                    value_max: prev.exp(),
                };
            }
            prev = cur;
            prev_ln = ln_tau;
        }
        MonotoneRange {
            tau_max: prev_ln.exp(),
            value_max: prev.exp(),
        }
    }
}

pub fn psi_power_log(tau: f64, spec: &PowerLogSpec) -> f64 {
    if tau <= 0.0 {
        return 0.0;
    }
    spec.ln_psi(tau.ln()).exp()
}

/// Solves Ψ(s) = tau on the monotone sub-interval.
pub fn psi_inverse(tau: f64, spec: &PowerLogSpec) -> Result<f64> {
    let range = spec.monotone_range();
    if tau == 0.0 {
        return Ok(0.0);
    }
    if !(tau > 0.0) || tau > range.value_max {
        return Err(Error::Range {
            value: tau,
            lo: 0.0,
            hi: range.value_max,
        });
    }
    let target = tau.ln();
    let lo = -700.0;
    if spec.ln_psi(lo) >= target {
        return Ok(lo.exp());
    }
    let ln_s = bisect(|ln_s| spec.ln_psi(ln_s) - target, lo, range.tau_max.ln(), 1e-16);
    Ok(ln_s.exp())
}

/// ∫_{B_+(0,σ)} ψ(y) dy, +∞ when the integral diverges.
pub fn half_ball_mass(profile: &InitialProfile, sigma: f64, n: usize) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::Domain(format!("sigma must be positive, got {sigma}")));
    }
    let tol = Tolerance::new(1e-14, 1e-12);
    let shell = 0.5 * unit_sphere_area(n);
    match *profile {
        InitialProfile::Constant { c } => Ok(c * half_ball_measure(n, 0.0, sigma)),
        InitialProfile::GaussianGrowth { lambda } => {
            // Slices at height z are (N-1)-balls of radius sqrt(σ² - z²).
            let slice = unit_ball_volume(n - 1);
            let q = gauss_kronrod(
                |z| (lambda * z * z).exp() * slice * (sigma * sigma - z * z).max(0.0).powf((n as f64 - 1.0) / 2.0),
                0.0,
                sigma,
                tol,
            )?;
            Ok(q.value)
        }
        InitialProfile::PowerDecay { .. } => {
            let q = gauss_kronrod(
                |r| profile.eval_radial(r) * r.powi(n as i32 - 1),
                0.0,
                sigma,
                tol,
            )?;
            Ok(shell * q.value)
        }
        InitialProfile::SingularLog { .. } => {
            if profile.power_diverges_at_origin(n, 1.0) {
                return Ok(f64::INFINITY);
            }
            let c = sigma.min(1.0);
            let ln_c = c.ln();
            let q = graded(
                |u| {
                    let ln_r = ln_c - u;
                    profile.ln_radial_weighted(ln_r, n as f64).exp()
                },
                tol,
            )?;
            Ok(shell * q.value)
        }
    }
}
