//! Necessary and sufficient conditions for local solvability on [0, T), and
//! the life-span bounds obtained by searching for the largest T at which
//! they hold.
//!
//! The necessary conditions are linear in κ and their left side does not
//! depend on T, so [`Conditions`] caches it on a fixed geometric σ-lattice
//! (10^{k/m}, m points per decade) shared by all κ and all γ.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::ProblemSpec;
use crate::profiles::{ln_e_plus_exp, phi_inverse, rho, InitialProfile};
use crate::quadrature::{sup_average_in, AverageRequest, CenterSearchPolicy, HeightRange, Restriction, Weight};

/// The unspecified constants of the solvability conditions, plus δ and the
/// integrability exponent a of the split condition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaConfig {
    pub gamma1: f64,
    pub gamma1p: f64,
    pub gamma2: f64,
    pub gamma3: f64,
    pub gamma4: f64,
    pub delta: f64,
    /// None picks (1+p)/2, lowered below N/A for singular data.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
}

impl Default for GammaConfig {
    fn default() -> Self {
        GammaConfig {
            gamma1: 1.0,
            gamma1p: 1.0,
            gamma2: 1.0,
            gamma3: 1.0,
            gamma4: 1.0,
            delta: 0.5,
            a: None,
        }
    }
}

impl GammaConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("gamma1", self.gamma1),
            ("gamma1p", self.gamma1p),
            ("gamma2", self.gamma2),
            ("gamma3", self.gamma3),
            ("gamma4", self.gamma4),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(name, format!("must be positive, got {v}")));
            }
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::invalid("delta", format!("must lie in (0, 1), got {}", self.delta)));
        }
        if let Some(a) = self.a {
            if !(a > 1.0 && a.is_finite()) {
                return Err(Error::invalid("a", format!("must exceed 1, got {a}")));
            }
        }
        Ok(())
    }

    /// All five γ's multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        GammaConfig {
            gamma1: self.gamma1 * factor,
            gamma1p: self.gamma1p * factor,
            gamma2: self.gamma2 * factor,
            gamma3: self.gamma3 * factor,
            gamma4: self.gamma4 * factor,
            ..*self
        }
    }

    /// The exponent a ∈ (1, p) used by the split condition. For singular
    /// data it is capped at (N/A)(1 - 1e-6) so that ψ^a stays integrable.
    pub fn resolve_a(&self, problem: &ProblemSpec) -> Result<f64> {
        let p = problem.p_value();
        let a = self.a.unwrap_or(0.5 * (1.0 + p));
        if !(a > 1.0 && a < p) {
            return Err(Error::invalid("a", format!("must lie in (1, p) = (1, {p}), got {a}")));
        }
        match problem.profile {
            InitialProfile::SingularLog { a: big_a, .. } if big_a.value() > 0.0 => {
                let cap = problem.n as f64 / big_a.value() * (1.0 - 1e-6);
                if cap <= 1.0 {
                    return Err(Error::Inapplicable(format!(
                        "no a in (1, p) keeps aA < N for A = {big_a}, N = {}",
                        problem.n
                    )));
                }
                Ok(a.min(cap))
            }
            _ => Ok(a),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionVerdict {
    pub holds: bool,
    #[serde(with = "crate::float_serde::option")]
    pub worst_sigma: Option<f64>,
    /// max over σ of ln(left side / right side); holds iff margin ≤ 0.
    #[serde(with = "crate::float_serde")]
    pub margin: f64,
}

impl ConditionVerdict {
    fn from_margins(points: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        let mut worst: Option<(f64, f64)> = None;
        for (sigma, margin) in points {
            if margin.is_nan() {
                return Err(Error::Domain(format!("condition sides are not comparable at sigma = {sigma:e}")));
            }
            if worst.map_or(true, |(_, m)| margin > m) {
                worst = Some((sigma, margin));
            }
        }
        Ok(match worst {
            Some((sigma, margin)) => ConditionVerdict {
                holds: margin <= 0.0,
                worst_sigma: Some(sigma),
                margin,
            },
            None => ConditionVerdict {
                holds: true,
                worst_sigma: None,
                margin: f64::NEG_INFINITY,
            },
        })
    }

    /// Both conditions at once.
    pub fn and(self, other: ConditionVerdict) -> ConditionVerdict {
        let worst = if other.margin > self.margin { other } else { self };
        ConditionVerdict {
            holds: self.holds && other.holds,
            ..worst
        }
    }
}

/// Outcome of a T-search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Bound {
    Value { t: f64 },
    /// The condition fails at every T on the grid.
    Zero,
    /// The condition holds up to the top of the grid.
    UnboundedOnGrid,
}

impl Bound {
    /// The bound as a time; None when unbounded on the grid.
    pub fn time(&self) -> Option<f64> {
        match *self {
            Bound::Value { t } => Some(t),
            Bound::Zero => Some(0.0),
            Bound::UnboundedOnGrid => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LifespanBounds {
    pub upper: Option<Bound>,
    pub lower: Option<Bound>,
    pub gammas: GammaConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionPolicy {
    pub sigma_per_decade: u32,
    /// The σ-grid at T spans [10^{-decades} √T, √T].
    pub sigma_decades: f64,
    pub t_min: f64,
    pub t_max: f64,
    pub t_per_decade: u32,
    /// Relative width at which the T-bisection stops.
    pub rel_width: f64,
    #[serde(skip)]
    pub centers: CenterSearchPolicy,
}

impl Default for ConditionPolicy {
    fn default() -> Self {
        ConditionPolicy {
            sigma_per_decade: 64,
            sigma_decades: 8.0,
            t_min: 1e-12,
            t_max: 1e12,
            t_per_decade: 2,
            rel_width: 1e-3,
            centers: CenterSearchPolicy::default(),
        }
    }
}

impl ConditionPolicy {
    pub fn validate(&self) -> Result<()> {
        if self.sigma_per_decade == 0 || self.t_per_decade == 0 {
            return Err(Error::invalid("policy", "grid densities must be positive"));
        }
        if !(self.sigma_decades > 0.0) {
            return Err(Error::invalid("policy", "sigma_decades must be positive"));
        }
        if !(self.t_min > 0.0 && self.t_max > self.t_min && self.t_max.is_finite()) {
            return Err(Error::invalid(
                "policy",
                format!("need 0 < t_min < t_max < inf, got [{:e}, {:e}]", self.t_min, self.t_max),
            ));
        }
        if !(self.rel_width > 0.0) {
            return Err(Error::invalid("policy", "rel_width must be positive"));
        }
        Ok(())
    }

    pub fn t_grid(&self) -> Vec<f64> {
        let decades = (self.t_max / self.t_min).log10();
        let count = (decades * self.t_per_decade as f64).ceil().max(1.0) as usize;
        let step = decades / count as f64;
        (0..=count).map(|i| self.t_min * 10f64.powf(step * i as f64)).collect()
    }

    fn lattice_sigma(&self, k: i64) -> f64 {
        10f64.powf(k as f64 / self.sigma_per_decade as f64)
    }

    /// σ-grid at T: lattice points in the window, closed by √T itself.
    fn sigma_window(&self, t: f64) -> Vec<SigmaPoint> {
        let root = t.sqrt();
        let m = self.sigma_per_decade as f64;
        let lg = root.log10();
        let k_hi = (lg * m + 1e-9).floor() as i64;
        let k_lo = ((lg - self.sigma_decades) * m - 1e-9).ceil() as i64;
        let mut points: Vec<SigmaPoint> = (k_lo..=k_hi)
            .map(|k| SigmaPoint {
                key: Some(k),
                sigma: self.lattice_sigma(k),
            })
            .filter(|s| s.sigma <= root * (1.0 + 1e-12))
            .collect();
        if points.last().map_or(true, |s| s.sigma < root * (1.0 - 1e-12)) {
            points.push(SigmaPoint { key: None, sigma: root });
        }
        points
    }
}

#[derive(Debug, Clone, Copy)]
struct SigmaPoint {
    key: Option<i64>,
    sigma: f64,
}

/// Condition evaluator for one problem; clones made by
/// [`Conditions::with_kappa`] share the necessary-condition cache.
#[derive(Debug, Clone)]
pub struct Conditions {
    problem: ProblemSpec,
    gammas: GammaConfig,
    policy: ConditionPolicy,
    necessary_cache: Arc<Mutex<HashMap<i64, f64>>>,
}

impl Conditions {
    pub fn new(problem: ProblemSpec, gammas: GammaConfig, policy: ConditionPolicy) -> Result<Self> {
        problem.validate()?;
        gammas.validate()?;
        policy.validate()?;
        Ok(Conditions {
            problem,
            gammas,
            policy,
            necessary_cache: Arc::new(Mutex::new(HashMap::new())),
        })
    }

    pub fn problem(&self) -> &ProblemSpec {
        &self.problem
    }

    pub fn gammas(&self) -> &GammaConfig {
        &self.gammas
    }

    pub fn with_kappa(&self, kappa: f64) -> Result<Self> {
        let problem = self.problem.with_kappa(kappa);
        problem.validate()?;
        Ok(Conditions { problem, ..self.clone() })
    }

    /// Same problem under other constants; the cache survives when δ is unchanged.
    pub fn with_gammas(&self, gammas: GammaConfig) -> Result<Self> {
        gammas.validate()?;
        let cache = if gammas.delta == self.gammas.delta {
            self.necessary_cache.clone()
        } else {
            Arc::new(Mutex::new(HashMap::new()))
        };
        Ok(Conditions {
            gammas,
            necessary_cache: cache,
            ..self.clone()
        })
    }

    fn check_time(t: f64) -> Result<()> {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::invalid("T", format!("must be positive and finite, got {t}")));
        }
        Ok(())
    }

    fn p(&self) -> f64 {
        self.problem.p_value()
    }

    fn center_cap(&self, sigma: f64) -> f64 {
        self.policy.centers.default_cap(&self.problem.profile, sigma)
    }

    /// sup_h e^{-(1+δ)h²/(4σ²)} ∫_{B_+(h e_N, σ)} ψ, for κ = 1.
    fn necessary_mass(&self, sigma: f64) -> Result<f64> {
        let decay = (1.0 + self.gammas.delta) / (4.0 * sigma * sigma);
        let req = AverageRequest::new(self.problem.profile, 1.0, self.problem.n, 0.0, sigma).with_center_decay(decay);
        let range = HeightRange::capped(0.0, self.center_cap(sigma));
        let out = self
            .policy
            .centers
            .maximize(|h| req.at_height(h).integral(), range, sigma)?;
        Ok(out.value)
    }

    fn necessary_masses(&self, window: &[SigmaPoint]) -> Result<Vec<f64>> {
        let missing: Vec<SigmaPoint> = {
            let cache = self.necessary_cache.lock().expect("cache lock");
            window
                .iter()
                .filter(|s| s.key.map_or(true, |k| !cache.contains_key(&k)))
                .copied()
                .collect()
        };
        let fresh: Vec<(SigmaPoint, f64)> = missing
            .par_iter()
            .map(|s| self.necessary_mass(s.sigma).map(|m| (*s, m)))
            .collect::<Result<_>>()?;
        let mut cache = self.necessary_cache.lock().expect("cache lock");
        let mut exact = HashMap::new();
        for (s, m) in fresh {
            match s.key {
                Some(k) => {
                    cache.insert(k, m);
                }
                None => {
                    exact.insert(s.sigma.to_bits(), m);
                }
            }
        }
        Ok(window
            .iter()
            .map(|s| match s.key {
                Some(k) => cache[&k],
                None => exact[&s.sigma.to_bits()],
            })
            .collect())
    }

    fn necessary_verdict(&self, t: f64, ln_rhs: impl Fn(f64) -> f64) -> Result<ConditionVerdict> {
        Self::check_time(t)?;
        let window = self.policy.sigma_window(t);
        let masses = self.necessary_masses(&window)?;
        let ln_kappa = self.problem.kappa.ln();
        ConditionVerdict::from_margins(
            window
                .iter()
                .zip(masses)
                .map(|(s, m)| (s.sigma, ln_kappa + m.ln() - ln_rhs(s.sigma))),
        )
    }

    /// sup_x e^{-(1+δ)x_N²/(4σ²)} ∫_{B_+(x,σ)} κψ ≤ γ₁ σ^{N - 1/(p-1)} for σ on the grid up to √T.
    pub fn necessary_general(&self, t: f64) -> Result<ConditionVerdict> {
        let power = self.problem.n as f64 - 1.0 / (self.p() - 1.0);
        let ln_g = self.gammas.gamma1.ln();
        self.necessary_verdict(t, |sigma| ln_g + power * sigma.ln())
    }

    /// The same left side against γ₁' [log(e + √T/σ)]^{-N}; only at p = p_*.
    pub fn necessary_critical(&self, t: f64) -> Result<ConditionVerdict> {
        if self.problem.criticality() != Ordering::Equal {
            return Err(Error::WrongRegime(format!(
                "the critical necessary condition needs p = p_* = {}, got p = {}",
                self.problem.critical_exponent(),
                self.problem.p
            )));
        }
        let n = self.problem.n as f64;
        let ln_g = self.gammas.gamma1p.ln();
        let ln_root = 0.5 * t.ln();
        self.necessary_verdict(t, |sigma| ln_g - n * ln_e_plus_exp(ln_root - sigma.ln()).ln())
    }

    /// Every necessary condition that applies to the problem's p.
    pub fn necessary(&self, t: f64) -> Result<ConditionVerdict> {
        let general = self.necessary_general(t)?;
        if self.problem.criticality() == Ordering::Equal {
            Ok(general.and(self.necessary_critical(t)?))
        } else {
            Ok(general)
        }
    }

    /// ln of sup_x ⨍_{B_+(x,√T)} e^{-λy_N²} κψ_part with λ = (1-δ)/(4T), x_N ≥ `lo`.
    fn weighted_far_field(&self, t: f64, restriction: Restriction, lo: f64) -> Result<f64> {
        let root = t.sqrt();
        let lambda = (1.0 - self.gammas.delta) / (4.0 * t);
        let req = AverageRequest::new(self.problem.profile, self.problem.kappa, self.problem.n, lo, root)
            .with_weight(Weight::GaussianDecay { lambda_w: lambda })
            .with_restriction(restriction);
        let range = HeightRange::capped(lo, self.center_cap(root).max(lo));
        Ok(sup_average_in(&req, &self.policy.centers, range)?.value.ln())
    }

    fn ln_time_rhs(&self, gamma: f64, t: f64) -> f64 {
        gamma.ln() - t.ln() / (2.0 * (self.p() - 1.0))
    }

    /// Weighted average at radius √T against γ₂ T^{-1/(2(p-1))}; only for p < p_*.
    pub fn sufficient_subcritical(&self, t: f64) -> Result<ConditionVerdict> {
        if self.problem.criticality() != Ordering::Less {
            return Err(Error::WrongRegime(format!(
                "the subcritical sufficient condition needs p < p_* = {}, got p = {}",
                self.problem.critical_exponent(),
                self.problem.p
            )));
        }
        Self::check_time(t)?;
        let lhs = self.weighted_far_field(t, Restriction::All, 0.0)?;
        ConditionVerdict::from_margins([(t.sqrt(), lhs - self.ln_time_rhs(self.gammas.gamma2, t))])
    }

    /// Sup over x_N ∈ [0, √T) on the σ-grid of `ln_lhs(σ)` minus `ln_rhs(σ)`.
    fn near_field<L, R>(&self, t: f64, ln_lhs: L, ln_rhs: R) -> Result<ConditionVerdict>
    where
        L: Fn(&AverageRequest) -> Result<f64> + Sync,
        R: Fn(f64) -> f64 + Sync,
    {
        let root = t.sqrt();
        let window = self.policy.sigma_window(t);
        let margins: Vec<(f64, f64)> = window
            .par_iter()
            .map(|s| {
                let req = AverageRequest::new(self.problem.profile, self.problem.kappa, self.problem.n, 0.0, s.sigma)
                    .with_restriction(Restriction::Below { level: root });
                let lhs = ln_lhs(&req)?;
                Ok((s.sigma, lhs - ln_rhs(s.sigma)))
            })
            .collect::<Result<_>>()?;
        ConditionVerdict::from_margins(margins)
    }

    /// Far field φ₁ = φ χ{x_N ≥ √T} in the weighted mean, near field
    /// φ₂ = φ χ{x_N < √T} in L^a means against γ₃ σ^{-1/(p-1)}.
    pub fn sufficient_split(&self, t: f64) -> Result<ConditionVerdict> {
        Self::check_time(t)?;
        let a = self.gammas.resolve_a(&self.problem)?;
        let root = t.sqrt();
        let far = self.weighted_far_field(t, Restriction::AtOrAbove { level: root }, 0.0)?;
        let far = ConditionVerdict::from_margins([(root, far - self.ln_time_rhs(self.gammas.gamma3, t))])?;
        let ln_g = self.gammas.gamma3.ln();
        let inv = 1.0 / (self.p() - 1.0);
        let centers = self.policy.centers;
        let near = self.near_field(
            t,
            |req| {
                let req = req.clone().with_power(a);
                let sup = sup_average_in(&req, &centers, HeightRange::bounded(0.0, root))?;
                Ok(sup.value.ln() / a)
            },
            |sigma| ln_g - inv * sigma.ln(),
        )?;
        Ok(far.and(near))
    }

    /// Far field over centers in D_T, near field in the Orlicz mean
    /// against γ₄ ρ(σ/√T); only at p = p_*.
    pub fn sufficient_critical(&self, t: f64) -> Result<ConditionVerdict> {
        if self.problem.criticality() != Ordering::Equal {
            return Err(Error::WrongRegime(format!(
                "the critical sufficient condition needs p = p_* = {}, got p = {}",
                self.problem.critical_exponent(),
                self.problem.p
            )));
        }
        Self::check_time(t)?;
        let n = self.problem.n;
        let root = t.sqrt();
        let far = self.weighted_far_field(t, Restriction::AtOrAbove { level: root }, root)?;
        let far = ConditionVerdict::from_margins([(root, far - self.ln_time_rhs(self.gammas.gamma4, t))])?;
        let scale = t.powf(1.0 / (2.0 * (self.p() - 1.0)));
        let ln_g = self.gammas.gamma4.ln();
        let centers = self.policy.centers;
        let near = self.near_field(
            t,
            |req| {
                let req = req.clone().with_weight(Weight::Orlicz { scale });
                let sup = sup_average_in(&req, &centers, HeightRange::bounded(0.0, root))?;
                Ok(phi_inverse(sup.value, n).ln())
            },
            |sigma| ln_g + rho(sigma / root, n).expect("sigma > 0").ln(),
        )?;
        Ok(far.and(near))
    }

    /// The sufficient condition matching the problem's p.
    pub fn sufficient(&self, t: f64) -> Result<ConditionVerdict> {
        match self.problem.criticality() {
            Ordering::Less => self.sufficient_subcritical(t),
            Ordering::Equal => self.sufficient_critical(t),
            Ordering::Greater => self.sufficient_split(t),
        }
    }

    /// Largest T at which `holds` is true, assuming it holds on an initial
    /// segment of the T-grid: bisection over grid indices, then in T.
    fn search(&self, holds: impl Fn(f64) -> Result<bool>) -> Result<Bound> {
        let grid = self.policy.t_grid();
        let last = grid.len() - 1;
        if !holds(grid[0])? {
            return Ok(Bound::Zero);
        }
        if holds(grid[last])? {
            return Ok(Bound::UnboundedOnGrid);
        }
        let (mut lo, mut hi) = (0, last);
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if holds(grid[mid])? {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let (mut good, mut bad) = (grid[lo], grid[hi]);
        while bad > good * (1.0 + self.policy.rel_width) {
            let mid = (good * bad).sqrt();
            if mid <= good || mid >= bad {
                break;
            }
            if holds(mid)? {
                good = mid;
            } else {
                bad = mid;
            }
        }
        Ok(Bound::Value { t: good })
    }

    /// sup of T for which the necessary conditions hold: any solution on
    /// [0, T) forces them, so the life span cannot exceed it.
    pub fn upper_bound_lifespan(&self) -> Result<Bound> {
        self.search(|t| Ok(self.necessary(t)?.holds))
    }

    /// Largest T at which the applicable sufficient condition certifies a solution on [0, T).
    pub fn lower_bound_lifespan(&self) -> Result<Bound> {
        self.search(|t| Ok(self.sufficient(t)?.holds))
    }

    /// Both bounds; a lower bound that no sufficient condition covers is left empty.
    pub fn bounds(&self) -> Result<LifespanBounds> {
        let upper = Some(self.upper_bound_lifespan()?);
        let lower = match self.lower_bound_lifespan() {
            Ok(b) => Some(b),
            Err(e) if e.is_regime_error() => None,
            Err(e) => return Err(e),
        };
        Ok(LifespanBounds {
            upper,
            lower,
            gammas: self.gammas,
        })
    }
}

pub fn necessary_general(problem: &ProblemSpec, t: f64, gammas: &GammaConfig, policy: &ConditionPolicy) -> Result<ConditionVerdict> {
    Conditions::new(*problem, *gammas, *policy)?.necessary_general(t)
}

pub fn necessary_critical(problem: &ProblemSpec, t: f64, gammas: &GammaConfig, policy: &ConditionPolicy) -> Result<ConditionVerdict> {
    Conditions::new(*problem, *gammas, *policy)?.necessary_critical(t)
}

pub fn sufficient_subcritical(problem: &ProblemSpec, t: f64, gammas: &GammaConfig) -> Result<ConditionVerdict> {
    Conditions::new(*problem, *gammas, ConditionPolicy::default())?.sufficient_subcritical(t)
}

pub fn sufficient_split(problem: &ProblemSpec, t: f64, gammas: &GammaConfig, policy: &ConditionPolicy) -> Result<ConditionVerdict> {
    Conditions::new(*problem, *gammas, *policy)?.sufficient_split(t)
}

pub fn sufficient_critical(problem: &ProblemSpec, t: f64, gammas: &GammaConfig, policy: &ConditionPolicy) -> Result<ConditionVerdict> {
    Conditions::new(*problem, *gammas, *policy)?.sufficient_critical(t)
}

pub fn upper_bound_lifespan(problem: &ProblemSpec, gammas: &GammaConfig, policy: &ConditionPolicy) -> Result<Bound> {
    Conditions::new(*problem, *gammas, *policy)?.upper_bound_lifespan()
}

pub fn lower_bound_lifespan(problem: &ProblemSpec, gammas: &GammaConfig, policy: &ConditionPolicy) -> Result<Bound> {
    Conditions::new(*problem, *gammas, *policy)?.lower_bound_lifespan()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::param::Param;

    fn constant(n: usize, p: Param, kappa: f64) -> ProblemSpec {
        ProblemSpec::new(n, p, kappa, InitialProfile::Constant { c: 1.0 }).unwrap()
    }

    fn singular(n: usize, p: Param, kappa: f64, a: Param, b: Param) -> ProblemSpec {
        ProblemSpec::new(n, p, kappa, InitialProfile::SingularLog { a, b }).unwrap()
    }

    fn eval(problem: ProblemSpec) -> Conditions {
        Conditions::new(problem, GammaConfig::default(), ConditionPolicy::default()).unwrap()
    }

    fn slope(points: &[(f64, f64)]) -> f64 {
        let (x0, y0) = points[0];
        let (x1, y1) = points[points.len() - 1];
        (y1.ln() - y0.ln()) / (x1.ln() - x0.ln())
    }

    fn value(b: Bound) -> f64 {
        match b {
            Bound::Value { t } => t,
            other => panic!("expected a value, got {other:?}"),
        }
    }

    /// max over h of (min(h, σ) + σ) e^{-c h²}, the N = 1 constant-data left side.
    fn constant_mass_oracle(sigma: f64, delta: f64) -> f64 {
        let c = (1.0 + delta) / (4.0 * sigma * sigma);
        (0..=200_000)
            .map(|i| {
                let h = 3.0 * sigma * i as f64 / 200_000.0;
                (h.min(sigma) + sigma) * (-c * h * h).exp()
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn necessary_mass_matches_constant_oracle() {
        let c = eval(constant(1, Param::integer(3), 1.0));
        for sigma in [1e-3, 0.7, 40.0] {
            let got = c.necessary_mass(sigma).unwrap();
            let want = constant_mass_oracle(sigma, 0.5);
            assert!((got / want - 1.0).abs() < 1e-8, "sigma {sigma}: {got} vs {want}");
        }
    }

    #[test]
    fn constant_data_fails_beyond_closed_form_time() {
        // Left side ≥ κσ at x = 0 against γ₁σ^{1/2}: violated once σ > (γ₁/κ)².
        let kappa = 4.0;
        let c = eval(constant(1, Param::integer(3), kappa));
        let t_star = (1.0 / kappa).powi(4);
        assert!(!c.necessary_general(1.01 * t_star).unwrap().holds);
        let tiny = c.necessary_general(1e-6 * t_star).unwrap();
        assert!(tiny.holds && tiny.margin < 0.0);
    }

    #[test]
    fn small_kappa_satisfies_necessary_condition() {
        let c = eval(singular(1, Param::ratio(3, 2), 1e-30, Param::ratio(1, 2), Param::integer(0)));
        assert!(c.necessary_general(1.0).unwrap().holds);
        let c = eval(constant(2, Param::ratio(6, 5), 1e-30));
        assert!(c.sufficient_subcritical(1.0).unwrap().holds);
    }

    #[test]
    fn strong_singularity_has_no_upper_room() {
        // A = 0.8 > 1/(p-1) = 0.5: violated at small σ for every T.
        let c = eval(singular(1, Param::integer(3), 1.0, Param::ratio(4, 5), Param::integer(0)));
        for t in [1e-10, 1e-3, 1.0] {
            let v = c.necessary_general(t).unwrap();
            assert!(!v.holds);
            assert!(v.worst_sigma.unwrap() < 1e-3 * t.sqrt());
        }
        assert_eq!(c.upper_bound_lifespan().unwrap(), Bound::Zero);
    }

    #[test]
    fn critical_condition_rejects_weak_log() {
        // N = 1, p = 2, A = 1, B = 1.2 < N + 1.
        let c = eval(singular(1, Param::integer(2), 1.0, Param::integer(1), Param::ratio(6, 5)));
        for t in [1e-8, 1e-2, 1.0] {
            assert!(!c.necessary_critical(t).unwrap().holds, "T = {t}");
        }
    }

    #[test]
    fn wrong_regime_calls_error() {
        let sub = eval(constant(1, Param::ratio(3, 2), 1.0));
        let crit = eval(constant(1, Param::integer(2), 1.0));
        let sup = eval(constant(1, Param::integer(3), 1.0));
        assert!(sub.necessary_critical(1.0).unwrap_err().is_regime_error());
        assert!(sub.sufficient_critical(1.0).unwrap_err().is_regime_error());
        assert!(crit.sufficient_subcritical(1.0).unwrap_err().is_regime_error());
        assert!(sup.sufficient_subcritical(1.0).unwrap_err().is_regime_error());
        assert!(sup.necessary_critical(1.0).unwrap_err().is_regime_error());
        assert!(crit.necessary_critical(1.0).is_ok());
    }

    #[test]
    fn constant_upper_bound_scales_like_kappa_to_minus_four() {
        let c = eval(constant(1, Param::integer(3), 1.0));
        let pts: Vec<(f64, f64)> = [1.0, 10.0, 100.0]
            .iter()
            .map(|&k| (k, value(c.with_kappa(k).unwrap().upper_bound_lifespan().unwrap())))
            .collect();
        assert!((slope(&pts) + 4.0).abs() < 0.08, "{pts:?}");
    }

    #[test]
    fn constant_lower_bound_scales_like_kappa_to_minus_one() {
        let c = eval(constant(1, Param::ratio(3, 2), 1.0));
        let pts: Vec<(f64, f64)> = [1.0, 10.0, 100.0]
            .iter()
            .map(|&k| (k, value(c.with_kappa(k).unwrap().lower_bound_lifespan().unwrap())))
            .collect();
        assert!((slope(&pts) + 1.0).abs() < 0.05, "{pts:?}");
    }

    #[test]
    fn gaussian_weighted_mean_is_kappa_at_the_critical_time() {
        let lambda = 0.25;
        let kappa = 0.3;
        let problem = ProblemSpec::new(1, Param::integer(3), kappa, InitialProfile::GaussianGrowth { lambda }).unwrap();
        let c = eval(problem);
        let t = (1.0 - 0.5) / (4.0 * lambda);
        let ln_mean = c.weighted_far_field(t, Restriction::All, 0.0).unwrap();
        assert!((ln_mean - kappa.ln()).abs() < 1e-8);
    }

    #[test]
    fn gaussian_lower_bound_approaches_one_minus_delta() {
        let problem = ProblemSpec::new(1, Param::integer(3), 1e-3, InitialProfile::GaussianGrowth { lambda: 0.25 }).unwrap();
        let t = value(eval(problem).lower_bound_lifespan().unwrap());
        assert!(t <= 0.5 && t > 0.5 * (1.0 - 2e-3), "{t}");
    }

    #[test]
    fn split_condition_slope_for_singular_data() {
        // -2(p-1)/(1 - A(p-1)) = -20 for p = 3, A = 0.4.
        let policy = ConditionPolicy {
            t_min: 1e-60,
            t_max: 1.0,
            sigma_per_decade: 8,
            ..ConditionPolicy::default()
        };
        let problem = singular(1, Param::integer(3), 10.0, Param::ratio(2, 5), Param::integer(0));
        let c = Conditions::new(problem, GammaConfig::default(), policy).unwrap();
        let pts: Vec<(f64, f64)> = [10.0, 100.0]
            .iter()
            .map(|&k| (k, value(c.with_kappa(k).unwrap().lower_bound_lifespan().unwrap())))
            .collect();
        assert!((slope(&pts) + 20.0).abs() < 2.0, "{pts:?}");
    }

    #[test]
    fn split_far_field_vanishes_for_compact_data() {
        let c = eval(singular(1, Param::integer(3), 1e-3, Param::ratio(1, 4), Param::integer(0)));
        let far = c.weighted_far_field(4.0, Restriction::AtOrAbove { level: 2.0 }, 0.0).unwrap();
        assert_eq!(far, f64::NEG_INFINITY);
    }

    #[test]
    fn critical_sufficient_condition_for_fast_decay() {
        // N = 1, p = 2, A = 2 > N: existence up to T = exp(c/κ) for small κ.
        let problem = ProblemSpec::new(1, Param::integer(2), 0.02, InitialProfile::PowerDecay { a: Param::integer(2) }).unwrap();
        let policy = ConditionPolicy {
            sigma_per_decade: 8,
            ..ConditionPolicy::default()
        };
        let c = Conditions::new(problem, GammaConfig::default(), policy).unwrap();
        let t = (0.05f64 / 0.02).exp();
        assert!(c.sufficient_critical(t).unwrap().holds);
        assert!(!c.with_kappa(50.0).unwrap().sufficient_critical(t).unwrap().holds);
    }

    #[test]
    fn necessary_failure_persists_in_t() {
        let c = eval(constant(1, Param::integer(3), 2.0));
        let first = value(c.upper_bound_lifespan().unwrap()) * 1.01;
        for factor in [1.0, 3.0, 100.0, 1e4] {
            assert!(!c.necessary(first * factor).unwrap().holds);
        }
    }

    #[test]
    fn bounds_are_nonincreasing_in_kappa() {
        let c = eval(singular(1, Param::ratio(3, 2), 1.0, Param::ratio(1, 2), Param::integer(0)));
        let mut prev = f64::INFINITY;
        for k in [1.0, 5.0, 25.0, 125.0] {
            let ck = c.with_kappa(k).unwrap();
            let up = value(ck.upper_bound_lifespan().unwrap());
            assert!(up <= prev, "kappa {k}");
            prev = up;
        }
    }

    #[test]
    fn gamma_scaling_keeps_the_slope() {
        let base = eval(singular(1, Param::ratio(3, 2), 1.0, Param::ratio(1, 2), Param::integer(0)));
        let mut slopes = Vec::new();
        for factor in [1.0, 10.0] {
            let c = base.with_gammas(GammaConfig::default().scaled(factor)).unwrap();
            let pts: Vec<(f64, f64)> = [10.0, 1000.0]
                .iter()
                .map(|&k| (k, value(c.with_kappa(k).unwrap().upper_bound_lifespan().unwrap())))
                .collect();
            slopes.push(slope(&pts));
        }
        assert!((slopes[0] - slopes[1]).abs() < 0.01, "{slopes:?}");
        assert!((slopes[0] + 4.0 / 3.0).abs() < 0.05, "{slopes:?}");
    }

    #[test]
    fn exponent_a_is_capped_for_singular_data() {
        let g = GammaConfig::default();
        let p = singular(1, Param::integer(3), 1.0, Param::ratio(9, 10), Param::integer(0));
        let a = g.resolve_a(&p).unwrap();
        assert!(a < 1.0 / 0.9 && a > 1.11);
        let edge = singular(1, Param::integer(3), 1.0, Param::integer(1), Param::integer(2));
        assert!(matches!(g.resolve_a(&edge), Err(Error::Inapplicable(_))));
        let bad = GammaConfig { a: Some(3.5), ..g };
        assert!(bad.resolve_a(&p).is_err());
        assert_eq!(g.resolve_a(&constant(1, Param::integer(3), 1.0)).unwrap(), 2.0);
    }

    #[test]
    fn config_validation() {
        assert!(GammaConfig { delta: 1.0, ..GammaConfig::default() }.validate().is_err());
        assert!(GammaConfig { gamma3: 0.0, ..GammaConfig::default() }.validate().is_err());
        let policy = ConditionPolicy { t_min: 1.0, t_max: 0.5, ..ConditionPolicy::default() };
        assert!(Conditions::new(constant(1, Param::integer(2), 1.0), GammaConfig::default(), policy).is_err());
        assert!(eval(constant(1, Param::integer(2), 1.0)).necessary_general(0.0).is_err());
    }

    #[test]
    fn sigma_window_spans_eight_decades_and_ends_at_root_t() {
        let policy = ConditionPolicy::default();
        let w = policy.sigma_window(2.0);
        let last = w.last().unwrap();
        assert_eq!(last.sigma, 2f64.sqrt());
        assert!(last.key.is_none());
        assert!((w[0].sigma / last.sigma) >= 1e-8 * (1.0 - 1e-9));
        assert!(w.len() >= 8 * 64);
        let lattice = policy.sigma_window(1.0);
        assert_eq!(lattice.last().unwrap().key, Some(0));
    }

    #[test]
    fn verdicts_round_trip_through_json() {
        let v = ConditionVerdict {
            holds: true,
            worst_sigma: None,
            margin: f64::NEG_INFINITY,
        };
        let json = serde_json::to_string(&v).unwrap();
        assert_eq!(serde_json::from_str::<ConditionVerdict>(&json).unwrap(), v);
        let b = LifespanBounds {
            upper: Some(Bound::Value { t: 0.25 }),
            lower: Some(Bound::UnboundedOnGrid),
            gammas: GammaConfig::default(),
        };
        let json = serde_json::to_string(&b).unwrap();
        assert_eq!(serde_json::from_str::<LifespanBounds>(&json).unwrap(), b);
    }
}
