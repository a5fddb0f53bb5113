//! Averages of (powers of) the data over half-balls B_+(x, σ), optionally
//! weighted by e^{-λ y_N²} or passed through the Orlicz function Φ, and the
//! supremum of such quantities over centers.
//!
//! Centers lie on the x_N-axis. The integrals are written in polar
//! coordinates about the origin: y = r ω with θ the angle between ω and e_N,
//! so y_N = r cos θ and the ball condition becomes r₋(θ) < r < r₊(θ) with
//! r± = h cos θ ± (σ² - h² sin² θ)^{1/2}.

use std::cell::RefCell;
use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::geometry::{half_ball_measure, unit_sphere_area};
use crate::numeric::integrate::{gauss_kronrod, gauss_kronrod_breaks, graded};
use crate::numeric::roots::golden_max;
use crate::numeric::Tolerance;
use crate::profiles::{ln_e_plus_exp, InitialProfile};

const INNER_TOL: Tolerance = Tolerance::new(0.0, 1e-10);
const OUTER_TOL: Tolerance = Tolerance::new(0.0, 1e-8);
const NOISE: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Weight {
    None,
    /// e^{-λ_w y_N²}
    GaussianDecay { lambda_w: f64 },
    /// Integrand Φ(scale·κψ); the power is ignored.
    Orlicz { scale: f64 },
}

/// Which part of the data enters the integral: φ·χ over all of D, over
/// {y_N < L}, or over {y_N ≥ L}. The average is still taken over the whole ball.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Restriction {
    All,
    Below { level: f64 },
    AtOrAbove { level: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct AverageRequest {
    pub profile: InitialProfile,
    pub kappa: f64,
    pub center: Vec<f64>,
    pub sigma: f64,
    pub weight: Weight,
    pub power: f64,
    pub restriction: Restriction,
    /// Extra factor e^{-c h²} in the center height h, folded into the integrand.
    pub center_decay: f64,
}

impl AverageRequest {
    /// Plain average of κψ over B_+(x, σ) with the center at height `height`.
    pub fn new(profile: InitialProfile, kappa: f64, n: usize, height: f64, sigma: f64) -> Self {
        let mut center = vec![0.0; n];
        center[n - 1] = height;
        AverageRequest {
            profile,
            kappa,
            center,
            sigma,
            weight: Weight::None,
            power: 1.0,
            restriction: Restriction::All,
            center_decay: 0.0,
        }
    }

    pub fn with_weight(mut self, weight: Weight) -> Self {
        self.weight = weight;
        self
    }

    pub fn with_power(mut self, power: f64) -> Self {
        self.power = power;
        self
    }

    pub fn with_restriction(mut self, restriction: Restriction) -> Self {
        self.restriction = restriction;
        self
    }

    pub fn with_center_decay(mut self, c: f64) -> Self {
        self.center_decay = c;
        self
    }

    pub fn at_height(&self, height: f64) -> Self {
        let mut next = self.clone();
        let n = next.center.len();
        next.center[n - 1] = height;
        next
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn height(&self) -> f64 {
        self.center[self.center.len() - 1]
    }

    fn validate(&self) -> Result<()> {
        let n = self.center.len();
        if n == 0 {
            return Err(Error::invalid("center", "dimension must be at least 1"));
        }
        if self.center[..n - 1].iter().any(|&v| v != 0.0) {
            return Err(Error::invalid("center", "centers must lie on the x_N-axis"));
        }
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return Err(Error::invalid("sigma", format!("must be positive, got {}", self.sigma)));
        }
        if !(self.power >= 1.0) {
            return Err(Error::invalid("power", format!("must be at least 1, got {}", self.power)));
        }
        if !(self.center_decay >= 0.0) {
            return Err(Error::invalid("center_decay", format!("must be nonnegative, got {}", self.center_decay)));
        }
        if !(self.kappa >= 0.0) {
            return Err(Error::invalid("kappa", format!("must be nonnegative, got {}", self.kappa)));
        }
        match self.weight {
            Weight::GaussianDecay { lambda_w } if !(lambda_w > 0.0) => {
                Err(Error::invalid("weight", format!("lambda_w must be positive, got {lambda_w}")))
            }
            Weight::Orlicz { scale } if !(scale > 0.0) => {
                Err(Error::invalid("weight", format!("orlicz scale must be positive, got {scale}")))
            }
            _ => Ok(()),
        }
    }

    /// Whether the integrand fails to be integrable at the origin.
    fn diverges_at_origin(&self) -> bool {
        let n = self.dim();
        match self.weight {
            Weight::Orlicz { .. } => self.profile.orlicz_diverges_at_origin(n),
            _ => self.profile.power_diverges_at_origin(n, self.power),
        }
    }

    /// ln of [integrand(y)·r^N] at y = r ω with cos θ = `cos`; the extra r^N
    /// is the polar Jacobian r^{N-1} times the r of the graded substitution.
    fn ln_integrand(&self, ln_r: f64, cos: f64) -> f64 {
        let nf = self.dim() as f64;
        let r2 = (2.0 * ln_r).exp();
        let weight = match self.weight {
            Weight::GaussianDecay { lambda_w } => -lambda_w * r2 * cos * cos,
            _ => 0.0,
        };
        let h = self.height();
        let weight = if h > 0.0 { weight - self.center_decay * h * h } else { weight };
        let ln_kappa = self.kappa.ln();
        let value = match self.weight {
            Weight::Orlicz { scale } => {
                let ln_v = (scale * self.kappa).ln() + ln_profile(&self.profile, ln_r, cos, 0.0);
                if ln_v == f64::NEG_INFINITY {
                    return f64::NEG_INFINITY;
                }
                (scale * self.kappa).ln()
                    + ln_profile(&self.profile, ln_r, cos, nf)
                    + nf * ln_e_plus_exp(ln_v).ln()
            }
            _ => {
                let a = self.power;
                a * ln_kappa + a * ln_profile(&self.profile, ln_r, cos, nf / a)
            }
        };
        value + weight
    }

    /// Radial interval of the integration region along direction cos θ.
    fn radial_range(&self, cos: f64) -> (f64, f64) {
        let (h, s) = (self.height(), self.sigma);
        let sin2 = (1.0 - cos * cos).max(0.0);
        let disc = s * s - h * h * sin2;
        if disc < 0.0 {
            return (0.0, 0.0);
        }
        let root = disc.sqrt();
        let mut lo = (h * cos - root).max(0.0);
        let mut hi = h * cos + root;
        if let Some(support) = self.profile.support_radius() {
            hi = hi.min(support);
        }
        match self.restriction {
            Restriction::All => {}
            Restriction::Below { level } => {
                if cos > 0.0 {
                    hi = hi.min(level / cos);
                } else if level <= 0.0 {
                    hi = 0.0;
                }
            }
            Restriction::AtOrAbove { level } => {
                if cos > 0.0 {
                    lo = lo.max(level / cos);
                } else if level > 0.0 {
                    lo = hi;
                }
            }
        }
        (lo, hi)
    }

    fn radial_integral(&self, cos: f64) -> Result<f64> {
        let (lo, hi) = self.radial_range(cos);
        if !(hi > lo) {
            return Ok(0.0);
        }
        if lo == 0.0 && self.profile.singular_at_origin() {
            let ln_hi = hi.ln();
            let q = graded(|u| self.ln_integrand(ln_hi - u, cos).exp(), INNER_TOL)?;
            Ok(q.value)
        } else {
            let q = gauss_kronrod(|r| self.ln_integrand(r.ln(), cos).exp() / r, lo, hi, INNER_TOL)?;
            Ok(q.value)
        }
    }

    /// Angles at which an endpoint of the radial range switches formula.
    fn angular_breaks(&self, theta_max: f64) -> Vec<f64> {
        let (h, s) = (self.height(), self.sigma);
        let mut breaks = vec![0.0, theta_max];
        // Sphere |y - h e_N| = σ meets the level set y_N = L at y' = (σ² - (L-h)²)^{1/2}.
        let mut crossing = |level: f64| {
            let d = s * s - (level - h) * (level - h);
            if level > 0.0 && d > 0.0 {
                let theta = (d.sqrt() / level).atan();
                if theta > 0.0 && theta < theta_max {
                    breaks.push(theta);
                }
            }
        };
        match self.restriction {
            Restriction::Below { level } | Restriction::AtOrAbove { level } => crossing(level),
            Restriction::All => {}
        }
        if let Some(support) = self.profile.support_radius() {
            // |y| = R on the sphere: y_N = (R² + h² - σ²)/(2h).
            if h > 0.0 {
                let yn = (support * support + h * h - s * s) / (2.0 * h);
                if yn.abs() < support {
                    let theta = (yn / support).acos();
                    if theta > 0.0 && theta < theta_max {
                        breaks.push(theta);
                    }
                }
            }
        }
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
        breaks
    }

    /// ∫_{B_+(x,σ)} of the requested integrand (not normalized).
    pub fn integral(&self) -> Result<f64> {
        self.validate()?;
        if self.kappa == 0.0 {
            return Ok(0.0);
        }
        let n = self.dim();
        let (h, s) = (self.height(), self.sigma);
        if h <= -s {
            return Ok(0.0);
        }
        let origin_included = h.abs() <= s
            && !matches!(self.restriction, Restriction::AtOrAbove { level } if level > 0.0)
            && !matches!(self.restriction, Restriction::Below { level } if level <= 0.0);
        if origin_included && self.diverges_at_origin() {
            return Ok(f64::INFINITY);
        }
        if h < 0.0 {
            // Only needed for completeness; x_N < 0 never maximizes anything here.
            return Err(Error::invalid("center", "centers below the boundary are not supported"));
        }
        if n == 1 {
            return self.radial_integral(1.0);
        }
        let theta_max = if h <= s { FRAC_PI_2 } else { (s / h).asin() };
        let shell = unit_sphere_area(n - 1);
        let breaks = self.angular_breaks(theta_max);
        let failure = RefCell::new(None);
        let q = gauss_kronrod_breaks(
            |theta| {
                let inner = match self.radial_integral(theta.cos()) {
                    Ok(v) => v,
                    Err(e) => {
                        failure.borrow_mut().get_or_insert(e);
                        return f64::NAN;
                    }
                };
                if inner == 0.0 {
                    0.0
                } else {
                    shell * theta.sin().powi(n as i32 - 2) * inner
                }
            },
            &breaks,
            OUTER_TOL,
        );
        if let Some(e) = failure.into_inner() {
            return Err(e);
        }
        Ok(q?.value)
    }

    /// |B_+(x,σ)|^{-1} times [`AverageRequest::integral`].
    pub fn average(&self) -> Result<f64> {
        let total = self.integral()?;
        Ok(total / half_ball_measure(self.dim(), self.height(), self.sigma))
    }
}

/// ln[ψ(y)·r^extra] at |y| = e^{ln_r}, y_N = r·cos.
fn ln_profile(profile: &InitialProfile, ln_r: f64, cos: f64, extra: f64) -> f64 {
    match *profile {
        InitialProfile::GaussianGrowth { lambda } => {
            let yn = ln_r.exp() * cos;
            lambda * yn * yn + extra * ln_r
        }
        _ => profile.ln_radial_weighted(ln_r, extra),
    }
}

pub fn average(req: &AverageRequest) -> Result<f64> {
    req.average()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CenterSearchPolicy {
    /// Geometric heights between σ/64 and the search cap, besides h = 0.
    pub grid_points: usize,
    pub refine_iters: usize,
    /// Explicit cap on the center height; otherwise the data support plus σ,
    /// or 64·max(σ, 1) for data with unbounded support.
    pub max_height: Option<f64>,
    /// Consecutive increasing grid values at the cap that count as unbounded growth.
    pub growth_run: usize,
}

impl Default for CenterSearchPolicy {
    fn default() -> Self {
        CenterSearchPolicy {
            grid_points: 32,
            refine_iters: 40,
            max_height: None,
            growth_run: 4,
        }
    }
}

/// Range of admissible center heights: [lo, hi) or [lo, hi].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeightRange {
    pub lo: f64,
    pub hi: f64,
    /// `hi` is only a search cap, so growth up to it means the sup is infinite.
    pub open: bool,
}

impl HeightRange {
    pub fn bounded(lo: f64, hi: f64) -> Self {
        HeightRange { lo, hi, open: false }
    }

    pub fn capped(lo: f64, cap: f64) -> Self {
        HeightRange { lo, hi: cap, open: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupOutcome {
    /// The supremum; +∞ when unbounded or divergent.
    pub value: f64,
    pub height: f64,
    /// Values grew monotonically up to the search cap.
    pub unbounded: bool,
}

impl CenterSearchPolicy {
    pub fn default_cap(&self, profile: &InitialProfile, sigma: f64) -> f64 {
        self.max_height.unwrap_or(match profile.support_radius() {
            Some(r) => r + sigma,
            None => 64.0 * sigma.max(1.0),
        })
    }

    fn heights(&self, range: HeightRange, sigma: f64) -> Vec<f64> {
        let mut hs = vec![range.lo];
        let start = (sigma / 64.0).max(range.lo);
        let end = range.hi;
        if end > start && self.grid_points > 1 {
            let ratio = (end / start).powf(1.0 / (self.grid_points - 1) as f64);
            let mut h = start;
            for _ in 0..self.grid_points {
                if h > range.lo && h < end * (1.0 + 1e-12) {
                    hs.push(h.min(end));
                }
                h *= ratio;
            }
        }
        hs.dedup();
        hs
    }

    /// Maximizes `f` over center heights in `range`: geometric grid, then
    /// golden-section refinement between the neighbors of the best grid point.
    pub fn maximize<F>(&self, f: F, range: HeightRange, sigma: f64) -> Result<SupOutcome>
    where
        F: Fn(f64) -> Result<f64>,
    {
        let hs = self.heights(range, sigma);
        let mut values = Vec::with_capacity(hs.len());
        for &h in &hs {
            values.push(f(h)?);
        }
        let run = self.growth_run.max(1);
        let tail = &values[values.len().saturating_sub(run + 1)..];
        let increasing = range.open && values.len() > run && tail.windows(2).all(|w| w[1] > w[0]);
        let last = values.len() - 1;
        let (best, &best_value) = values
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .expect("nonempty grid");
        if best_value == f64::INFINITY {
            return Ok(SupOutcome {
                value: f64::INFINITY,
                height: hs[best],
                unbounded: best == last && increasing,
            });
        }
        if best == last && increasing {
            return Ok(SupOutcome {
                value: f64::INFINITY,
                height: hs[last],
                unbounded: true,
            });
        }
        let lo = if best == 0 { hs[0] } else { hs[best - 1] };
        let hi = if best == last { hs[last] } else { hs[best + 1] };
        let mut failure = None;
        let (h_ref, v_ref) = golden_max(
            |h| match f(h) {
                Ok(v) => v,
                Err(e) => {
                    failure.get_or_insert(e);
                    f64::NEG_INFINITY
                }
            },
            lo,
            hi,
            self.refine_iters,
        );
        if let Some(e) = failure {
            return Err(e);
        }
        // Gains below the quadrature noise do not move the argmax off the grid.
        let (height, value) = if v_ref > best_value * (1.0 + NOISE) {
            (h_ref, v_ref)
        } else {
            (hs[best], best_value)
        };
        Ok(SupOutcome {
            value,
            height,
            unbounded: false,
        })
    }
}

/// sup over centers x = h e_N (h in `range`) of the requested average.
pub fn sup_average_in(req: &AverageRequest, policy: &CenterSearchPolicy, range: HeightRange) -> Result<SupOutcome> {
    req.validate()?;
    policy.maximize(|h| req.at_height(h).average(), range, req.sigma)
}

/// sup over all centers in D of the requested average.
pub fn sup_average_over_centers(req: &AverageRequest, policy: &CenterSearchPolicy) -> Result<SupOutcome> {
    let range = HeightRange::capped(0.0, policy.default_cap(&req.profile, req.sigma));
    sup_average_in(req, policy, range)
}
