//! Heat kernels, the half-space Neumann Green function, and the free
//! evolution ∫_D G(x,y,t) ψ(y) dy of the initial-data families.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::geometry::unit_sphere_area;
use crate::numeric::integrate::{gauss_kronrod_breaks, graded, Tolerance};
use crate::profiles::InitialProfile;

/// Gaussian tails beyond this many √t are dropped (e^{-36} relative).
const TAIL_WIDTHS: f64 = 12.0;

/// (4πt)^{-d/2} exp(-|z|²/(4t)) with d = z.len(); d = 0 gives 1.
pub fn gauss_kernel(z: &[f64], t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("heat kernel needs t > 0, got {t}")));
    }
    let r2: f64 = z.iter().map(|v| v * v).sum();
    Ok((4.0 * PI * t).powf(-(z.len() as f64) / 2.0) * (-r2 / (4.0 * t)).exp())
}

fn gauss_1d(z: f64, t: f64) -> f64 {
    (4.0 * PI * t).powf(-0.5) * (-z * z / (4.0 * t)).exp()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelQuery {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub t: f64,
}

impl KernelQuery {
    pub fn new(x: Vec<f64>, y: Vec<f64>, t: f64) -> Result<Self> {
        let q = KernelQuery { x, y, t };
        q.validate()?;
        Ok(q)
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    fn validate(&self) -> Result<()> {
        if self.x.is_empty() || self.x.len() != self.y.len() {
            return Err(Error::invalid("kernel query", "x and y must be nonempty with equal dimension"));
        }
        if !(self.t > 0.0) {
            return Err(Error::Domain(format!("Green function needs t > 0, got {}", self.t)));
        }
        let (xn, yn) = (self.x[self.dim() - 1], self.y[self.dim() - 1]);
        if xn < 0.0 || yn < 0.0 {
            return Err(Error::Domain("points must lie in the closed half-space x_N >= 0".into()));
        }
        Ok(())
    }
}

/// Neumann Green function of the half-space by even reflection across x_N = 0.
pub fn neumann_green(q: &KernelQuery) -> Result<f64> {
    q.validate()?;
    let n = q.dim();
    let tangential: Vec<f64> = q.x[..n - 1].iter().zip(&q.y[..n - 1]).map(|(a, b)| a - b).collect();
    let (xn, yn) = (q.x[n - 1], q.y[n - 1]);
    let normal = gauss_1d(xn - yn, q.t) + gauss_1d(xn + yn, q.t);
    Ok(gauss_kernel(&tangential, q.t)? * normal)
}

/// Time at which the free evolution of the data ceases to exist (Gaussian growth only).
pub fn linear_blowup_time(profile: &InitialProfile) -> Option<f64> {
    match *profile {
        InitialProfile::GaussianGrowth { lambda } => Some(1.0 / (4.0 * lambda)),
        _ => None,
    }
}

/// F(x,t) = ∫_D G(x,y,t) ψ(y) dy.
///
/// Closed forms for constant and Gaussian-growth data; quadrature otherwise,
/// which is supported for N = 1 at any x and for N ≥ 2 at the origin.
pub fn free_propagate(profile: &InitialProfile, x: &[f64], t: f64, tol: Tolerance) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("free evolution needs t > 0, got {t}")));
    }
    let n = x.len();
    if n == 0 {
        return Err(Error::invalid("point", "dimension must be at least 1"));
    }
    let xn = x[n - 1];
    if xn < 0.0 {
        return Err(Error::Domain("x must lie in the closed half-space".into()));
    }
    match *profile {
        InitialProfile::Constant { c } => Ok(c),
        InitialProfile::GaussianGrowth { lambda } => {
            let s = 1.0 - 4.0 * lambda * t;
            if s <= 0.0 {
                return Err(Error::LinearBlowup {
                    t,
                    blowup_time: 1.0 / (4.0 * lambda),
                });
            }
            Ok(s.powf(-0.5) * (lambda * xn * xn / s).exp())
        }
        _ => {
            let at_origin = x.iter().all(|&v| v == 0.0);
            if at_origin {
                radial_at_origin(profile, n, t, tol)
            } else if n == 1 {
                half_line(profile, xn, t, tol)
            } else {
                Err(Error::invalid(
                    "point",
                    "quadrature-based free evolution away from the origin is only available for N = 1",
                ))
            }
        }
    }
}

/// x = 0: G(0,y,t) = 2(4πt)^{-N/2} e^{-|y|²/4t}, reduced to a radial integral.
fn radial_at_origin(profile: &InitialProfile, n: usize, t: f64, tol: Tolerance) -> Result<f64> {
    let prefactor = 2.0 * (4.0 * PI * t).powf(-(n as f64) / 2.0) * 0.5 * unit_sphere_area(n);
    let reach = TAIL_WIDTHS * t.sqrt();
    let nf = n as f64;
    let inner_tol = Tolerance::new(tol.abs / prefactor, tol.rel);
    let integral = match profile {
        InitialProfile::SingularLog { .. } => {
            let upper = reach.min(1.0);
            let split = t.sqrt().min(1.0);
            let ln_split = split.ln();
            let near = graded(
                |u| {
                    let ln_r = ln_split - u;
                    let r2 = (2.0 * ln_r).exp();
                    (profile.ln_radial_weighted(ln_r, nf) - r2 / (4.0 * t)).exp()
                },
                inner_tol,
            )?;
            let far = if upper > split {
                gauss_kronrod_breaks(
                    |r| profile.eval_radial(r) * r.powi(n as i32 - 1) * (-r * r / (4.0 * t)).exp(),
                    &[split, upper],
                    inner_tol,
                )?
                .value
            } else {
                0.0
            };
            near.value + far
        }
        _ => {
            let mut breaks = vec![0.0, 1f64.min(reach), t.sqrt().min(reach), reach];
            breaks.sort_by(f64::total_cmp);
            gauss_kronrod_breaks(
                |r| profile.eval_radial(r) * r.powi(n as i32 - 1) * (-r * r / (4.0 * t)).exp(),
                &breaks,
                inner_tol,
            )?
            .value
        }
    };
    Ok(prefactor * integral)
}

/// N = 1, x > 0: ∫_0^∞ [g(x-y) + g(x+y)] ψ(y) dy.
fn half_line(profile: &InitialProfile, x: f64, t: f64, tol: Tolerance) -> Result<f64> {
    let reach = TAIL_WIDTHS * t.sqrt();
    let support = profile.support_radius().unwrap_or(f64::INFINITY);
    let kernel = |y: f64| gauss_1d(x - y, t) + gauss_1d(x + y, t);
    let lo = (x - reach).max(0.0);
    let hi = (x + reach).min(support);
    if hi <= lo {
        return Ok(0.0);
    }
    let mut total = 0.0;
    let mut start = lo;
    if profile.singular_at_origin() && lo == 0.0 {
        let split = (0.5 * t.sqrt()).min(hi);
        let ln_split = split.ln();
        let near = graded(
            |u| {
                let ln_r = ln_split - u;
                let y = ln_r.exp();
                profile.ln_radial_weighted(ln_r, 1.0).exp() * kernel(y)
            },
            tol,
        )?;
        total += near.value;
        start = split;
    }
    if hi > start {
        let mut breaks = vec![start, hi];
        if x > start && x < hi {
            breaks.insert(1, x);
        }
        total += gauss_kronrod_breaks(|y| kernel(y) * profile.eval_radial(y), &breaks, tol)?.value;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::integrate::gauss_kronrod;
    use approx::assert_relative_eq;

    const FINE: Tolerance = Tolerance::new(1e-13, 1e-11);

    #[test]
    fn gauss_kernel_values() {
        assert_relative_eq!(gauss_kernel(&[0.0], 1.0 / (4.0 * PI)).unwrap(), 1.0, max_relative = 1e-15);
        assert_relative_eq!(gauss_kernel(&[0.0, 0.0], 1.0).unwrap(), 0.079_577_471_545_947_67, max_relative = 1e-14);
        assert!(gauss_kernel(&[0.0], 0.0).is_err());
        assert!(gauss_kernel(&[0.0], -1.0).is_err());
    }

    #[test]
    fn gauss_kernel_unit_mass() {
        let t = 0.37;
        let q = gauss_kronrod(|z| gauss_kernel(&[z], t).unwrap(), -20.0, 20.0, FINE).unwrap();
        assert_relative_eq!(q.value, 1.0, max_relative = 1e-8);
    }

    #[test]
    fn green_on_diagonal_boundary() {
        for &t in &[0.01, 0.5, 3.0] {
            let q = KernelQuery::new(vec![0.0], vec![0.0], t).unwrap();
            assert_relative_eq!(neumann_green(&q).unwrap(), (PI * t).powf(-0.5), max_relative = 1e-14);
        }
    }

    #[test]
    fn green_rejects_bad_queries() {
        assert!(KernelQuery::new(vec![0.0], vec![0.0], 0.0).is_err());
        assert!(KernelQuery::new(vec![-0.1], vec![0.0], 1.0).is_err());
        assert!(KernelQuery::new(vec![0.0, 1.0], vec![0.0], 1.0).is_err());
    }

    #[test]
    fn gaussian_growth_closed_form_at_origin() {
        let g = InitialProfile::GaussianGrowth { lambda: 0.25 };
        for &t in &[0.1, 0.5, 0.99] {
            assert_relative_eq!(
                free_propagate(&g, &[0.0], t, FINE).unwrap(),
                (1.0 - t).powf(-0.5),
                max_relative = 1e-14
            );
        }
        assert!(matches!(
            free_propagate(&g, &[0.0], 1.0, FINE),
            Err(Error::LinearBlowup { .. })
        ));
    }

    #[test]
    fn gaussian_growth_matches_quadrature_of_green_function() {
        let lambda = 0.2;
        let (x, t) = (0.7, 0.3);
        let g = InitialProfile::GaussianGrowth { lambda };
        let q = gauss_kronrod(
            |y| gauss_1d(x - y, t) * (lambda * y * y).exp() + gauss_1d(x + y, t) * (lambda * y * y).exp(),
            0.0,
            30.0,
            FINE,
        )
        .unwrap();
        assert_relative_eq!(free_propagate(&g, &[x], t, FINE).unwrap(), q.value, max_relative = 1e-10);
    }

    #[test]
    fn constant_is_invariant() {
        let c = InitialProfile::Constant { c: 2.5 };
        assert_eq!(free_propagate(&c, &[0.3, 1.0], 7.0, FINE).unwrap(), 2.5);
    }

    #[test]
    fn singular_data_matches_trapezoid_oracle() {
        // Fine-grid trapezoid in s = y^{1/2} (removes the y^{-1/2} singularity).
        let t: f64 = 0.01;
        let profile = InitialProfile::singular_log(0.5, 0.0);
        let m = 400_000;
        let h = 1.0 / m as f64;
        let mut sum = 0.0;
        for k in 0..=m {
            let s = k as f64 * h;
            // y = s², dy = 2s ds, y^{-1/2} dy = 2 ds
            let w = if k == 0 || k == m { 0.5 } else { 1.0 };
            sum += w * 2.0 * 2.0 * gauss_1d(s * s, t);
        }
        let oracle = sum * h;
        let value = free_propagate(&profile, &[0.0], t, FINE).unwrap();
        assert_relative_eq!(value, oracle, max_relative = 1e-5);
    }

    #[test]
    fn radial_and_half_line_paths_agree_near_origin() {
        let profile = InitialProfile::singular_log(0.3, 1.0);
        let t = 0.05;
        let at_zero = free_propagate(&profile, &[0.0], t, FINE).unwrap();
        let near_zero = free_propagate(&profile, &[1e-9], t, FINE).unwrap();
        assert_relative_eq!(at_zero, near_zero, max_relative = 1e-7);
    }

    #[test]
    fn off_origin_in_higher_dimension_is_rejected() {
        let profile = InitialProfile::power_decay(1.0);
        assert!(free_propagate(&profile, &[0.5, 0.5], 1.0, FINE).is_err());
        assert!(free_propagate(&profile, &[0.0, 0.0], 1.0, FINE).is_ok());
    }
}
