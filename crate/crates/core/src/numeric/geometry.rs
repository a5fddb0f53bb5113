//! Volumes of balls and of ball / half-space intersections in R^N.

use std::f64::consts::PI;

use statrs::function::beta::beta_reg;
use statrs::function::gamma::gamma;

/// Volume of the unit ball in R^N.
pub fn unit_ball_volume(n: usize) -> f64 {
    let half = n as f64 / 2.0;
    PI.powf(half) / gamma(half + 1.0)
}

/// Surface measure of the unit sphere S^{d-1} ⊂ R^d (d ≥ 1; S^0 has two points).
pub fn unit_sphere_area(d: usize) -> f64 {
    d as f64 * unit_ball_volume(d)
}

/// Lebesgue measure of {|y - x| < σ} ∩ {y_N ≥ 0} for a center at height
/// `height` above the boundary plane (negative heights allowed).
///
/// Uses the spherical-cap volume V_cap(h_c) = ½ V_N σ^N I_{(2σh_c - h_c²)/σ²}((N+1)/2, ½).
pub fn half_ball_measure(n: usize, height: f64, sigma: f64) -> f64 {
    let full = unit_ball_volume(n) * sigma.powi(n as i32);
    if height >= sigma {
        return full;
    }
    if height <= -sigma {
        return 0.0;
    }
    // Cap cut off by the plane at signed distance `height` from the center.
    let x = (1.0 - (height / sigma).powi(2)).clamp(0.0, 1.0);
    let cap_fraction = 0.5 * beta_reg((n as f64 + 1.0) / 2.0, 0.5, x);
    if height >= 0.0 {
        full * (1.0 - cap_fraction)
    } else {
        full * cap_fraction
    }
}
