//! One-dimensional quadrature: adaptive Gauss–Kronrod for piecewise smooth
//! integrands, and a double-exponential rule on half-lines that doubles as a
//! graded rule for integrands singular at one endpoint (substitute r = c·e^{-u}).

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute/relative accuracy target; the weaker of the two governs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
}

impl Tolerance {
    pub const fn new(abs: f64, rel: f64) -> Self {
        Self { abs, rel }
    }

    pub fn target(&self, value: f64) -> f64 {
        self.abs.max(self.rel * value.abs())
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Self::new(1e-7, 1e-5)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quad {
    pub value: f64,
    pub error: f64,
    pub evals: usize,
}

impl Quad {
    fn zero() -> Self {
        Quad {
            value: 0.0,
            error: 0.0,
            evals: 0,
        }
    }

    fn infinite(evals: usize) -> Self {
        Quad {
            value: f64::INFINITY,
            error: 0.0,
            evals,
        }
    }
}

const XGK: [f64; 11] = [
    0.995_657_163_025_808_1,
    0.973_906_528_517_171_7,
    0.930_157_491_355_708_2,
    0.865_063_366_688_984_5,
    0.780_817_726_586_416_9,
    0.679_409_568_299_024_4,
    0.562_757_134_668_604_7,
    0.433_395_394_129_247_2,
    0.294_392_862_701_460_2,
    0.148_874_338_981_631_2,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874,
    0.032_558_162_307_964_73,
    0.054_755_896_574_351_996,
    0.075_039_674_810_919_95,
    0.093_125_454_583_697_6,
    0.109_387_158_802_297_64,
    0.123_491_976_262_065_85,
    0.134_709_217_311_473_33,
    0.142_775_938_577_060_08,
    0.147_739_104_901_338_49,
    0.149_445_554_002_916_9,
];

// Gauss weights for the odd-indexed Kronrod nodes.
const WG: [f64; 5] = [
    0.066_671_344_308_688_14,
    0.149_451_349_150_580_6,
    0.219_086_362_515_982_04,
    0.269_266_719_309_996_35,
    0.295_524_224_714_752_87,
];

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}

impl Eq for Segment {}

impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn rescale_error(err: f64, res_abs: f64, res_asc: f64) -> f64 {
    let mut err = err.abs();
    if res_asc != 0.0 && err != 0.0 {
        let scale = (200.0 * err / res_asc).powf(1.5);
        err = if scale < 1.0 { res_asc * scale } else { res_asc };
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    err
}

/// 21-point Kronrod rule with embedded 10-point Gauss error estimate.
fn qk21<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut res_k = fc * WGK[10];
    let mut res_g = 0.0;
    let mut res_abs = res_k.abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for j in 0..10 {
        let x = half * XGK[j];
        let f1 = f(center - x);
        let f2 = f(center + x);
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * res_k;
    let mut res_asc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let scale = half.abs();
    let err = rescale_error((res_k - res_g) * half, res_abs * scale, res_asc * scale);
    (res_k * half, err)
}

/// Adaptive Gauss–Kronrod over [a, b], bisecting the segment with the largest
/// error estimate first.
pub fn gauss_kronrod<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: Tolerance) -> Result<Quad> {
    gauss_kronrod_breaks(f, &[a, b], tol)
}

/// Same as [`gauss_kronrod`] but starting from the given breakpoints, which
/// must be nondecreasing. Kinks and endpoint singularities should sit on breakpoints.
pub fn gauss_kronrod_breaks<F: Fn(f64) -> f64>(
    f: F,
    breaks: &[f64],
    tol: Tolerance,
) -> Result<Quad> {
    const MAX_SEGMENTS: usize = 4000;
    let mut heap = BinaryHeap::new();
    let mut total = 0.0;
    let mut total_err = 0.0;
    let mut evals = 0;
    for w in breaks.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b <= a {
            continue;
        }
        let (value, error) = qk21(&f, a, b);
        evals += 21;
        total += value;
        total_err += error;
        heap.push(Segment { a, b, value, error });
    }
    if heap.is_empty() {
        return Ok(Quad::zero());
    }
    loop {
        if total == f64::INFINITY {
            return Ok(Quad::infinite(evals));
        }
        if !total.is_finite() || !total_err.is_finite() {
            return Err(Error::Accuracy {
                estimate: total,
                achieved: total_err,
                target: tol.target(total),
            });
        }
        if total_err <= tol.target(total) {
            break;
        }
        if heap.len() >= MAX_SEGMENTS {
            return Err(Error::Accuracy {
                estimate: total,
                achieved: total_err,
                target: tol.target(total),
            });
        }
        let worst = heap.pop().expect("nonempty heap");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Interval exhausted at machine resolution; accept what we have.
            heap.push(Segment { error: 0.0, ..worst });
            total_err -= worst.error;
            continue;
        }
        let (v1, e1) = qk21(&f, worst.a, mid);
        let (v2, e2) = qk21(&f, mid, worst.b);
        evals += 42;
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.error;
        heap.push(Segment {
            a: worst.a,
            b: mid,
            value: v1,
            error: e1,
        });
        heap.push(Segment {
            a: mid,
            b: worst.b,
            value: v2,
            error: e2,
        });
    }
    // Re-sum to shed accumulated cancellation from the running updates.
    let (value, error) = heap
        .iter()
        .fold((0.0, 0.0), |(v, e), s| (v + s.value, e + s.error));
    Ok(Quad {
        value,
        error,
        evals,
    })
}

/// Double-exponential (exp-sinh) rule for ∫_a^∞ g(u) du.
///
/// The integrand must decay at infinity; exponential and algebraic decay
/// (u^{-s}, s > 1) are both handled.
pub fn exp_sinh<G: Fn(f64) -> f64>(g: G, a: f64, tol: Tolerance) -> Result<Quad> {
    const MAX_LEVEL: usize = 9;
    const T_MAX: f64 = 6.5;
    let mut evals = 0usize;
    let term = |t: f64, evals: &mut usize| -> f64 {
        let s = FRAC_PI_2 * t.sinh();
        let x = s.exp();
        let w = x * FRAC_PI_2 * t.cosh();
        if !w.is_finite() || w == 0.0 {
            return 0.0;
        }
        *evals += 1;
        let v = g(a + x);
        if v == 0.0 {
            0.0
        } else {
            v * w
        }
    };

    // Sum over t = offset + k·step outward in both directions until terms vanish.
    let sweep = |offset: f64, step: f64, evals: &mut usize, scale: f64| -> f64 {
        let mut sum = 0.0;
        for dir in [1.0, -1.0] {
            let mut k = 0usize;
            let mut small = 0;
            loop {
                let t = dir * (offset + k as f64 * step);
                if t.abs() > T_MAX {
                    break;
                }
                if dir < 0.0 && offset == 0.0 && k == 0 {
                    k += 1;
                    continue;
                }
                let v = term(t, evals);
                sum += v;
                let reference = scale.max(sum.abs());
                if v.abs() <= 1e-18 * reference || v == 0.0 {
                    small += 1;
                    if small >= 3 {
                        break;
                    }
                } else {
                    small = 0;
                }
                k += 1;
            }
        }
        sum
    };

    let mut h = 1.0;
    let mut raw = sweep(0.0, h, &mut evals, 0.0);
    let mut estimate = raw * h;
    for level in 1..=MAX_LEVEL {
        h *= 0.5;
        // New nodes are the odd multiples of the halved step.
        raw += sweep(h, 2.0 * h, &mut evals, raw.abs());
        let next = raw * h;
        if next == f64::INFINITY {
            return Ok(Quad::infinite(evals));
        }
        if !next.is_finite() {
            return Err(Error::Accuracy {
                estimate: next,
                achieved: f64::NAN,
                target: tol.target(estimate),
            });
        }
        let diff = (next - estimate).abs();
        estimate = next;
        if level >= 3 && diff <= tol.target(next) {
            return Ok(Quad {
                value: next,
                error: diff,
                evals,
            });
        }
    }
    Err(Error::Accuracy {
        estimate,
        achieved: f64::NAN,
        target: tol.target(estimate),
    })
}

/// Graded rule for ∫_0^c f(r) dr when f may be singular at r = 0.
///
/// `g` receives u = ln(c/r) and must return f(c·e^{-u})·c·e^{-u}; callers
/// evaluate it in log form so the nodes deep in the singular layer
/// (u in the hundreds) do not underflow.
pub fn graded<G: Fn(f64) -> f64>(g: G, tol: Tolerance) -> Result<Quad> {
    exp_sinh(g, 0.0, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const TIGHT: Tolerance = Tolerance::new(1e-13, 1e-12);

    #[test]
    fn gk_polynomial_exact() {
        let q = gauss_kronrod(|x| 3.0 * x * x, 0.0, 2.0, TIGHT).unwrap();
        assert_relative_eq!(q.value, 8.0, max_relative = 1e-14);
    }

    #[test]
    fn gk_sqrt_endpoint() {
        let q = gauss_kronrod(|x: f64| x.sqrt(), 0.0, 1.0, TIGHT).unwrap();
        assert_relative_eq!(q.value, 2.0 / 3.0, max_relative = 1e-11);
    }

    #[test]
    fn gk_with_breaks_at_kink() {
        let q = gauss_kronrod_breaks(|x: f64| (x - 0.3).abs(), &[0.0, 0.3, 1.0], TIGHT).unwrap();
        assert_relative_eq!(q.value, 0.5 * (0.09 + 0.49), max_relative = 1e-13);
    }

    #[test]
    fn exp_sinh_exponential_and_algebraic_tails() {
        let q = exp_sinh(|u: f64| (-u).exp(), 0.0, TIGHT).unwrap();
        assert_relative_eq!(q.value, 1.0, max_relative = 1e-12);
        let q = exp_sinh(|u: f64| (1.0 + u).powf(-1.5), 0.0, TIGHT).unwrap();
        assert_relative_eq!(q.value, 2.0, max_relative = 1e-10);
        let q = exp_sinh(|u: f64| 1.0 / (u * u), 1.0, TIGHT).unwrap();
        assert_relative_eq!(q.value, 1.0, max_relative = 1e-10);
    }

    #[test]
    fn graded_handles_inverse_square_root() {
        // ∫_0^1 r^{-1/2} dr = 2, integrand r^{-1/2}·r = e^{-u/2}
        let q = graded(|u: f64| (-0.5 * u).exp(), TIGHT).unwrap();
        assert_relative_eq!(q.value, 2.0, max_relative = 1e-12);
    }

    #[test]
    fn divergent_reports_infinity() {
        let q = gauss_kronrod(|_| f64::INFINITY, 0.0, 1.0, TIGHT).unwrap();
        assert!(q.value.is_infinite());
    }
}
