//! Scalar root bracketing and one-dimensional maximization.

/// Bisection for a sign change of `f` on [lo, hi]; assumes f(lo) and f(hi)
/// have opposite signs (or one is zero). Stops at relative width `rel_tol`.
pub fn bisect<F: FnMut(f64) -> f64>(mut f: F, mut lo: f64, mut hi: f64, rel_tol: f64) -> f64 {
    let mut f_lo = f(lo);
    if f_lo == 0.0 {
        return lo;
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if (hi - lo) <= rel_tol * mid.abs().max(f64::MIN_POSITIVE) || mid <= lo || mid >= hi {
            return mid;
        }
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return mid;
        }
        if (f_mid < 0.0) == (f_lo < 0.0) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Bisection in log space for a predicate that is true on (0, x*] and false
/// beyond; returns (last true, first false) after narrowing to `rel_tol`.
pub fn bisect_predicate_log<P: FnMut(f64) -> bool>(
    mut holds: P,
    mut good: f64,
    mut bad: f64,
    rel_tol: f64,
) -> (f64, f64) {
    for _ in 0..200 {
        if (bad - good).abs() <= rel_tol * good.abs() {
            break;
        }
        let mid = (good * bad).sqrt();
        if mid == good || mid == bad {
            break;
        }
        if holds(mid) {
            good = mid;
        } else {
            bad = mid;
        }
    }
    (good, bad)
}

/// Golden-section search for a maximum of a unimodal function on [lo, hi].
/// Returns (argmax, max).
pub fn golden_max<F: FnMut(f64) -> f64>(mut f: F, mut lo: f64, mut hi: f64, iters: usize) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..iters {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 >= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}
