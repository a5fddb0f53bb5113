//! Boundary trace of the minimal solution for N = 1 and its blow-up time.
//!
//! For N = 1 the trace w(t) = u(0, t) solves
//!
//!   w(t) = κF(t) + ∫_0^t (π(t-s))^{-1/2} w(s)^p ds,
//!
//! with F the free evolution of ψ at the boundary point. The kernel is
//! integrated exactly against a piecewise-linear interpolant of g = w^p
//! (piecewise-constant on the first interval, where g may be singular), and
//! each step solves w = K + c·w^p for its smaller root.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{free_propagate, linear_blowup_time};
use crate::numeric::Tolerance;
use crate::problem::ProblemSpec;
use crate::profiles::InitialProfile;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepPolicy {
    /// Target relative change of w per step; steps above 2η are rejected.
    pub eta: f64,
    /// Blow-up threshold, relative to the running minimum of w.
    pub w_max: f64,
    /// Accepted steps used in the rate fit.
    pub window: usize,
    pub horizon: f64,
    /// Relative change at checkpoints (and in T) that stops grid halving.
    pub refine_tol: f64,
    pub max_levels: usize,
    /// First step as a fraction of the intrinsic time scale t* (t*·(κF(t*))^{2(p-1)} = 1).
    pub init_fraction: f64,
    pub free_tol: Tolerance,
}

impl Default for StepPolicy {
    fn default() -> Self {
        StepPolicy {
            eta: 0.05,
            w_max: 1e6,
            window: 32,
            horizon: 1e8,
            refine_tol: 1e-4,
            max_levels: 6,
            init_fraction: 1e-8,
            free_tol: Tolerance::new(0.0, 1e-10),
        }
    }
}

impl StepPolicy {
    pub fn with_horizon(self, horizon: f64) -> Self {
        StepPolicy { horizon, ..self }
    }

    fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta < 0.5) {
            return Err(Error::invalid("eta", format!("must lie in (0, 0.5), got {}", self.eta)));
        }
        if !(self.w_max > 1.0) {
            return Err(Error::invalid("w_max", format!("must exceed 1, got {}", self.w_max)));
        }
        if self.window < 4 {
            return Err(Error::invalid("window", "rate fit needs at least 4 points"));
        }
        if !(self.horizon > 0.0) {
            return Err(Error::invalid("horizon", format!("must be positive, got {}", self.horizon)));
        }
        if self.max_levels == 0 {
            return Err(Error::invalid("max_levels", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    Horizon,
    Threshold,
    /// Steps shrank to the floating-point resolution of t while w kept growing.
    Resolution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceMeta {
    pub eta: f64,
    pub levels: usize,
    pub converged: bool,
    pub steps: usize,
    pub rejected: usize,
    pub stop: StopReason,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSolution {
    pub times: Vec<f64>,
    pub trace: Vec<f64>,
    /// κF(t_i), the free-evolution part of the trace.
    pub free: Vec<f64>,
    pub meta: TraceMeta,
}

impl TraceSolution {
    /// CSV with header `t,w`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,w\n");
        for (t, w) in self.times.iter().zip(&self.trace) {
            out.push_str(&format!("{t:e},{w:e}\n"));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BlowupMethod {
    ThresholdRateFit,
    GridExhausted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlowupEstimate {
    pub t_est: Option<f64>,
    pub bracket: Option<(f64, f64)>,
    pub method: BlowupMethod,
    pub levels: usize,
    pub converged: bool,
    pub steps: usize,
}

/// One march at a fixed η.
#[derive(Debug, Clone)]
struct March {
    times: Vec<f64>,
    steps: Vec<f64>,
    trace: Vec<f64>,
    free: Vec<f64>,
    /// (crossing time, fitted T) at w_max and 4·w_max.
    crossings: [Option<(f64, f64)>; 2],
    stop: StopReason,
    rejected: usize,
    fit_at_stop: Option<f64>,
}

impl March {
    fn value_at(&self, t: f64) -> Option<f64> {
        let i = self.times.iter().position(|&s| s == t)?;
        Some(self.trace[i])
    }

    fn t_est(&self) -> Option<f64> {
        self.crossings[1].map(|c| c.1).or(self.fit_at_stop)
    }
}

struct Solver<'a> {
    problem: &'a ProblemSpec,
    policy: &'a StepPolicy,
    p: f64,
    sqrt_pi: f64,
}

impl<'a> Solver<'a> {
    fn new(problem: &'a ProblemSpec, policy: &'a StepPolicy) -> Result<Self> {
        problem.validate()?;
        policy.validate()?;
        if problem.n != 1 {
            return Err(Error::Inapplicable(format!(
                "the boundary trace solver is restricted to N = 1 (got N = {})",
                problem.n
            )));
        }
        Ok(Solver {
            problem,
            policy,
            p: problem.p.value(),
            sqrt_pi: PI.sqrt(),
        })
    }

    fn free(&self, t: f64) -> Result<f64> {
        Ok(self.problem.kappa * free_propagate(&self.problem.profile, &[0.0], t, self.policy.free_tol)?)
    }

    /// Largest time the march may reach: the horizon, or just short of the
    /// blow-up time of the free evolution.
    fn end_time(&self, horizon: f64) -> f64 {
        match linear_blowup_time(&self.problem.profile) {
            Some(tl) => horizon.min(tl),
            None => horizon,
        }
    }

    /// t* with t*·(κF(t*))^{2(p-1)} = 1, located on a logarithmic scan and
    /// capped at the end time.
    fn intrinsic_time(&self, end: f64) -> Result<f64> {
        let q = 2.0 * (self.p - 1.0);
        let mut t = (end * 1e-30).max(1e-300);
        while t < end {
            let f = self.free(t)?;
            if t * f.powf(q) >= 1.0 {
                return Ok(t);
            }
            t *= 10.0;
        }
        Ok(end)
    }

    /// Time over which the data itself varies: ψ changes on unit length
    /// scales except for constants, and Gaussian growth has its own clock.
    fn data_time_scale(&self) -> f64 {
        match self.problem.profile {
            InitialProfile::Constant { .. } => f64::INFINITY,
            InitialProfile::GaussianGrowth { lambda } => 1.0 / (4.0 * lambda),
            _ => 1.0,
        }
    }

    /// Known part K and coefficient c of g_n for a step to t_n = t_{n-1} + h.
    fn assemble(&self, m: &March, g: &[f64], h: f64) -> (f64, f64) {
        let n = m.times.len();
        if n == 0 {
            // Single interval with constant g = g_1.
            return (0.0, 2.0 * h.sqrt() / self.sqrt_pi);
        }
        let mut sum = 0.0;
        // Distances t_n - t_j accumulated backwards from the step sizes.
        let mut b: f64 = 0.0;
        let mut a: f64 = h;
        let mut coeff = 0.0;
        // Interval [t_{j-1}, t_j] for j = n (new node) down to 2 (j is 1-based);
        // steps[j-1] holds t_j - t_{j-1}.
        for j in (2..=n + 1).rev() {
            let (sa, sb) = (a.sqrt(), b.sqrt());
            let width = if j == n + 1 { h } else { m.steps[j - 1] };
            let s = sa + sb;
            let alpha = 2.0 / 3.0 * width * (sa + 2.0 * sb) / (s * s);
            let beta = 2.0 / 3.0 * width * (2.0 * sa + sb) / (s * s);
            if j == n + 1 {
                coeff = beta;
            } else {
                sum += beta * g[j - 1];
            }
            sum += alpha * g[j - 2];
            b = a;
            a += m.steps[j - 2];
        }
        // First interval [0, t_1], g taken constant = g_1.
        let (sa, sb) = (a.sqrt(), b.sqrt());
        sum += 2.0 * m.steps[0] / (sa + sb) * g[0];
        (sum / self.sqrt_pi, coeff / self.sqrt_pi)
    }

    /// Smaller root of w = K + c·w^p, or None when the step is too long for one to exist.
    fn implicit(&self, k: f64, c: f64) -> Option<f64> {
        let p = self.p;
        if c == 0.0 {
            return Some(k);
        }
        let w_star = (c * p).powf(-1.0 / (p - 1.0));
        if k > w_star * (1.0 - 1.0 / p) {
            return None;
        }
        // g(w) = w - K - c w^p is concave: Newton from the left stays left of the root.
        let mut w = k;
        for _ in 0..200 {
            let wp = c * w.powf(p);
            let g = w - k - wp;
            let dg = 1.0 - p * wp / w;
            if !(dg > 0.0) {
                return None;
            }
            let next = w - g / dg;
            if (next - w).abs() <= 1e-15 * next.abs() {
                return Some(next);
            }
            w = next;
        }
        Some(w)
    }

    fn rate_fit(&self, m: &March) -> Option<f64> {
        let len = m.times.len();
        let k = self.policy.window.min(len);
        if k < 4 {
            return None;
        }
        let q = -2.0 * (self.p - 1.0);
        let ts = &m.times[len - k..];
        let ys: Vec<f64> = m.trace[len - k..].iter().map(|w| w.powf(q)).collect();
        let t0 = ts[k - 1];
        let xs: Vec<f64> = ts.iter().map(|t| t - t0).collect();
        let (mx, my) = (
            xs.iter().sum::<f64>() / k as f64,
            ys.iter().sum::<f64>() / k as f64,
        );
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
        if !(sxx > 0.0) {
            return None;
        }
        let slope = sxy / sxx;
        if !(slope < 0.0) {
            return None;
        }
        let root = mx - my / slope;
        Some(t0 + root.max(0.0))
    }

    fn march(&self, eta: f64, horizon: f64, checkpoints: &[f64], thresholds: bool) -> Result<March> {
        let end = self.end_time(horizon);
        let t_star = self.intrinsic_time(end)?.min(self.data_time_scale());
        let growth = 1.0 + 4.0 * eta;
        let mut m = March {
            times: Vec::new(),
            steps: Vec::new(),
            trace: Vec::new(),
            free: Vec::new(),
            crossings: [None, None],
            stop: StopReason::Horizon,
            rejected: 0,
            fit_at_stop: None,
        };
        let mut g: Vec<f64> = Vec::new();
        let mut t = 0.0;
        let mut h = (self.policy.init_fraction * t_star).min(end);
        let mut w_min = f64::INFINITY;
        let mut next_check = 0;
        loop {
            if t >= end {
                m.stop = StopReason::Horizon;
                break;
            }
            while next_check < checkpoints.len() && checkpoints[next_check] <= t {
                next_check += 1;
            }
            let mut attempts = 0;
            let (h_used, w, f, rel) = loop {
                attempts += 1;
                let mut h_try = h.min(end - t);
                if let Some(&c) = checkpoints.get(next_check) {
                    h_try = h_try.min(c - t);
                }
                let t_new = if t + h_try >= end { end } else { t + h_try };
                let resolved = t_new > t && h_try > 4.0 * f64::EPSILON * t;
                if !resolved || (t_new == end && linear_blowup_time(&self.problem.profile) == Some(end)) {
                    // Either the step underflows t's resolution or it would land on the
                    // blow-up time of κF itself.
                    if !resolved {
                        return self.finish_unresolved(m, t, h_try, w_min);
                    }
                    h = 0.5 * h_try;
                    if attempts > 200 {
                        return self.finish_unresolved(m, t, h_try, w_min);
                    }
                    continue;
                }
                let h_actual = t_new - t;
                let f = self.free(t_new)?;
                let (known, c) = self.assemble(&m, &g, h_actual);
                let k = f + known;
                match self.implicit(k, c) {
                    None => {
                        m.rejected += 1;
                        h = 0.25 * h_actual;
                    }
                    Some(w) => {
                        let rel = match m.trace.last() {
                            Some(&prev) => (w - prev).abs() / prev,
                            None => 0.0,
                        };
                        if rel > 2.0 * eta {
                            m.rejected += 1;
                            h = h_actual * (0.9 * eta / rel).max(0.2);
                        } else {
                            break (h_actual, w, f, rel);
                        }
                    }
                }
                if attempts > 200 {
                    return Err(Error::StepFailure {
                        t,
                        dt: h,
                        reason: "step rejected 200 times".into(),
                    });
                }
            };
            let clipped = checkpoints.get(next_check).is_some_and(|&c| t + h_used >= c);
            t += h_used;
            m.times.push(t);
            m.steps.push(h_used);
            m.trace.push(w);
            m.free.push(f);
            g.push(w.powf(self.p));
            w_min = w_min.min(w);
            let factor = if rel > 0.0 { (0.9 * eta / rel).min(growth) } else { growth };
            if !clipped {
                h = h_used * factor.max(0.5);
            } else {
                h = h.max(h_used);
            }
            if thresholds {
                let level = if m.crossings[0].is_none() { 0 } else { 1 };
                let target = if level == 0 { self.policy.w_max } else { 4.0 * self.policy.w_max };
                if w >= target * w_min {
                    let fit = self.rate_fit(&m).unwrap_or(t);
                    m.crossings[level] = Some((t, fit.max(t)));
                    if level == 1 {
                        m.stop = StopReason::Threshold;
                        break;
                    }
                }
            }
        }
        Ok(m)
    }

    /// Steps have shrunk below the resolution of t. Growing w is read as
    /// blow-up (the rate fit extrapolates T); anything else is a failure.
    fn finish_unresolved(&self, mut m: March, t: f64, h: f64, w_min: f64) -> Result<March> {
        let len = m.trace.len();
        let growing = len >= 4
            && m.trace[len - 4..].windows(2).all(|p| p[1] > p[0])
            && m.trace[len - 1] >= 10.0 * w_min;
        if !growing {
            return Err(Error::StepFailure {
                t,
                dt: h,
                reason: "step size fell below the resolution of t".into(),
            });
        }
        m.stop = StopReason::Resolution;
        m.fit_at_stop = Some(self.rate_fit(&m).unwrap_or(t).max(t));
        Ok(m)
    }

    /// Marches at η, η/2, ... until checkpoint values and the blow-up
    /// estimate change by less than the refinement tolerance.
    fn refine(&self, horizon: f64, thresholds: bool) -> Result<(Vec<March>, bool)> {
        let scout = self.march(self.policy.eta, horizon, &[], thresholds)?;
        let t_end = *scout.times.last().unwrap_or(&horizon);
        let first = scout.times.first().copied().unwrap_or(0.0);
        let checkpoints: Vec<f64> = [0.1, 0.3, 0.5, 0.7, 0.9]
            .iter()
            .map(|f| f * t_end)
            .filter(|&c| c > first)
            .collect();
        let mut levels: Vec<March> = Vec::new();
        let mut eta = self.policy.eta;
        let mut converged = false;
        for _ in 0..self.policy.max_levels {
            let m = self.march(eta, horizon, &checkpoints, thresholds)?;
            if let Some(prev) = levels.last() {
                let tol = self.policy.refine_tol;
                let mut change: f64 = 0.0;
                for &c in &checkpoints {
                    if let (Some(a), Some(b)) = (prev.value_at(c), m.value_at(c)) {
                        change = change.max((a - b).abs() / b.abs());
                    }
                }
                match (prev.t_est(), m.t_est()) {
                    (Some(a), Some(b)) => change = change.max((a - b).abs() / b),
                    (None, None) => {}
                    _ => change = f64::INFINITY,
                }
                levels.push(m);
                if change < tol {
                    converged = true;
                    break;
                }
            } else {
                levels.push(m);
            }
            eta *= 0.5;
        }
        Ok((levels, converged))
    }
}

/// Boundary trace on (0, horizon], refined by step halving. Marching also
/// stops once the trace has grown by 4·w_max over its running minimum.
pub fn solve_boundary_trace(problem: &ProblemSpec, horizon: f64, policy: &StepPolicy) -> Result<TraceSolution> {
    let solver = Solver::new(problem, policy)?;
    if !(horizon > 0.0) {
        return Err(Error::invalid("horizon", format!("must be positive, got {horizon}")));
    }
    let (mut levels, converged) = solver.refine(horizon, true)?;
    let n_levels = levels.len();
    let m = levels.pop().expect("at least one level");
    let steps = m.times.len();
    Ok(TraceSolution {
        meta: TraceMeta {
            eta: policy.eta / 2f64.powi(n_levels as i32 - 1),
            levels: n_levels,
            converged,
            steps,
            rejected: m.rejected,
            stop: m.stop,
        },
        times: m.times,
        trace: m.trace,
        free: m.free,
    })
}

/// Blow-up time of the minimal solution, or a grid-exhausted verdict when
/// the trace stays below the threshold up to the horizon.
pub fn estimate_blowup_time(problem: &ProblemSpec, policy: &StepPolicy) -> Result<BlowupEstimate> {
    let solver = Solver::new(problem, policy)?;
    let (levels, converged) = solver.refine(policy.horizon, true)?;
    let finest = levels.last().expect("at least one level");
    let steps = finest.times.len();
    let Some(t_est) = finest.t_est() else {
        return Ok(BlowupEstimate {
            t_est: None,
            bracket: None,
            method: BlowupMethod::GridExhausted,
            levels: levels.len(),
            converged,
            steps,
        });
    };
    // Both thresholds at the two finest resolutions.
    let mut candidates = Vec::new();
    for m in levels.iter().rev().take(2) {
        for c in m.crossings.iter().flatten() {
            candidates.push(c.1);
        }
        candidates.extend(m.fit_at_stop);
    }
    let mut lo = candidates.iter().copied().fold(t_est, f64::min);
    let mut hi = candidates.iter().copied().fold(t_est, f64::max);
    // The trace dominates κF, which is infinite from the linear blow-up time on.
    let (t_est, hi_cap) = match linear_blowup_time(&problem.profile) {
        Some(tl) => (t_est.min(tl), tl),
        None => (t_est, f64::INFINITY),
    };
    hi = hi.min(hi_cap);
    lo = lo.min(t_est);
    let pad = 1e-12 * t_est;
    if !(lo < t_est) {
        lo = t_est - pad;
    }
    if !(hi > t_est) {
        hi = t_est + pad;
    }
    Ok(BlowupEstimate {
        t_est: Some(t_est),
        bracket: Some((lo, hi)),
        method: BlowupMethod::ThresholdRateFit,
        levels: levels.len(),
        converged,
        steps,
    })
}

/// One application of the Duhamel map on a fixed grid:
/// (Mw)(t_n) = κF(t_n) + product-integrated ∫_0^{t_n} (π(t_n - s))^{-1/2} w(s)^p ds.
/// Iterating from w = κF gives the monotone (Picard) construction of the minimal solution.
pub fn duhamel_map(problem: &ProblemSpec, times: &[f64], w: &[f64], tol: Tolerance) -> Result<Vec<f64>> {
    if times.len() != w.len() {
        return Err(Error::invalid("trace", "times and values differ in length"));
    }
    let policy = StepPolicy {
        free_tol: tol,
        ..StepPolicy::default()
    };
    let solver = Solver::new(problem, &policy)?;
    let g: Vec<f64> = w.iter().map(|v| v.powf(solver.p)).collect();
    let mut m = March {
        times: Vec::new(),
        steps: Vec::new(),
        trace: Vec::new(),
        free: Vec::new(),
        crossings: [None, None],
        stop: StopReason::Horizon,
        rejected: 0,
        fit_at_stop: None,
    };
    let mut out = Vec::with_capacity(times.len());
    let mut prev = 0.0;
    for (i, &t) in times.iter().enumerate() {
        let h = t - prev;
        let (known, c) = solver.assemble(&m, &g[..i], h);
        out.push(solver.free(t)? + known + c * g[i]);
        m.times.push(t);
        m.steps.push(h);
        prev = t;
    }
    Ok(out)
}

/// Explicit product-rectangle march on a uniform grid: g frozen at the left
/// end of every subinterval. First order; used as an independent oracle.
pub fn rectangle_rule_trace(problem: &ProblemSpec, t_end: f64, n_steps: usize, tol: Tolerance) -> Result<(Vec<f64>, Vec<f64>)> {
    let policy = StepPolicy {
        free_tol: tol,
        ..StepPolicy::default()
    };
    let solver = Solver::new(problem, &policy)?;
    let h = t_end / n_steps as f64;
    let mut times = Vec::with_capacity(n_steps + 1);
    let mut trace = Vec::with_capacity(n_steps + 1);
    let mut g: Vec<f64> = Vec::with_capacity(n_steps + 1);
    // ∫_{t_j}^{t_{j+1}} (π(t_n - s))^{-1/2} ds with t_n - t_j = (n - j)h.
    let lag = |k: usize| 2.0 * h.sqrt() * ((k as f64).sqrt() - (k as f64 - 1.0).sqrt()) / solver.sqrt_pi;
    let w0 = solver.free(h * 1e-9)?;
    times.push(0.0);
    trace.push(w0);
    g.push(w0.powf(solver.p));
    for n in 1..=n_steps {
        let t = n as f64 * h;
        let mut sum = 0.0;
        for (j, gj) in g.iter().enumerate() {
            sum += lag(n - j) * gj;
        }
        let w = solver.free(t)? + sum;
        times.push(t);
        trace.push(w);
        g.push(w.powf(solver.p));
    }
    Ok((times, trace))
}
