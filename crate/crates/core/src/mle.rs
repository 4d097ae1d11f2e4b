//! Maximum likelihood over a compact parameter box.
//!
//! A simplex search on `(gamma, mu, log sigma)` locates the maximum while
//! treating the moving support wall as an infinite objective, then a
//! projected Newton polish on the analytic score drives the mean score
//! below the first-order tolerance.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{GevError, Result};
use crate::fisher::{self, NEAR_SINGULAR_BAND};
use crate::gev;
use crate::optim::{self, SimplexOptions};
use crate::score::{self, score_std};
use crate::theta::{Sample, Theta};

/// Closed interval `[lo, hi]`.
pub type Range = [f64; 2];

/// The compact parameter set the likelihood is maximized over.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamBox {
    pub gamma: Range,
    pub mu: Range,
    pub sigma: Range,
}

impl ParamBox {
    pub fn new(gamma: Range, mu: Range, sigma: Range) -> Result<Self> {
        let b = Self { gamma, mu, sigma };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        let named = [("gamma", self.gamma), ("mu", self.mu), ("sigma", self.sigma)];
        for (name, r) in named {
            if !(r[0].is_finite() && r[1].is_finite() && r[0] <= r[1]) {
                return Err(GevError::InvalidBox(format!("{name} range [{}, {}] is empty or not finite", r[0], r[1])));
            }
        }
        if !(self.gamma[0] > -0.5) {
            return Err(GevError::InvalidBox(format!("gamma lower bound {} must exceed -1/2", self.gamma[0])));
        }
        if !(self.sigma[0] > 0.0) {
            return Err(GevError::InvalidBox(format!("sigma lower bound {} must be positive", self.sigma[0])));
        }
        Ok(())
    }

    /// `gamma in [-0.45, 5]`, `mu` within ten IQRs of the data range,
    /// `sigma in [1e-8 range, 10 range]`.
    pub fn default_for(values: &[f64]) -> Result<Self> {
        let (min, max) = min_max(values);
        let range = max - min;
        if !(range > 0.0) {
            return Err(GevError::DegenerateSample("all values are equal".into()));
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mut iqr = empirical_quantile(&sorted, 0.75) - empirical_quantile(&sorted, 0.25);
        if !(iqr > 0.0) {
            iqr = range;
        }
        Self::new([-0.45, 5.0], [min - 10.0 * iqr, max + 10.0 * iqr], [1e-8 * range, 10.0 * range])
    }

    pub fn contains(&self, t: &[f64; 3]) -> bool {
        let r = [self.gamma, self.mu, self.sigma];
        (0..3).all(|j| t[j] >= r[j][0] && t[j] <= r[j][1])
    }

    pub fn clip(&self, t: [f64; 3]) -> [f64; 3] {
        let r = [self.gamma, self.mu, self.sigma];
        [0, 1, 2].map(|j| t[j].clamp(r[j][0], r[j][1]))
    }

    fn ranges(&self) -> [Range; 3] {
        [self.gamma, self.mu, self.sigma]
    }

    /// Image of the box under `x -> a x + b`, `a > 0`.
    pub fn affine(&self, a: f64, b: f64) -> Result<Self> {
        Self::new(self.gamma, [a * self.mu[0] + b, a * self.mu[1] + b], [a * self.sigma[0], a * self.sigma[1]])
    }
}

fn min_max(values: &[f64]) -> (f64, f64) {
    values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
}

/// Linear-interpolation sample quantile of sorted data.
pub(crate) fn empirical_quantile(sorted: &[f64], p: f64) -> f64 {
    let h = p * (sorted.len() - 1) as f64;
    let i = h.floor() as usize;
    let j = (i + 1).min(sorted.len() - 1);
    sorted[i] + (h - i as f64) * (sorted[j] - sorted[i])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitOptions {
    /// First-order tolerance on the max-norm of the mean score.
    pub grad_tol: f64,
    /// Perturbed restarts on top of the moment start.
    pub multistart: usize,
    pub max_newton: usize,
    pub simplex_evals: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { grad_tol: 1e-6, multistart: 5, max_newton: 60, simplex_evals: 3000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    pub theta_hat: Theta,
    /// `sum_i log p(x_i)` at the estimate.
    pub loglik: f64,
    /// Max-norm of the mean score over coordinates not pinned to the box.
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub stderr: Option<[f64; 3]>,
    pub boundary_hit: [bool; 3],
    pub multimodal: bool,
    pub n: usize,
    pub warnings: Vec<String>,
}

impl FitResult {
    pub fn interior(&self) -> bool {
        !self.boundary_hit.iter().any(|&b| b)
    }
}

/// `-(1/n) sum log p_theta(x_i)`; `+inf` if any point is outside the support.
pub fn neg_loglik(theta: &Theta, sample: &Sample) -> f64 {
    -mean_loglik(theta, sample.values())
}

fn mean_loglik(theta: &Theta, xs: &[f64]) -> f64 {
    let mut acc = 0.0;
    for &x in xs {
        let l = gev::log_density(theta, x);
        if l == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        acc += l;
    }
    acc / xs.len() as f64
}

/// Mean log-likelihood and mean score in one sweep.
fn loglik_and_score(theta: &Theta, xs: &[f64]) -> Option<(f64, [f64; 3])> {
    let mut l = 0.0;
    let mut g = [0.0; 3];
    for &x in xs {
        let p = gev::standardize(theta, x);
        let s = score_std(theta, &p)?;
        l += gev::log_density_std(theta, &p);
        g[0] += s.d_gamma;
        g[1] += s.d_mu;
        g[2] += s.d_sigma;
    }
    let n = xs.len() as f64;
    Some((l / n, g.map(|v| v / n)))
}

fn mean_score(theta: &Theta, xs: &[f64]) -> Option<[f64; 3]> {
    loglik_and_score(theta, xs).map(|r| r.1)
}

fn theta_of(v: [f64; 3]) -> Option<Theta> {
    Theta::from_array(v).ok()
}

fn check_sample(xs: &[f64]) -> Result<()> {
    if xs.is_empty() {
        return Err(GevError::EmptySample);
    }
    if let Some(bad) = xs.iter().find(|x| !x.is_finite()) {
        return Err(GevError::DegenerateSample(format!("non-finite value {bad}")));
    }
    if xs.len() < 4 {
        return Err(GevError::DegenerateSample(format!("need at least 4 observations, got {}", xs.len())));
    }
    let (lo, hi) = min_max(xs);
    if lo == hi {
        return Err(GevError::DegenerateSample("all values are equal; the likelihood is unbounded as sigma -> 0".into()));
    }
    Ok(())
}

/// Gumbel moment start clipped into the box.
fn moment_start(xs: &[f64], bx: &ParamBox) -> [f64; 3] {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let sigma = var.sqrt() * 6f64.sqrt() / std::f64::consts::PI;
    let mu = mean - 0.577_215_7 * sigma;
    bx.clip([0.1, mu, sigma])
}

/// A feasible point of the box near `start`, or `None`.
fn feasible_near(start: [f64; 3], xs: &[f64], bx: &ParamBox) -> Option<[f64; 3]> {
    let ok = |t: [f64; 3]| theta_of(t).map_or(false, |th| mean_loglik(&th, xs).is_finite());
    if ok(start) {
        return Some(start);
    }
    let r = bx.ranges();
    // the Gumbel member never has a finite endpoint
    if r[0][0] <= 0.0 && 0.0 <= r[0][1] && ok([0.0, start[1], start[2]]) {
        return Some([0.0, start[1], start[2]]);
    }
    const K: usize = 9;
    let lerp = |rg: Range, i: usize| rg[0] + (rg[1] - rg[0]) * i as f64 / (K - 1) as f64;
    let mut best: Option<([f64; 3], f64)> = None;
    for i in 0..K {
        for j in 0..K {
            for k in 0..K {
                let t = [lerp(r[0], i), lerp(r[1], j), lerp(r[2], k)];
                if let Some(th) = theta_of(t) {
                    let l = mean_loglik(&th, xs);
                    if l.is_finite() && best.map_or(true, |b| l > b.1) {
                        best = Some((t, l));
                    }
                }
            }
        }
    }
    best.map(|b| b.0)
}

struct Polished {
    theta: [f64; 3],
    loglik: f64,
    grad_norm: f64,
    boundary_hit: [bool; 3],
    iterations: usize,
    converged: bool,
}

/// Central differences of the analytic mean score.
fn score_jacobian(t: [f64; 3], xs: &[f64], bx: &ParamBox) -> Option<Matrix3<f64>> {
    let mut h = Matrix3::zeros();
    let r = bx.ranges();
    for j in 0..3 {
        let d = 1e-5 * if j == 0 { 1.0 + t[0].abs() } else { t[2] };
        let mut a = t;
        let mut b = t;
        a[j] += d;
        b[j] -= d;
        // stay on the box for the difference when pinned against a face
        if a[j] > r[j][1] {
            a[j] = t[j];
        }
        if b[j] < r[j][0] {
            b[j] = t[j];
        }
        let ga = mean_score(&theta_of(a)?, xs)?;
        let gb = mean_score(&theta_of(b)?, xs)?;
        for i in 0..3 {
            h[(i, j)] = (ga[i] - gb[i]) / (a[j] - b[j]);
        }
    }
    Some(0.5 * (h + h.transpose()))
}

fn on_face(t: &[f64; 3], bx: &ParamBox) -> [i8; 3] {
    let r = bx.ranges();
    [0, 1, 2].map(|j| {
        if t[j] <= r[j][0] {
            -1
        } else if t[j] >= r[j][1] {
            1
        } else {
            0
        }
    })
}

/// Projected Newton ascent on the mean log-likelihood.
fn polish(start: [f64; 3], xs: &[f64], bx: &ParamBox, opts: &FitOptions) -> Polished {
    let mut t = start;
    let (mut l, mut g) = loglik_and_score(&theta_of(t).unwrap(), xs).unwrap();
    let mut iterations = 0;
    let free_grad = |t: &[f64; 3], g: &[f64; 3]| -> ([bool; 3], f64) {
        let face = on_face(t, bx);
        let pinned = [0, 1, 2].map(|j| face[j] != 0 && g[j] * face[j] as f64 >= 0.0);
        let norm = (0..3).filter(|&j| !pinned[j]).map(|j| g[j].abs()).fold(0.0, f64::max);
        (pinned, norm)
    };
    let (mut pinned, mut gnorm) = free_grad(&t, &g);
    while gnorm >= opts.grad_tol && iterations < opts.max_newton {
        iterations += 1;
        let free: Vec<usize> = (0..3).filter(|&j| !pinned[j]).collect();
        let step = score_jacobian(t, xs, bx).and_then(|h| newton_step(&h, &g, &free, &t));
        let Some(step) = step else { break };
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let cand = bx.clip([0, 1, 2].map(|j| t[j] + alpha * step[j]));
            if let Some((lc, gc)) = theta_of(cand).and_then(|th| loglik_and_score(&th, xs)) {
                if lc >= l {
                    accepted = cand != t;
                    t = cand;
                    l = lc;
                    g = gc;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !accepted {
            break;
        }
        (pinned, gnorm) = free_grad(&t, &g);
    }
    let face = on_face(&t, bx);
    Polished {
        theta: t,
        loglik: l,
        grad_norm: gnorm,
        boundary_hit: [0, 1, 2].map(|j| face[j] != 0),
        iterations,
        converged: gnorm < opts.grad_tol,
    }
}

/// Ascent direction on the free coordinates: Newton when the Hessian is
/// negative definite there, Levenberg-damped otherwise.
fn newton_step(h: &Matrix3<f64>, g: &[f64; 3], free: &[usize], t: &[f64; 3]) -> Option<[f64; 3]> {
    let k = free.len();
    if k == 0 {
        return None;
    }
    let sub = nalgebra::DMatrix::from_fn(k, k, |a, b| -h[(free[a], free[b])]);
    let rhs = nalgebra::DVector::from_fn(k, |a, _| g[free[a]]);
    let scale = sub.diagonal().iter().map(|v| v.abs()).fold(0.0, f64::max).max(1e-300);
    let mut lambda = 0.0;
    for _ in 0..60 {
        let m = &sub + nalgebra::DMatrix::identity(k, k) * lambda;
        if let Some(ch) = m.cholesky() {
            let d = ch.solve(&rhs);
            let mut step = [0.0; 3];
            for (a, &j) in free.iter().enumerate() {
                step[j] = d[a];
            }
            // keep sigma positive on the full step
            if step[2] < -0.9 * t[2] {
                let s = 0.9 * t[2] / -step[2];
                step = step.map(|v| v * s);
            }
            return Some(step);
        }
        lambda = if lambda == 0.0 { 1e-8 * scale } else { lambda * 10.0 };
    }
    None
}

fn fit_from(start: [f64; 3], xs: &[f64], bx: &ParamBox, opts: &FitOptions) -> Polished {
    let s0 = start[2];
    let obj = |v: &[f64; 3]| {
        let t = [v[0], v[1], v[2].exp()];
        if !bx.contains(&t) {
            return f64::INFINITY;
        }
        match theta_of(t) {
            Some(th) => -mean_loglik(&th, xs),
            None => f64::INFINITY,
        }
    };
    let simplex = optim::nelder_mead(
        obj,
        [start[0], start[1], s0.ln()],
        [0.1, 0.1 * s0, 0.1],
        &SimplexOptions { f_tol: 1e-9, x_tol: 1e-6, max_evals: opts.simplex_evals },
    );
    let from = if simplex.f.is_finite() { bx.clip([simplex.x[0], simplex.x[1], simplex.x[2].exp()]) } else { start };
    let mut p = polish(from, xs, bx, opts);
    p.iterations += simplex.iterations;
    p
}

fn start_points(base: [f64; 3], bx: &ParamBox, k: usize) -> Vec<[f64; 3]> {
    let [g, m, s] = base;
    let perturbed = [[g - 0.3, m, s], [g + 0.4, m, s], [g, m - 0.5 * s, s], [g, m + 0.5 * s, s], [g, m, 1.6 * s]];
    let mut v = vec![base];
    v.extend(perturbed.iter().take(k).map(|p| bx.clip(*p)));
    v
}

fn lex_less(a: &[f64; 3], b: &[f64; 3]) -> bool {
    for j in 0..3 {
        match a[j].total_cmp(&b[j]) {
            std::cmp::Ordering::Less => return true,
            std::cmp::Ordering::Greater => return false,
            _ => {}
        }
    }
    false
}

/// Maximum likelihood estimate over `bx`.
pub fn fit(sample: &Sample, bx: &ParamBox, opts: &FitOptions) -> Result<FitResult> {
    let xs = sample.values();
    check_sample(xs)?;
    bx.validate()?;
    let mut warnings = Vec::new();
    if xs.len() < 10 {
        warnings.push(format!("small sample: n = {} < 10", xs.len()));
    }
    let base = feasible_near(moment_start(xs, bx), xs, bx)
        .ok_or_else(|| GevError::Infeasible("no parameter in the box puts every observation inside the support".into()))?;
    let mut runs: Vec<Polished> = Vec::new();
    let feasible = |t: &[f64; 3]| theta_of(*t).map_or(false, |th| mean_loglik(&th, xs).is_finite());
    for s in start_points(base, bx, opts.multistart) {
        if feasible(&s) {
            runs.push(fit_from(s, xs, bx, opts));
        }
    }
    let mut best = 0;
    for (i, r) in runs.iter().enumerate().skip(1) {
        let b = &runs[best];
        if r.loglik > b.loglik || (r.loglik == b.loglik && lex_less(&r.theta, &b.theta)) {
            best = i;
        }
    }
    let multimodal = runs.iter().enumerate().any(|(i, a)| {
        runs[i + 1..].iter().any(|b| {
            let far = (0..3).map(|j| (a.theta[j] - b.theta[j]).abs()).fold(0.0, f64::max) > 1e-4;
            far && (a.loglik - b.loglik).abs() <= 1e-8
        })
    });
    if multimodal {
        warnings.push("distinct starts reached separated maxima with equal log-likelihood".into());
    }
    let iterations = runs.iter().map(|r| r.iterations).sum();
    let r = runs.swap_remove(best);
    let theta_hat = theta_of(r.theta).expect("polished iterate has positive scale");
    if !r.converged {
        warnings.push(format!("first-order tolerance not reached: |mean score| = {:.3e}", r.grad_norm));
    }
    let mut result = FitResult {
        theta_hat,
        loglik: r.loglik * xs.len() as f64,
        grad_norm: r.grad_norm,
        iterations,
        converged: r.converged,
        stderr: None,
        boundary_hit: r.boundary_hit,
        multimodal,
        n: xs.len(),
        warnings,
    };
    if result.boundary_hit.iter().any(|&b| b) {
        result.warnings.push(format!("estimate on the box boundary (gamma, mu, sigma): {:?}", result.boundary_hit));
    }
    match standard_errors(&result, xs.len()) {
        Ok(se) => result.stderr = Some(se),
        Err(e) => result.warnings.push(format!("no standard errors: {e}")),
    }
    Ok(result)
}

/// `sqrt(diag(I(theta_hat)^-1) / n)`.
pub fn standard_errors(fit: &FitResult, n: usize) -> Result<[f64; 3]> {
    if !fit.converged {
        return Err(GevError::NoStandardErrors("fit did not converge".into()));
    }
    if fit.boundary_hit.iter().any(|&b| b) {
        return Err(GevError::NoStandardErrors("estimate lies on the box boundary".into()));
    }
    if fit.theta_hat.gamma() <= -0.5 + NEAR_SINGULAR_BAND {
        return Err(GevError::NoStandardErrors(format!(
            "shape {} is at or too close to -1/2 for a usable information matrix",
            fit.theta_hat.gamma()
        )));
    }
    if n == 0 {
        return Err(GevError::EmptySample);
    }
    let inv = fisher::fisher_information(&fit.theta_hat)?.inverse()?;
    let se = [0, 1, 2].map(|j| (inv[(j, j)] / n as f64).sqrt());
    if se.iter().all(|v| v.is_finite() && *v > 0.0) {
        Ok(se)
    } else {
        Err(GevError::NoStandardErrors("information inverse has a non-positive diagonal".into()))
    }
}

/// `|| sqrt(n)(theta_hat - theta0) - I0^-1 n^(-1/2) sum score(theta0, x_i) ||_inf`.
pub fn linearization_residual(sample: &Sample, theta0: &Theta, fit: &FitResult) -> Result<f64> {
    let inv = fisher::fisher_information(theta0)?.inverse()?;
    linearization_residual_with(sample, theta0, fit, &inv)
}

/// As [`linearization_residual`] with a precomputed `I0^-1`.
pub fn linearization_residual_with(sample: &Sample, theta0: &Theta, fit: &FitResult, info_inv: &Matrix3<f64>) -> Result<f64> {
    let xs = sample.values();
    if xs.is_empty() {
        return Err(GevError::EmptySample);
    }
    let mut sum = Vector3::zeros();
    for &x in xs {
        sum += Vector3::from(score::score(theta0, x)?.to_array());
    }
    let rn = (xs.len() as f64).sqrt();
    let lin = info_inv * sum / rn;
    let est = fit.theta_hat.to_array();
    let t0 = theta0.to_array();
    Ok((0..3).map(|j| (rn * (est[j] - t0[j]) - lin[j]).abs()).fold(0.0, f64::max))
}
