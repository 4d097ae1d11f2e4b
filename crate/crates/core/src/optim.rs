//! Derivative-free Nelder–Mead simplex search in three dimensions.
//!
//! The objective may return `+inf` to reject a point (outside the
//! parameter box or outside the support); such vertices simply lose every
//! comparison.

/// Stopping rules.
#[derive(Debug, Clone, Copy)]
pub struct SimplexOptions {
    /// Spread of objective values across the simplex.
    pub f_tol: f64,
    /// Max-norm spread of the vertices.
    pub x_tol: f64,
    pub max_evals: usize,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self { f_tol: 1e-10, x_tol: 1e-7, max_evals: 2000 }
    }
}

#[derive(Debug, Clone)]
pub struct SimplexResult {
    pub x: [f64; 3],
    pub f: f64,
    pub evals: usize,
    pub iterations: usize,
    pub converged: bool,
    /// Best objective value after each iteration; never increases.
    pub best_history: Vec<f64>,
}

fn add(a: &[f64; 3], b: &[f64; 3], s: f64) -> [f64; 3] {
    [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1]), a[2] + s * (b[2] - a[2])]
}

/// Minimize `f` from `x0` with initial edge lengths `step`.
pub fn nelder_mead<F: FnMut(&[f64; 3]) -> f64>(
    mut f: F,
    x0: [f64; 3],
    step: [f64; 3],
    opts: &SimplexOptions,
) -> SimplexResult {
    let mut evals = 0;
    let mut eval = |x: &[f64; 3], evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let mut pts: Vec<([f64; 3], f64)> = Vec::with_capacity(4);
    let f0 = eval(&x0, &mut evals);
    pts.push((x0, f0));
    for j in 0..3 {
        let mut x = x0;
        x[j] += step[j];
        let mut v = eval(&x, &mut evals);
        if !v.is_finite() {
            // try the other side before giving up on this edge
            x[j] = x0[j] - step[j];
            v = eval(&x, &mut evals);
        }
        pts.push((x, v));
    }
    let mut best_history = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    loop {
        pts.sort_by(|a, b| a.1.total_cmp(&b.1));
        best_history.push(pts[0].1);
        let f_spread = pts[3].1 - pts[0].1;
        let x_spread = pts[1..]
            .iter()
            .map(|p| (0..3).map(|j| (p.0[j] - pts[0].0[j]).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if pts[0].1.is_finite() && f_spread <= opts.f_tol * (1.0 + pts[0].1.abs()) && x_spread <= opts.x_tol {
            converged = true;
            break;
        }
        if evals >= opts.max_evals {
            break;
        }
        iterations += 1;
        let mut c = [0.0; 3];
        for p in &pts[..3] {
            for j in 0..3 {
                c[j] += p.0[j] / 3.0;
            }
        }
        let worst = pts[3];
        let xr = add(&c, &worst.0, -1.0);
        let fr = eval(&xr, &mut evals);
        if fr < pts[0].1 {
            let xe = add(&c, &worst.0, -2.0);
            let fe = eval(&xe, &mut evals);
            pts[3] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < pts[2].1 {
            pts[3] = (xr, fr);
            continue;
        }
        let (xc, fc) = if fr < worst.1 {
            let x = add(&c, &worst.0, -0.5);
            (x, eval(&x, &mut evals))
        } else {
            let x = add(&c, &worst.0, 0.5);
            (x, eval(&x, &mut evals))
        };
        if fc < worst.1.min(fr) {
            pts[3] = (xc, fc);
            continue;
        }
        // shrink toward the best vertex
        let best = pts[0].0;
        for p in pts.iter_mut().skip(1) {
            let x = add(&best, &p.0, 0.5);
            *p = (x, eval(&x, &mut evals));
        }
    }
    SimplexResult { x: pts[0].0, f: pts[0].1, evals, iterations, converged, best_history }
}
