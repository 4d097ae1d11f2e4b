//! Differentiability in quadratic mean, checked numerically.
//!
//! The remainder
//! `R(h) = int (sqrt p1 - sqrt p0 - h.score0 sqrt p0 / 2)^2 dx`, with
//! `p1 = p_{theta0 + h}` and the score taken as zero off `S_theta0`, is
//! integrated over the union of both supports. Points are located relative
//! to an anchor (a panel end, usually a finite support endpoint) so that
//! `1 + gamma z` keeps full relative accuracy where it vanishes, and panels
//! ending at a finite endpoint are integrated in `w` with `d = L w^k`, which
//! absorbs the algebraic singularity of the score there.

use serde::Serialize;

use crate::error::{GevError, Result};
use crate::gev::{self, StdPoint};
use crate::quad::{self, QuadConfig};
use crate::score::score_std;
use crate::support::endpoint_shift_mass;
use crate::theta::Theta;

/// Slope margin around 2 for the verdict.
pub const SLOPE_MARGIN: f64 = 0.1;
/// Number of finest steps used in the slope fit.
pub const SLOPE_POINTS: usize = 6;

const LOWER_TAIL_P: f64 = 1e-30;
const UPPER_TAIL_Q: f64 = 1e-16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    DqmHolds,
    DqmFails,
    Inconclusive,
}

/// Which sequence the slope was fitted to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SlopeSource {
    Remainder,
    /// `P_{theta0 + t h}(S_{theta0 + t h} \ S_theta0)`, a lower bound on the
    /// remainder; used when the remainder itself is infinite.
    SupportDifference,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DirectionReport {
    pub direction: [f64; 3],
    pub steps: Vec<f64>,
    /// `None` where the remainder is infinite.
    pub remainders: Vec<Option<f64>>,
    pub support_difference: Vec<f64>,
    pub slope: Option<f64>,
    pub slope_source: Option<SlopeSource>,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DqmReport {
    pub theta0: Theta,
    pub margin: f64,
    pub directions: Vec<DirectionReport>,
    pub verdict: Verdict,
}

/// `grad omega` for the finite endpoint `omega = mu - sigma / gamma`.
pub fn endpoint_gradient(theta: &Theta) -> Option<[f64; 3]> {
    let (g, s) = (theta.gamma(), theta.sigma());
    (g != 0.0).then(|| [s / (g * g), 1.0, -1.0 / g])
}

/// The remainder is infinite when the score is not square integrable
/// (`gamma0 <= -1/2`) and `h` moves the endpoint to first order; the
/// leading `1 / (1 + gamma z)` term of `h . score` is proportional to
/// `h . grad omega`.
fn remainder_diverges(theta0: &Theta, h: &[f64; 3]) -> bool {
    if theta0.gamma() > -0.5 {
        return false;
    }
    let grad = endpoint_gradient(theta0).expect("gamma0 <= -1/2 is nonzero");
    let dot: f64 = (0..3).map(|j| grad[j] * h[j]).sum();
    let size: f64 = (0..3).map(|j| (grad[j] * h[j]).abs()).sum();
    dot.abs() > 1e-12 * size && theta0.gamma() != -1.0
}

struct Located {
    theta: Theta,
    omega: Option<f64>,
}

impl Located {
    fn new(theta: Theta) -> Self {
        Self { theta, omega: theta.endpoint() }
    }

    /// Standardized point at `x = anchor + off`.
    fn at(&self, anchor: f64, off: f64) -> StdPoint {
        let (g, m, s) = (self.theta.gamma(), self.theta.mu(), self.theta.sigma());
        let z = ((anchor - m) + off) / s;
        let opgz = match self.omega {
            Some(w) if (g * z).abs() >= 0.5 => g * ((anchor - w) + off) / s,
            _ => 1.0 + g * z,
        };
        gev::std_point_parts(g, z, opgz)
    }
}

fn integrand(t0: &Located, t1: &Located, h: &[f64; 3], anchor: f64, off: f64) -> f64 {
    let p0 = t0.at(anchor, off);
    let p1 = t1.at(anchor, off);
    let hs = |p: &StdPoint| {
        let s = score_std(&t0.theta, p).expect("in support").to_array();
        h[0] * s[0] + h[1] * s[1] + h[2] * s[2]
    };
    match (p0.in_support(), p1.in_support()) {
        (true, true) => {
            let l0 = gev::log_density_std(&t0.theta, &p0);
            let l1 = gev::log_density_std(&t1.theta, &p1);
            let s0 = (0.5 * l0).exp();
            let half = 0.5 * (l1 - l0);
            // s1 - s0 without cancellation while the densities are close
            let ds = if half.abs() < 1.0 { s0 * half.exp_m1() } else { (0.5 * l1).exp() - s0 };
            let d = ds - 0.5 * hs(&p0) * s0;
            d * d
        }
        (false, true) => gev::log_density_std(&t1.theta, &p1).exp(),
        (true, false) => {
            let d = (0.5 * gev::log_density_std(&t0.theta, &p0)).exp() * (1.0 + 0.5 * hs(&p0));
            d * d
        }
        (false, false) => 0.0,
    }
}

/// Power for the endpoint map `d = L w^k`. The squared score times the
/// density behaves like `d^(1/|gamma| - 3)` at the endpoint.
fn endpoint_power(gamma: f64) -> i32 {
    let e1 = 1.0 / gamma.abs() - 2.0;
    if e1 <= 0.0 {
        return 16;
    }
    ((3.0 / e1).ceil() as i32).clamp(1, 16)
}

fn breakpoints(t0: &Located, t1: &Located) -> Vec<f64> {
    let lo = [t0, t1]
        .iter()
        .map(|t| gev::quantile(&t.theta, LOWER_TAIL_P).expect("valid probability"))
        .fold(f64::INFINITY, f64::min);
    let hi = [t0, t1]
        .iter()
        .map(|t| match t.omega {
            Some(w) if t.theta.gamma() < 0.0 => w,
            _ => gev::upper_quantile(&t.theta, UPPER_TAIL_Q),
        })
        .fold(f64::NEG_INFINITY, f64::max);
    let mut pts = vec![lo, hi];
    for p in [1e-20, 1e-10, 1e-5, 1e-3, 0.05, 0.3, 0.6, 0.9, 0.99] {
        pts.push(gev::quantile(&t0.theta, p).expect("valid probability"));
    }
    if t0.theta.gamma() >= 0.0 {
        for e in [3, 5, 7, 9, 11, 13, 15] {
            pts.push(gev::upper_quantile(&t0.theta, 10f64.powi(-e)));
        }
    }
    pts.extend([t0.omega, t1.omega].into_iter().flatten());
    pts.retain(|x| x.is_finite() && *x >= lo && *x <= hi);
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}

fn upper_endpoint_power(x: f64, ts: &[&Located]) -> Option<i32> {
    ts.iter()
        .filter(|t| t.theta.gamma() < 0.0 && t.omega == Some(x))
        .map(|t| endpoint_power(t.theta.gamma()))
        .max()
}

/// Remainder with the quadrature diagnostics.
pub fn dqm_remainder_detailed(theta0: &Theta, h: [f64; 3]) -> Result<quad::QuadResult<1>> {
    let theta1 = theta0.shifted(h)?;
    let zero = quad::QuadResult { value: [0.0], abs_error: [0.0], evaluations: 0, converged: true };
    if h == [0.0; 3] {
        return Ok(zero);
    }
    if remainder_diverges(theta0, &h) {
        return Ok(quad::QuadResult { value: [f64::INFINITY], ..zero });
    }
    let t0 = Located::new(*theta0);
    let t1 = Located::new(theta1);
    let pts = breakpoints(&t0, &t1);
    let mut fns: Vec<Box<dyn Fn(f64) -> [f64; 1] + '_>> = Vec::new();
    for win in pts.windows(2) {
        let (a, b) = (win[0], win[1]);
        let len = b - a;
        let (t0r, t1r, hr) = (&t0, &t1, &h);
        if let Some(k) = upper_endpoint_power(b, &[&t0, &t1]) {
            fns.push(Box::new(move |w: f64| {
                let wk1 = w.powi(k - 1);
                let off = -len * wk1 * w;
                [integrand(t0r, t1r, hr, b, off) * len * k as f64 * wk1]
            }));
        } else {
            fns.push(Box::new(move |w: f64| [integrand(t0r, t1r, hr, a, len * w) * len]));
        }
    }
    let panels: Vec<(&dyn Fn(f64) -> [f64; 1], f64, f64)> =
        fns.iter().map(|f| (f.as_ref() as &dyn Fn(f64) -> [f64; 1], 0.0, 1.0)).collect();
    let cfg = QuadConfig { abs_tol: 1e-300, rel_tol: 1e-10, max_intervals: 6000 };
    Ok(quad::integrate_panels(&panels, &cfg))
}

/// `R(h)`; `+inf` when the score of `theta0` is not square integrable
/// along `h`.
pub fn dqm_remainder(theta0: &Theta, h: [f64; 3]) -> Result<f64> {
    Ok(dqm_remainder_detailed(theta0, h)?.value[0].max(0.0))
}

/// `P_{theta0 + h}(S_{theta0 + h} \ S_theta0)`, in closed form.
pub fn support_difference_mass(theta0: &Theta, h: [f64; 3]) -> Result<f64> {
    let theta1 = theta0.shifted(h)?;
    let g0 = theta0.gamma();
    let Some(w0) = theta0.endpoint() else { return Ok(0.0) };
    // the part of S1 beyond the endpoint of theta0, with u1 taken at w0
    // relative to the endpoint of theta1
    let Some(u) = Located::new(theta1).at(w0, 0.0).u() else {
        let below_lower = theta1.gamma() > 0.0;
        return Ok(if (g0 < 0.0) == below_lower { 1.0 } else { 0.0 });
    };
    Ok(if g0 < 0.0 { -(-u).exp_m1() } else { (-u).exp() })
}

/// Least-squares slope of `log y` against `log t`.
pub fn log_log_slope(t: &[f64], y: &[f64]) -> Option<f64> {
    if t.len() < 2 || t.len() != y.len() || y.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
        return None;
    }
    let lx: Vec<f64> = t.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    Some(sxy / sxx)
}

fn verdict_of(slope: Option<f64>, margin: f64) -> Verdict {
    match slope {
        Some(s) if s > 2.0 + margin => Verdict::DqmHolds,
        Some(s) if s <= 2.0 - margin => Verdict::DqmFails,
        _ => Verdict::Inconclusive,
    }
}

/// Remainder-rate report along `t = 2^-k`, `k` in `k_range`, for each direction.
pub fn dqm_certify(theta0: &Theta, directions: &[[f64; 3]], k_range: (i32, i32)) -> Result<DqmReport> {
    let (k_min, k_max) = k_range;
    if k_max > 14 || k_min >= k_max || k_min < 0 {
        return Err(GevError::InvalidConfig {
            field: "k_range".into(),
            reason: format!("need 0 <= k_min < k_max <= 14, got [{k_min}, {k_max}]"),
        });
    }
    if directions.is_empty() {
        return Err(GevError::InvalidConfig { field: "directions".into(), reason: "no directions given".into() });
    }
    let mut reports = Vec::new();
    for h in directions {
        let norm = h.iter().map(|v| v.abs()).fold(0.0, f64::max);
        if (norm - 1.0).abs() > 1e-12 {
            return Err(GevError::InvalidConfig {
                field: "directions".into(),
                reason: format!("{h:?} does not have unit max-norm"),
            });
        }
        let steps: Vec<f64> = (k_min..=k_max).map(|k| 2f64.powi(-k)).collect();
        let mut remainders = Vec::new();
        let mut diff = Vec::new();
        for &t in &steps {
            let th = h.map(|v| v * t);
            let r = dqm_remainder(theta0, th)?;
            remainders.push(r.is_finite().then_some(r));
            diff.push(support_difference_mass(theta0, th)?);
        }
        let tail = steps.len().saturating_sub(SLOPE_POINTS);
        let fine_t = &steps[tail..];
        let fitted: Option<Vec<f64>> = remainders[tail..].iter().cloned().collect();
        let (slope, source) = match fitted {
            Some(r) => (log_log_slope(fine_t, &r), Some(SlopeSource::Remainder)),
            None => (log_log_slope(fine_t, &diff[tail..]), Some(SlopeSource::SupportDifference)),
        };
        let source = slope.and(source);
        reports.push(DirectionReport {
            direction: *h,
            steps,
            remainders,
            support_difference: diff,
            slope,
            slope_source: source,
            verdict: verdict_of(slope, SLOPE_MARGIN),
        });
    }
    let verdict = if reports.iter().any(|r| r.verdict == Verdict::DqmFails) {
        Verdict::DqmFails
    } else if reports.iter().all(|r| r.verdict == Verdict::DqmHolds) {
        Verdict::DqmHolds
    } else {
        Verdict::Inconclusive
    };
    Ok(DqmReport { theta0: *theta0, margin: SLOPE_MARGIN, directions: reports, verdict })
}

/// The three coordinate directions.
pub const COORDINATE_DIRECTIONS: [[f64; 3]; 3] = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShrinkRate {
    pub steps: Vec<f64>,
    /// `u^-2 P_theta0[omega0 - u, omega0)` at each step.
    pub ratios: Vec<f64>,
    pub sup: f64,
}

/// Mass of the last `u` below the finite endpoint, relative to `u^2`,
/// along `u = 2^-k`, `k = 4..14`.
pub fn shrink_rate_check(theta0: &Theta) -> Result<ShrinkRate> {
    let g = theta0.gamma();
    if !(g > -0.5 && g < 0.0) {
        return Err(GevError::ShapeOutOfRange { gamma: g, range: "(-1/2, 0)" });
    }
    let steps: Vec<f64> = (4..=14).map(|k| 2f64.powi(-k)).collect();
    let ratios = steps
        .iter()
        .map(|&u| Ok(endpoint_shift_mass(theta0, u)? / (u * u)))
        .collect::<Result<Vec<f64>>>()?;
    let sup = ratios.iter().cloned().fold(0.0, f64::max);
    Ok(ShrinkRate { steps, ratios, sup })
}
