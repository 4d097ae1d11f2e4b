//! Parameter-dependent supports and their shrinkage under perturbation.
//!
//! Neighbourhoods of a parameter are max-norm cubes, so the extreme support
//! endpoints over a neighbourhood are attained at its corners.

use serde::Serialize;

use crate::error::{GevError, Result};
use crate::gev;
use crate::theta::Theta;

/// Open interval `(lower, upper)` with possibly infinite ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SupportInterval {
    pub lower: f64,
    pub upper: f64,
}

impl SupportInterval {
    pub fn contains(&self, x: f64) -> bool {
        x > self.lower && x < self.upper
    }
}

/// `{x : sigma + gamma (x - mu) > 0}`.
pub fn support_of(theta: &Theta) -> SupportInterval {
    match theta.endpoint() {
        None => SupportInterval { lower: f64::NEG_INFINITY, upper: f64::INFINITY },
        Some(w) if theta.gamma() > 0.0 => SupportInterval { lower: w, upper: f64::INFINITY },
        Some(w) => SupportInterval { lower: f64::NEG_INFINITY, upper: w },
    }
}

/// Intersection of the supports over the max-norm ball of radius `epsilon`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CommonSupport {
    pub theta0: Theta,
    pub epsilon: f64,
    pub interval: SupportInterval,
}

fn check_epsilon(theta0: &Theta, epsilon: f64) -> Result<()> {
    let too_large = |constraint: String| Err(GevError::EpsilonTooLarge { epsilon, constraint });
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return too_large("epsilon must be positive and finite".into());
    }
    if epsilon >= theta0.sigma() {
        return too_large(format!("need sigma0 - epsilon > 0 (sigma0 = {})", theta0.sigma()));
    }
    if theta0.gamma() != 0.0 && epsilon >= theta0.gamma().abs() {
        return too_large(format!(
            "need epsilon < |gamma0| = {} so the shape keeps its sign",
            theta0.gamma().abs()
        ));
    }
    Ok(())
}

/// Lower envelope for `gamma0 > 0`: `mu0 + e - (sigma0 - e) / (gamma0 + e)`.
fn lower_positive(t: &Theta, e: f64) -> f64 {
    t.mu() + e - (t.sigma() - e) / (t.gamma() + e)
}

/// Upper envelope for `gamma0 < 0`: the endpoint at the corner `theta0 - e (1, 1, 1)`.
fn upper_negative(t: &Theta, e: f64) -> f64 {
    t.mu() - e + (t.sigma() - e) / (t.gamma() - e).abs()
}

/// Gumbel case, lower envelope over the positive-shape half of the ball.
fn lower_gumbel(t: &Theta, e: f64) -> f64 {
    t.mu() + e - (t.sigma() - e) / e
}

/// Gumbel case, upper envelope over the negative-shape half of the ball.
fn upper_gumbel(t: &Theta, e: f64) -> f64 {
    t.mu() - e + (t.sigma() - e) / e
}

pub fn common_support(theta0: &Theta, epsilon: f64) -> Result<CommonSupport> {
    check_epsilon(theta0, epsilon)?;
    let g = theta0.gamma();
    let interval = if g > 0.0 {
        SupportInterval { lower: lower_positive(theta0, epsilon), upper: f64::INFINITY }
    } else if g < 0.0 {
        SupportInterval { lower: f64::NEG_INFINITY, upper: upper_negative(theta0, epsilon) }
    } else {
        SupportInterval { lower: lower_gumbel(theta0, epsilon), upper: upper_gumbel(theta0, epsilon) }
    };
    Ok(CommonSupport { theta0: *theta0, epsilon, interval })
}

/// `P_theta0` of the complement of the common support.
pub fn mass_outside(theta0: &Theta, epsilon: f64) -> Result<f64> {
    let cs = common_support(theta0, epsilon)?;
    let below = if cs.interval.lower.is_finite() { gev::cdf(theta0, cs.interval.lower) } else { 0.0 };
    let above = if cs.interval.upper.is_finite() { gev::sf(theta0, cs.interval.upper) } else { 0.0 };
    Ok(below + above)
}

/// Mass that `theta0 + (0, t, 0)` puts beyond the upper endpoint of `theta0`:
/// `1 - exp(-(|gamma0| t / sigma0)^(1/|gamma0|))`.
pub fn endpoint_shift_mass(theta0: &Theta, t: f64) -> Result<f64> {
    let g = theta0.gamma();
    if g >= 0.0 {
        return Err(GevError::ShapeOutOfRange { gamma: g, range: "(-inf, 0)" });
    }
    if !(t > 0.0) {
        return Err(GevError::InvalidConfig { field: "t".into(), reason: "must be positive".into() });
    }
    let a = g.abs();
    let y = (a * t / theta0.sigma()).powf(1.0 / a);
    Ok(-(-y).exp_m1())
}

/// Endpoint envelope `h(t)` of the common support as a function of the radius.
///
/// Returns the finite endpoint that moves (upper for `gamma0 < 0`, lower for
/// `gamma0 > 0`); `None` at `gamma0 = 0`.
pub fn moving_endpoint(theta0: &Theta, t: f64) -> Result<Option<f64>> {
    let cs = common_support(theta0, t)?;
    Ok(match theta0.gamma().partial_cmp(&0.0) {
        Some(std::cmp::Ordering::Greater) => Some(cs.interval.lower),
        Some(std::cmp::Ordering::Less) => Some(cs.interval.upper),
        _ => None,
    })
}

/// Constants `0 < b < c` bracketing the endpoint shift on `(0, t0]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnvelopeSandwich {
    pub t0: f64,
    pub b: f64,
    pub c: f64,
}

/// Fit the sandwich `b t sigma0/|gamma0| <= |h(t) - omega0| <= c t sigma0/|gamma0|`
/// on a grid of `(0, t0]`, widening the observed range by 10% on each side.
pub fn fit_envelope_sandwich(theta0: &Theta, t0: f64, grid: usize) -> Result<EnvelopeSandwich> {
    let omega0 = theta0
        .endpoint()
        .ok_or(GevError::ShapeOutOfRange { gamma: 0.0, range: "gamma0 != 0" })?;
    let scale = theta0.sigma() / theta0.gamma().abs();
    let mut lo = f64::INFINITY;
    let mut hi: f64 = 0.0;
    for i in 1..=grid {
        let t = t0 * i as f64 / grid as f64;
        let h = moving_endpoint(theta0, t)?.expect("nonzero shape");
        let ratio = (h - omega0).abs() / (t * scale);
        lo = lo.min(ratio);
        hi = hi.max(ratio);
    }
    Ok(EnvelopeSandwich { t0, b: 0.9 * lo, c: 1.1 * hi })
}
