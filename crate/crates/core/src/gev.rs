//! The three-parameter GEV family.
//!
//! Everything is routed through the standardized coordinates
//! `z = (x - mu) / sigma` and `u = u_gamma(z)`, the latter being
//! `(1 + gamma z)^(-1/gamma)` for `gamma != 0` and `exp(-z)` at `gamma = 0`.
//! Under `P_theta`, `u_gamma(Z)` is unit exponential.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Exp1};

use crate::error::{GevError, Result};
use crate::support::{support_of, SupportInterval};
use crate::theta::{Origin, Sample, Theta};

/// Below this `|gamma z|` the log of `u` is taken from its power series.
const SERIES_CUTOFF: f64 = 1e-5;

/// Standardized coordinates of one observation under one parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StdPoint {
    pub z: f64,
    pub one_plus_gamma_z: f64,
    tail: Option<(f64, f64)>,
}

impl StdPoint {
    pub fn in_support(&self) -> bool {
        self.tail.is_some()
    }

    /// `u_gamma(z)`; `None` off the support.
    pub fn u(&self) -> Option<f64> {
        self.tail.map(|t| t.0)
    }

    pub fn log_u(&self) -> Option<f64> {
        self.tail.map(|t| t.1)
    }

    pub(crate) fn parts(&self) -> Option<(f64, f64)> {
        self.tail
    }
}

/// `log u_gamma(z) = -log(1 + gamma z) / gamma`, given an accurate `1 + gamma z`.
pub(crate) fn log_u_parts(gamma: f64, z: f64, one_plus_gamma_z: f64) -> Option<f64> {
    if gamma == 0.0 {
        return Some(-z);
    }
    if !(one_plus_gamma_z > 0.0) {
        return None;
    }
    let v = gamma * z;
    let log_u = if v.abs() < SERIES_CUTOFF {
        // -z + gamma z^2/2 - gamma^2 z^3/3 + gamma^3 z^4/4
        -z * (1.0 - v * (0.5 - v * (1.0 / 3.0 - v * 0.25)))
    } else if v.abs() < 0.5 {
        -v.ln_1p() / gamma
    } else {
        -one_plus_gamma_z.ln() / gamma
    };
    Some(log_u)
}

pub(crate) fn std_point_parts(gamma: f64, z: f64, one_plus_gamma_z: f64) -> StdPoint {
    let tail = log_u_parts(gamma, z, one_plus_gamma_z).map(|log_u| (log_u.exp(), log_u));
    StdPoint { z, one_plus_gamma_z, tail }
}

/// The transform `u_gamma(z)` with out-of-support flagging.
pub fn u_gamma(gamma: f64, z: f64) -> StdPoint {
    std_point_parts(gamma, z, 1.0 + gamma * z)
}

/// Standardize `x` under `theta`.
pub fn standardize(theta: &Theta, x: f64) -> StdPoint {
    u_gamma(theta.gamma(), (x - theta.mu()) / theta.sigma())
}

/// `log p_theta` given the standardized point; `-inf` off the support.
pub(crate) fn log_density_std(theta: &Theta, p: &StdPoint) -> f64 {
    match p.parts() {
        Some((u, log_u)) => -theta.sigma().ln() - u + (theta.gamma() + 1.0) * log_u,
        None => f64::NEG_INFINITY,
    }
}

/// Density `sigma^-1 e^-u u^(gamma+1)` on the support, zero elsewhere.
pub fn pdf(theta: &Theta, x: f64) -> f64 {
    match standardize(theta, x).parts() {
        Some((u, log_u)) => (-u + (theta.gamma() + 1.0) * log_u).exp() / theta.sigma(),
        None => 0.0,
    }
}

/// Log-density; `-inf` off the (open) support.
pub fn log_density(theta: &Theta, x: f64) -> f64 {
    log_density_std(theta, &standardize(theta, x))
}

/// Distribution function `exp(-u)`.
pub fn cdf(theta: &Theta, x: f64) -> f64 {
    match standardize(theta, x).u() {
        Some(u) => (-u).exp(),
        // below the left endpoint when gamma > 0, above the right one when gamma < 0
        None => {
            if theta.gamma() > 0.0 {
                0.0
            } else {
                1.0
            }
        }
    }
}

/// Upper-tail probability `1 - cdf`, without cancellation.
pub fn sf(theta: &Theta, x: f64) -> f64 {
    match standardize(theta, x).u() {
        Some(u) => -(-u).exp_m1(),
        None => {
            if theta.gamma() > 0.0 {
                1.0
            } else {
                0.0
            }
        }
    }
}

/// `(e^(-gamma t) - 1) / gamma`, i.e. the `z` with `log u_gamma(z) = t`.
#[inline]
pub(crate) fn z_from_log_u(gamma: f64, log_u: f64) -> f64 {
    if gamma == 0.0 {
        -log_u
    } else {
        (-gamma * log_u).exp_m1() / gamma
    }
}

pub fn quantile(theta: &Theta, p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(GevError::InvalidProbability(p));
    }
    let log_u = (-p.ln()).ln();
    Ok(theta.mu() + theta.sigma() * z_from_log_u(theta.gamma(), log_u))
}

/// Quantile of the upper tail: the `x` with `sf(x) = q`.
pub(crate) fn upper_quantile(theta: &Theta, q: f64) -> f64 {
    let log_u = (-(-q).ln_1p()).ln();
    theta.mu() + theta.sigma() * z_from_log_u(theta.gamma(), log_u)
}

/// Map a unit-exponential draw to an observation.
pub fn from_exponential(theta: &Theta, e: f64) -> f64 {
    theta.mu() + theta.sigma() * z_from_log_u(theta.gamma(), e.ln())
}

/// Draw `n` observations, reproducible from `seed`.
pub fn sample(theta: &Theta, n: usize, seed: u64) -> Result<Sample> {
    sample_stream(theta, n, seed, 0)
}

/// Like [`sample`], on an independent ChaCha stream.
pub fn sample_stream(theta: &Theta, n: usize, seed: u64, stream: u64) -> Result<Sample> {
    if n == 0 {
        return Err(GevError::EmptySample);
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let mut values = Vec::with_capacity(n);
    while values.len() < n {
        let e: f64 = Exp1.sample(&mut rng);
        let x = from_exponential(theta, e);
        // endpoint rounding is astronomically rare but must never leak out
        if x.is_finite() && standardize(theta, x).in_support() {
            values.push(x);
        }
    }
    Ok(Sample::new(values, Origin::Seeded { theta: *theta, seed, stream }))
}

pub fn support(theta: &Theta) -> SupportInterval {
    support_of(theta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::E;

    fn th(g: f64, m: f64, s: f64) -> Theta {
        Theta::new(g, m, s).unwrap()
    }

    #[test]
    fn u_gamma_examples() {
        assert_relative_eq!(u_gamma(0.0, 1.0).u().unwrap(), 1.0 / E, max_relative = 1e-15);
        assert_relative_eq!(u_gamma(1.0, 1.0).u().unwrap(), 0.5, max_relative = 1e-15);
        assert_relative_eq!(u_gamma(-0.5, 1.0).u().unwrap(), 0.25, max_relative = 1e-15);
        // 50-digit evaluation of (1 + 1e-12)^(-1e12)
        let reference = 0.367_879_441_171_626_261_316_109_414_680_708_385_318_649_062_69;
        assert!((u_gamma(1e-12, 1.0).u().unwrap() - reference).abs() < 1e-15);
        assert!((u_gamma(1e-12, 1.0).u().unwrap() - 1.0 / E).abs() < 1e-11);
    }

    #[test]
    fn u_gamma_flags_out_of_support() {
        let p = u_gamma(1.0, -1.5);
        assert!(!p.in_support());
        assert_eq!(p.u(), None);
        assert_eq!(p.log_u(), None);
        // the boundary itself is excluded
        assert!(!u_gamma(-0.5, 2.0).in_support());
        assert!(u_gamma(0.0, -1e6).in_support());
    }

    #[test]
    fn series_branch_is_continuous() {
        for &z in &[-5.0, -1.0, 0.3, 2.0, 5.0] {
            for &g in &[1e-7, 1.999e-6, 2.001e-6, -2.001e-6, -1.999e-6] {
                let direct = (-(g * z as f64).ln_1p() / g).exp();
                let p = u_gamma(g, z).u().unwrap();
                assert_relative_eq!(p, direct, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn pdf_examples() {
        assert_relative_eq!(pdf(&th(0.0, 0.0, 1.0), 0.0), 1.0 / E, max_relative = 1e-15);
        assert_eq!(pdf(&th(1.0, 0.0, 1.0), -1.5), 0.0);
        // 50-digit oracle: e^-0.25 * 0.25^0.5
        assert_relative_eq!(
            pdf(&th(-0.5, 0.0, 1.0), 1.0),
            0.389_400_391_535_702_434_122_585_133_489_163,
            max_relative = 1e-14
        );
    }

    #[test]
    fn log_density_examples() {
        assert_relative_eq!(log_density(&th(0.0, 0.0, 1.0), 0.0), -1.0, max_relative = 1e-15);
        assert_eq!(log_density(&th(1.0, 0.0, 1.0), -1.5), f64::NEG_INFINITY);
        let t = th(0.5, 1.0, 2.0);
        assert_relative_eq!(log_density(&t, 3.0), pdf(&t, 3.0).ln(), max_relative = 1e-12);
    }

    #[test]
    fn cdf_examples() {
        assert_relative_eq!(cdf(&th(0.0, 0.0, 1.0), 0.0), 1.0 / E, max_relative = 1e-15);
        assert_eq!(cdf(&th(0.5, 0.0, 1.0), -2.0), 0.0);
        assert_eq!(cdf(&th(0.5, 0.0, 1.0), -3.0), 0.0);
        assert_eq!(cdf(&th(-0.5, 0.0, 1.0), 2.5), 1.0);
        assert_eq!(cdf(&th(-0.5, 0.0, 1.0), 2.0), 1.0);
    }

    #[test]
    fn quantile_examples() {
        assert!(quantile(&th(0.0, 0.0, 1.0), 1.0 / E).unwrap().abs() < 1e-15);
        assert!(quantile(&th(1.0, 0.0, 1.0), 1.0 / E).unwrap().abs() < 1e-15);
        assert!(quantile(&th(1.0, 0.0, 1.0), 0.0).is_err());
        assert!(quantile(&th(1.0, 0.0, 1.0), 1.0).is_err());
        assert!(quantile(&th(1.0, 0.0, 1.0), f64::NAN).is_err());
        let t = th(-0.3, 2.0, 0.5);
        assert_relative_eq!(upper_quantile(&t, 0.1), quantile(&t, 0.9).unwrap(), max_relative = 1e-13);
    }

    #[test]
    fn unit_exponential_maps_to_location() {
        for &g in &[-0.7, -1e-9, 0.0, 1e-9, 0.3, 4.0] {
            assert_eq!(from_exponential(&th(g, 1.5, 2.0), 1.0), 1.5);
        }
    }

    #[test]
    fn sampling_is_deterministic_and_in_support() {
        let t = th(-0.4, 1.0, 2.0);
        let a = sample(&t, 1000, 7).unwrap();
        let b = sample(&t, 1000, 7).unwrap();
        let c = sample(&t, 1000, 8).unwrap();
        assert_eq!(a.values(), b.values());
        assert_ne!(a.values(), c.values());
        let a_bits: Vec<u64> = a.values().iter().map(|v| v.to_bits()).collect();
        let b_bits: Vec<u64> = b.values().iter().map(|v| v.to_bits()).collect();
        assert_eq!(a_bits, b_bits);
        assert!(a.values().iter().all(|&x| pdf(&t, x) > 0.0));
        assert!(sample(&t, 0, 1).is_err());
        let s = sample_stream(&t, 10, 7, 1).unwrap();
        assert_ne!(&a.values()[..10], s.values());
    }

    #[test]
    fn location_scale_equivariance() {
        for &g in &[-0.45, 0.0, 0.7] {
            let t = th(g, 3.0, 4.0);
            let s = th(g, 0.0, 1.0);
            for i in 0..50 {
                let x = -5.0 + 0.37 * i as f64;
                let lhs = pdf(&t, x);
                let rhs = pdf(&s, (x - 3.0) / 4.0) / 4.0;
                assert_eq!(lhs, rhs);
            }
        }
    }
}
