//! Fisher information `I_theta = E_theta[score score^T]`.
//!
//! Under `P_theta` the variable `u = u_gamma(Z)` is unit exponential, so
//! every entry is a one-dimensional integral of `s_j(u) s_k(u) e^-u` over
//! `(0, inf)`. Near `u = 0` the integrand behaves like `u^(2 gamma)` when
//! `gamma < 0`; the substitution `u = w^(1/(1 + 2 gamma))` flattens that
//! leading singularity before the adaptive rule sees it.

use nalgebra::{Matrix3, SymmetricEigen};
use serde::Serialize;

use crate::error::{GevError, Result};
use crate::gev;
use crate::quad::{self, QuadConfig};
use crate::score::{self, scaled_score_from_log_u, score_from_log_u};
use crate::theta::Theta;

/// Shapes within this distance of -1/2 are tagged near-singular.
pub const NEAR_SINGULAR_BAND: f64 = 1e-3;

/// Upper truncation of the exponential integral; `e^-u` underflows long before.
const U_MAX: f64 = 800.0;

const PAIRS: [(usize, usize); 6] = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)];

/// 3x3 information matrix, ordered `(gamma, mu, sigma)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FisherMatrix {
    pub entries: [[f64; 3]; 3],
    pub theta: Theta,
    /// Largest absolute error estimate over the entries.
    pub quadrature_error: f64,
    pub near_singular: bool,
}

impl FisherMatrix {
    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::from_fn(|i, j| self.entries[i][j])
    }

    pub fn is_positive_definite(&self) -> bool {
        self.matrix().cholesky().is_some()
    }

    pub fn inverse(&self) -> Result<Matrix3<f64>> {
        self.matrix()
            .cholesky()
            .map(|c| c.inverse())
            .ok_or_else(|| GevError::Singular(format!("Fisher matrix at {} is not positive definite", self.theta)))
    }

    pub fn eigenvalues(&self) -> [f64; 3] {
        let e = SymmetricEigen::new(self.matrix()).eigenvalues;
        let mut v = [e[0], e[1], e[2]];
        v.sort_by(f64::total_cmp);
        v
    }

    /// Symmetric square root `I^(1/2)`.
    pub fn sqrt(&self) -> Result<Matrix3<f64>> {
        symmetric_power(&self.matrix(), 0.5)
    }
}

/// `A^p` for a symmetric positive definite `A`, via eigendecomposition.
pub fn symmetric_power(a: &Matrix3<f64>, p: f64) -> Result<Matrix3<f64>> {
    let eig = SymmetricEigen::new(*a);
    if eig.eigenvalues.iter().any(|&l| !(l > 0.0)) {
        return Err(GevError::Singular("matrix is not positive definite".into()));
    }
    let d = Matrix3::from_diagonal(&eig.eigenvalues.map(|l| l.powf(p)));
    Ok(eig.eigenvectors * d * eig.eigenvectors.transpose())
}

fn products(s: [f64; 3]) -> [f64; 6] {
    PAIRS.map(|(i, j)| s[i] * s[j])
}

fn assemble(v: [f64; 6]) -> [[f64; 3]; 3] {
    let mut m = [[0.0; 3]; 3];
    for (k, &(i, j)) in PAIRS.iter().enumerate() {
        m[i][j] = v[k];
        m[j][i] = v[k];
    }
    m
}

fn check_regular(theta: &Theta) -> Result<()> {
    if theta.gamma() <= -0.5 {
        return Err(GevError::InformationUndefined { gamma: theta.gamma() });
    }
    Ok(())
}

pub fn fisher_information(theta: &Theta) -> Result<FisherMatrix> {
    fisher_information_with(theta, &QuadConfig { abs_tol: 1e-12, rel_tol: 1e-12, max_intervals: 6000 })
}

pub fn fisher_information_with(theta: &Theta, cfg: &QuadConfig) -> Result<FisherMatrix> {
    check_regular(theta)?;
    let g = theta.gamma();
    let weighted = |log_u: f64| -> [f64; 6] {
        let w = (-log_u.exp()).exp();
        products(score_from_log_u(theta, log_u).to_array()).map(|p| p * w)
    };
    // [0, 1] in w with u = w^(1/alpha); alpha = 1 for gamma >= 0
    let alpha = if g < 0.0 { 1.0 + 2.0 * g } else { 1.0 };
    let inner = |w: f64| -> [f64; 6] {
        if w <= 0.0 {
            return [0.0; 6];
        }
        let log_u = w.ln() / alpha;
        // du/dw = u / (alpha w); half of its log goes into each score factor
        let log_c = 0.5 * (log_u - w.ln() - alpha.ln());
        let e = (-log_u.exp()).exp();
        products(scaled_score_from_log_u(theta, log_u, log_c).to_array()).map(|p| p * e)
    };
    let outer = |u: f64| weighted(u.ln());
    let panels: [(&dyn Fn(f64) -> [f64; 6], f64, f64); 5] = [
        (&inner, 0.0, 1.0),
        (&outer, 1.0, 4.0),
        (&outer, 4.0, 20.0),
        (&outer, 20.0, 100.0),
        (&outer, 100.0, U_MAX),
    ];
    let r = quad::integrate_panels(&panels, cfg);
    let err = r.abs_error.iter().cloned().fold(0.0, f64::max);
    Ok(FisherMatrix {
        entries: assemble(r.value),
        theta: *theta,
        quadrature_error: if r.converged { err } else { err.max(f64::EPSILON.sqrt()) },
        near_singular: g <= -0.5 + NEAR_SINGULAR_BAND,
    })
}

/// Empirical second-moment matrix of the score over a seeded sample.
///
/// `quadrature_error` carries the largest Monte Carlo standard error.
pub fn fisher_information_mc(theta: &Theta, n: usize, seed: u64) -> Result<FisherMatrix> {
    check_regular(theta)?;
    if n < 10_000 {
        return Err(GevError::InvalidConfig { field: "n".into(), reason: "need at least 10^4 draws".into() });
    }
    let sample = gev::sample(theta, n, seed)?;
    let mut sum = [0.0; 6];
    let mut sum_sq = [0.0; 6];
    for &x in sample.values() {
        let p = products(score::score(theta, x)?.to_array());
        for k in 0..6 {
            sum[k] += p[k];
            sum_sq[k] += p[k] * p[k];
        }
    }
    let nf = n as f64;
    let mean = sum.map(|s| s / nf);
    let se = (0..6)
        .map(|k| ((sum_sq[k] / nf - mean[k] * mean[k]).max(0.0) / nf).sqrt())
        .fold(0.0, f64::max);
    Ok(FisherMatrix {
        entries: assemble(mean),
        theta: *theta,
        quadrature_error: se,
        near_singular: theta.gamma() <= -0.5 + NEAR_SINGULAR_BAND,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn th(g: f64, m: f64, s: f64) -> Theta {
        Theta::new(g, m, s).unwrap()
    }

    #[test]
    fn gumbel_mu_entry_is_one() {
        // E(1 - U)^2 = 1 - 2 + 2 for U ~ Exp(1)
        let f = fisher_information(&th(0.0, 0.0, 1.0)).unwrap();
        assert_relative_eq!(f.entries[1][1], 1.0, max_relative = 1e-10);
        assert!(f.quadrature_error < 1e-8);
    }

    #[test]
    fn gumbel_entries_from_exponential_moments() {
        // With z = -log U: E[((1-U)z - 1)^2] = (pi^2/6 + (1 - euler)^2)
        let euler: f64 = 0.577_215_664_901_532_9;
        let f = fisher_information(&th(0.0, 0.0, 1.0)).unwrap();
        let pi2_6 = std::f64::consts::PI.powi(2) / 6.0;
        assert_relative_eq!(f.entries[2][2], pi2_6 + (1.0 - euler).powi(2), max_relative = 1e-10);
        // E[(1 - U)((1-U)z - 1)] = -(1 - euler)
        assert_relative_eq!(f.entries[1][2], -(1.0 - euler), max_relative = 1e-10);
    }

    #[test]
    fn mu_entry_scales_inverse_square() {
        for &s in &[0.5, 3.0] {
            let f = fisher_information(&th(0.0, 0.0, s)).unwrap();
            assert_relative_eq!(f.entries[1][1], 1.0 / (s * s), max_relative = 1e-10);
        }
    }

    #[test]
    fn rejects_non_regular_shape() {
        assert!(matches!(
            fisher_information(&th(-0.5, 0.0, 1.0)),
            Err(GevError::InformationUndefined { .. })
        ));
        assert!(fisher_information_mc(&th(-0.7, 0.0, 1.0), 10_000, 1).is_err());
        assert!(fisher_information_mc(&th(0.1, 0.0, 1.0), 100, 1).is_err());
    }

    #[test]
    fn continuous_across_zero_shape() {
        let a = fisher_information(&th(0.0, 0.0, 1.0)).unwrap();
        let b = fisher_information(&th(1e-6, 0.0, 1.0)).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert!((a.entries[i][j] - b.entries[i][j]).abs() < 1e-4);
            }
        }
    }

    #[test]
    fn near_singular_tag() {
        assert!(fisher_information(&th(-0.4995, 0.0, 1.0)).unwrap().near_singular);
        assert!(!fisher_information(&th(-0.45, 0.0, 1.0)).unwrap().near_singular);
    }

    #[test]
    fn mc_is_deterministic() {
        let t = th(0.3, 0.0, 1.0);
        let a = fisher_information_mc(&t, 10_000, 5).unwrap();
        let b = fisher_information_mc(&t, 10_000, 5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn symmetric_sqrt_squares_back() {
        let f = fisher_information(&th(0.5, 0.0, 1.0)).unwrap();
        let r = f.sqrt().unwrap();
        let back = r * r;
        for i in 0..3 {
            for j in 0..3 {
                assert_relative_eq!(back[(i, j)], f.entries[i][j], max_relative = 1e-10, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn mu_entry_matches_gamma_function_near_the_boundary() {
        // E[(gamma + 1 - U)^2 U^(2 gamma)] = (1 + gamma)^2 Gamma(1 + 2 gamma)
        for g in [-0.4, -0.49, -0.499, -0.4999] {
            let f = fisher_information(&th(g, 0.0, 1.0)).unwrap();
            let expect = (1.0 + g) * (1.0 + g) * statrs::function::gamma::gamma(1.0 + 2.0 * g);
            assert_relative_eq!(f.entries[1][1], expect, max_relative = 1e-8);
            assert_eq!(f.near_singular, g > -0.5 && g <= -0.499);
        }
    }
}
