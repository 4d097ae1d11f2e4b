//! Score vector, the `m_theta` criterion, and the pointwise score bounds.

use serde::Serialize;

use crate::error::{GevError, Result};
use crate::gev::{self, StdPoint};
use crate::theta::Theta;

/// Below this `|gamma z|` the derivative of `log u` in `gamma` is summed as a series.
const DLOGU_SERIES_CUTOFF: f64 = 0.05;
const DLOGU_SERIES_TERMS: usize = 16;

/// Gradient of the log-density in `(gamma, mu, sigma)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScoreVector {
    pub d_gamma: f64,
    pub d_mu: f64,
    pub d_sigma: f64,
}

impl ScoreVector {
    pub fn to_array(&self) -> [f64; 3] {
        [self.d_gamma, self.d_mu, self.d_sigma]
    }

    pub fn max_abs(&self) -> f64 {
        self.d_gamma.abs().max(self.d_mu.abs()).max(self.d_sigma.abs())
    }
}

fn out_of_support(theta: &Theta, x: f64) -> GevError {
    GevError::OutOfSupport { x, theta: theta.to_string() }
}

/// `d/dgamma log u_gamma(z)`, the integral of `t / (1 + gamma t)^2` over `[0, z]`.
pub fn dlogu(gamma: f64, z: f64) -> Result<f64> {
    let opgz = 1.0 + gamma * z;
    if !(opgz > 0.0) {
        return Err(GevError::OutOfSupport {
            x: z,
            theta: format!("(gamma={gamma}, mu=0, sigma=1)"),
        });
    }
    Ok(dlogu_parts(gamma, z, opgz))
}

/// `dlogu` given an accurate `1 + gamma z > 0`.
pub(crate) fn dlogu_parts(gamma: f64, z: f64, opgz: f64) -> f64 {
    if gamma == 0.0 {
        return 0.5 * z * z;
    }
    let v = gamma * z;
    if v.abs() < DLOGU_SERIES_CUTOFF {
        // z^2 * sum_{k>=2} (-1)^k (k-1)/k v^(k-2)
        let mut acc = 0.0;
        for k in (2..2 + DLOGU_SERIES_TERMS).rev() {
            let c = (k - 1) as f64 / k as f64;
            let c = if k % 2 == 0 { c } else { -c };
            acc = acc * v + c;
        }
        return z * z * acc;
    }
    let log_opgz = if v.abs() < 0.5 { v.ln_1p() } else { opgz.ln() };
    let d = (log_opgz / gamma - z / opgz) / gamma;
    d.max(0.0)
}

/// Score at an in-support standardized point.
pub(crate) fn score_std(theta: &Theta, p: &StdPoint) -> Option<ScoreVector> {
    let (u, _) = p.parts()?;
    let g = theta.gamma();
    let s = theta.sigma();
    let z = p.z;
    let opgz = p.one_plus_gamma_z;
    let dl = dlogu_parts(g, z, opgz);
    Some(ScoreVector {
        d_gamma: (1.0 - u) * dl - z / opgz,
        d_mu: (g + 1.0 - u) / (s * opgz),
        d_sigma: ((1.0 - u) * z - 1.0) / (s * opgz),
    })
}

/// Score expressed through `log u`, with `z` and `1 + gamma z = u^-gamma`
/// recovered from it. Used by integrals against the unit exponential.
pub(crate) fn score_from_log_u(theta: &Theta, log_u: f64) -> ScoreVector {
    let g = theta.gamma();
    let s = theta.sigma();
    let u = log_u.exp();
    let z = gev::z_from_log_u(g, log_u);
    let opgz = (-g * log_u).exp();
    let dl = dlogu_parts(g, z, opgz);
    ScoreVector {
        d_gamma: (1.0 - u) * dl - z / opgz,
        d_mu: (g + 1.0 - u) / (s * opgz),
        d_sigma: ((1.0 - u) * z - 1.0) / (s * opgz),
    }
}

/// `c * score` with `c = exp(log_c)`, stable where `1 + gamma z = u^-gamma`
/// underflows near a finite upper endpoint.
pub(crate) fn scaled_score_from_log_u(theta: &Theta, log_u: f64, log_c: f64) -> ScoreVector {
    let g = theta.gamma();
    if g * log_u < 30.0 {
        let c = log_c.exp();
        let v = score_from_log_u(theta, log_u);
        return ScoreVector { d_gamma: c * v.d_gamma, d_mu: c * v.d_mu, d_sigma: c * v.d_sigma };
    }
    // here |gamma z| is far from the series range, and c / (1 + gamma z) is formed in log space
    let s = theta.sigma();
    let u = log_u.exp();
    let c = log_c.exp();
    let c_inv = (g * log_u + log_c).exp();
    let c_z_over = (c - c_inv) / g;
    let c_dl = ((-log_u * c - c_z_over) / g).max(0.0);
    ScoreVector {
        d_gamma: (1.0 - u) * c_dl - c_z_over,
        d_mu: (g + 1.0 - u) * c_inv / s,
        d_sigma: ((1.0 - u) * c_z_over - c_inv) / s,
    }
}

pub fn score(theta: &Theta, x: f64) -> Result<ScoreVector> {
    score_std(theta, &gev::standardize(theta, x)).ok_or_else(|| out_of_support(theta, x))
}

/// `2 log((p_theta + p_theta0) / (2 p_theta0))`, evaluated in log space.
pub fn m_criterion(theta: &Theta, theta0: &Theta, x: f64) -> Result<f64> {
    let l0 = gev::log_density(theta0, x);
    if l0 == f64::NEG_INFINITY {
        return Err(out_of_support(theta0, x));
    }
    let l = gev::log_density(theta, x);
    // log(1 + e^d), stable for both signs of d
    let d = l - l0;
    let softplus = if d > 0.0 { d + (-d).exp().ln_1p() } else { d.exp().ln_1p() };
    Ok(2.0 * (softplus - std::f64::consts::LN_2))
}

/// Which pointwise score bound an envelope value comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LemmaId {
    /// `0 <= dlogu <= z^2 / (1 + gamma z)`
    DlogUBound,
    /// `|d_mu|`
    MuBound,
    /// `|d_sigma|`
    SigmaBound,
    /// `|d_gamma|` for `gamma >= 0, z >= 0`
    GammaPp,
    /// `|d_gamma|` for `gamma <= 0, z >= 0`
    GammaMp,
    /// `|d_gamma|` for `gamma >= 0, z <= 0`
    GammaPm,
    /// `|d_gamma|` for `gamma <= 0, z <= 0`
    GammaMm,
    /// `|z| / (1 + gamma z) <= u^max(gamma,0) log u` for `z <= 0`
    Z1pgz,
}

/// A bound's right-hand side together with the quantity it bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundEnvelope {
    pub lemma_id: LemmaId,
    pub value: f64,
    pub bounded: f64,
}

impl BoundEnvelope {
    pub fn holds(&self, slack: f64) -> bool {
        self.bounded <= self.value + slack
    }
}

/// Evaluate every applicable score bound at `(theta, x)`.
///
/// Cases split on the signs of `gamma` and `z`; at a tie the first listed
/// case is used (both are valid there).
pub fn bound_envelopes(theta: &Theta, x: f64) -> Result<Vec<BoundEnvelope>> {
    let p = gev::standardize(theta, x);
    let (u, log_u) = p.parts().ok_or_else(|| out_of_support(theta, x))?;
    let sc = score_std(theta, &p).expect("in support");
    let g = theta.gamma();
    let s = theta.sigma();
    let z = p.z;
    let opgz = p.one_plus_gamma_z;
    let dl = dlogu_parts(g, z, opgz);

    let mut out = Vec::with_capacity(4);
    out.push(BoundEnvelope { lemma_id: LemmaId::DlogUBound, value: z * z / opgz, bounded: dl });

    let mu_env = if z <= 0.0 {
        (1.0 + g.abs()) * u.powf(1.0 + g) / s
    } else {
        (1.0 + g.abs()) * u.powf(g) / s
    };
    out.push(BoundEnvelope { lemma_id: LemmaId::MuBound, value: mu_env, bounded: sc.d_mu.abs() });

    let sigma_env = if z >= 0.0 {
        (z + 1.0) / (s * opgz)
    } else {
        (1.0 + u * log_u) * u.powf(g.max(0.0)) / s
    };
    out.push(BoundEnvelope { lemma_id: LemmaId::SigmaBound, value: sigma_env, bounded: sc.d_sigma.abs() });

    let dg = sc.d_gamma.abs();
    let log_sq_or_log = (log_u * log_u).max(log_u);
    let gamma_env = if g >= 0.0 && z >= 0.0 {
        let (log_term, inv_g) = if g == 0.0 {
            (f64::INFINITY, f64::INFINITY)
        } else {
            (opgz.ln() / (g * g), 1.0 / g)
        };
        let a = (0.5 * z * z).min(log_term);
        let b = z.min(inv_g);
        BoundEnvelope { lemma_id: LemmaId::GammaPp, value: a.max(b), bounded: dg }
    } else if z >= 0.0 {
        BoundEnvelope { lemma_id: LemmaId::GammaMp, value: (z * z).max(z) / opgz, bounded: dg }
    } else if g >= 0.0 {
        BoundEnvelope { lemma_id: LemmaId::GammaPm, value: u.powf(1.0 + g) * log_sq_or_log, bounded: dg }
    } else {
        BoundEnvelope { lemma_id: LemmaId::GammaMm, value: u * log_sq_or_log, bounded: dg }
    };
    out.push(gamma_env);

    if z <= 0.0 {
        out.push(BoundEnvelope {
            lemma_id: LemmaId::Z1pgz,
            value: u.powf(g.max(0.0)) * log_u,
            bounded: z.abs() / opgz,
        });
    }
    Ok(out)
}

/// Gradient of `theta -> p_theta(x)^a`, which is `a p^a` times the score on the
/// support and zero off it.
pub fn pdf_pow_gradient(theta: &Theta, x: f64, a: f64) -> Result<[f64; 3]> {
    if !(0.5..1.0).contains(&a) {
        return Err(GevError::InvalidConfig { field: "a".into(), reason: "must lie in [1/2, 1)".into() });
    }
    let limit = -a / (1.0 + a);
    if theta.gamma() <= limit {
        return Err(GevError::PowerExponentRange { a, gamma: theta.gamma(), limit });
    }
    let p = gev::standardize(theta, x);
    let Some(sc) = score_std(theta, &p) else {
        return Ok([0.0; 3]);
    };
    let pa = (a * gev::log_density_std(theta, &p)).exp();
    Ok(sc.to_array().map(|c| a * pa * c))
}
