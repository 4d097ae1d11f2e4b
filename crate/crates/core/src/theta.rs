use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{GevError, Result};

/// GEV parameter triple `(shape, location, scale)`.
///
/// The scale is strictly positive; all three components are finite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTheta")]
pub struct Theta {
    gamma: f64,
    mu: f64,
    sigma: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTheta {
    gamma: f64,
    mu: f64,
    sigma: f64,
}

impl TryFrom<RawTheta> for Theta {
    type Error = GevError;

    fn try_from(raw: RawTheta) -> Result<Self> {
        Theta::new(raw.gamma, raw.mu, raw.sigma)
    }
}

impl Theta {
    pub fn new(gamma: f64, mu: f64, sigma: f64) -> Result<Self> {
        if !gamma.is_finite() {
            return Err(GevError::NonFiniteParameter { name: "gamma", value: gamma });
        }
        if !mu.is_finite() {
            return Err(GevError::NonFiniteParameter { name: "mu", value: mu });
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(GevError::InvalidScale(sigma));
        }
        Ok(Self { gamma, mu, sigma })
    }

    /// Standard member `(gamma, 0, 1)`.
    pub fn standard(gamma: f64) -> Result<Self> {
        Self::new(gamma, 0.0, 1.0)
    }

    pub fn from_array(v: [f64; 3]) -> Result<Self> {
        Self::new(v[0], v[1], v[2])
    }

    #[inline]
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    #[inline]
    pub fn mu(&self) -> f64 {
        self.mu
    }

    #[inline]
    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    #[inline]
    pub fn to_array(&self) -> [f64; 3] {
        [self.gamma, self.mu, self.sigma]
    }

    /// Shape above -1/2, where the family is differentiable in quadratic mean.
    pub fn is_regular(&self) -> bool {
        self.gamma > -0.5
    }

    /// `theta + h`, rejected when the perturbed scale is not positive.
    pub fn shifted(&self, h: [f64; 3]) -> Result<Self> {
        Self::new(self.gamma + h[0], self.mu + h[1], self.sigma + h[2])
    }

    /// Finite support endpoint `mu - sigma / gamma`, if any.
    pub fn endpoint(&self) -> Option<f64> {
        (self.gamma != 0.0).then(|| self.mu - self.sigma / self.gamma)
    }

    /// `sigma + gamma (x - mu)`, positive exactly on the support.
    #[inline]
    pub fn support_margin(&self, x: f64) -> f64 {
        self.sigma + self.gamma * (x - self.mu)
    }

    /// Max-norm distance.
    pub fn max_dist(&self, other: &Theta) -> f64 {
        let a = self.to_array();
        let b = other.to_array();
        (0..3).map(|k| (a[k] - b[k]).abs()).fold(0.0, f64::max)
    }
}

impl fmt::Display for Theta {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(gamma={}, mu={}, sigma={})", self.gamma, self.mu, self.sigma)
    }
}

/// Where a sample came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Seeded { theta: Theta, seed: u64, stream: u64 },
    File(PathBuf),
    Memory,
}

/// Observations in arrival order plus provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    values: Vec<f64>,
    origin: Origin,
}

impl Sample {
    pub fn new(values: Vec<f64>, origin: Origin) -> Self {
        Self { values, origin }
    }

    pub fn from_values(values: Vec<f64>) -> Self {
        Self::new(values, Origin::Memory)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn origin(&self) -> &Origin {
        &self.origin
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Empirical mean of `f` over the observations.
    pub fn average<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.values.iter().map(|&x| f(x)).sum::<f64>() / self.values.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_nonpositive_scale() {
        assert_eq!(Theta::new(0.1, 0.0, 0.0), Err(GevError::InvalidScale(0.0)));
        assert!(Theta::new(0.1, 0.0, -1.0).is_err());
        assert!(Theta::new(0.1, 0.0, f64::INFINITY).is_err());
        assert!(Theta::new(f64::NAN, 0.0, 1.0).is_err());
    }

    #[test]
    fn regular_flag() {
        assert!(Theta::standard(-0.49).unwrap().is_regular());
        assert!(!Theta::standard(-0.5).unwrap().is_regular());
    }

    #[test]
    fn serde_validates() {
        let ok: Theta = serde_json::from_str(r#"{"gamma":0.2,"mu":1,"sigma":2}"#).unwrap();
        assert_eq!(ok.to_array(), [0.2, 1.0, 2.0]);
        assert!(serde_json::from_str::<Theta>(r#"{"gamma":0.2,"mu":1,"sigma":0}"#).is_err());
        assert!(serde_json::from_str::<Theta>(r#"{"gamma":0.2,"mu":1,"sigma":1,"x":3}"#).is_err());
    }
}
