//! Shared fixtures for the benchmarks.

use gevfit::{gev, Sample, Theta};

/// Shapes covering the bounded, light and heavy tailed regimes.
pub const SHAPES: [f64; 4] = [-0.4, 0.0, 0.5, 2.0];

pub fn theta(gamma: f64) -> Theta {
    Theta::new(gamma, 0.0, 1.0).expect("finite parameters")
}

/// Seeded sample of size `n` from `(gamma, 0, 1)`.
pub fn sample(gamma: f64, n: usize) -> Sample {
    gev::sample(&theta(gamma), n, 7).expect("valid sample request")
}
