//! Monte Carlo study of the estimator under its own model.
//!
//! Each replicate `(n, r)` draws from ChaCha20 keyed by the config seed on
//! stream `n << 32 | r`, so replicates are reproducible one at a time and
//! the thread schedule cannot influence any number. Results are collected
//! in replicate order before aggregation.

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{GevError, Result};
use crate::fisher::{self, symmetric_power};
use crate::gev;
use crate::mle::{self, FitOptions, ParamBox};
use crate::theta::Theta;

/// Environment variable capping the worker count.
pub const THREADS_ENV: &str = "GEVFIT_THREADS";
/// Largest tolerated share of failed replicates.
pub const MAX_FAILURE_RATE: f64 = 0.05;
/// Fewest usable replicates for the normality diagnostics.
pub const MIN_NORMALITY_REPLICATES: usize = 500;

fn default_ci() -> f64 {
    0.95
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub theta0: Theta,
    pub n_grid: Vec<usize>,
    pub replicates: usize,
    pub seed: u64,
    /// Fit box; the data-adaptive default box of each sample when absent.
    #[serde(rename = "box", default, skip_serializing_if = "Option::is_none")]
    pub param_box: Option<ParamBox>,
    #[serde(default = "default_ci")]
    pub ci_level: f64,
    #[serde(default)]
    pub fit: FitOptions,
}

fn invalid(field: &str, reason: impl Into<String>) -> GevError {
    GevError::InvalidConfig { field: field.into(), reason: reason.into() }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta0.gamma() > -0.5) {
            return Err(invalid("theta0", format!("gamma {} must exceed -1/2", self.theta0.gamma())));
        }
        if self.replicates < 100 {
            return Err(invalid("replicates", format!("need at least 100, got {}", self.replicates)));
        }
        if self.replicates > u32::MAX as usize {
            return Err(invalid("replicates", "too many replicates"));
        }
        if self.n_grid.is_empty() {
            return Err(invalid("n_grid", "empty"));
        }
        if let Some(n) = self.n_grid.iter().find(|&&n| n < 10 || n > u32::MAX as usize) {
            return Err(invalid("n_grid", format!("sample size {n} outside [10, 2^32)")));
        }
        if !(self.ci_level > 0.0 && self.ci_level < 1.0) {
            return Err(invalid("ci_level", format!("{} is not in (0, 1)", self.ci_level)));
        }
        if let Some(b) = &self.param_box {
            b.validate().map_err(|e| invalid("box", e.to_string()))?;
        }
        if !(self.fit.grad_tol > 0.0) {
            return Err(invalid("fit.grad_tol", "must be positive"));
        }
        Ok(())
    }
}

/// Outcome of one replicate; one CSV row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicateRecord {
    pub n: usize,
    pub r: usize,
    pub theta_hat: Option<[f64; 3]>,
    pub loglik: Option<f64>,
    pub converged: bool,
    pub boundary_hit: bool,
    pub residual: Option<f64>,
    pub ci_hit: Option<[bool; 3]>,
    pub error: Option<String>,
}

impl ReplicateRecord {
    /// Usable for covariance and coverage: converged, interior, with standard errors.
    pub fn usable(&self) -> bool {
        self.converged && !self.boundary_hit && self.ci_hit.is_some() && self.residual.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoordinateNormality {
    pub mean: f64,
    pub variance: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
    /// Anderson–Darling `A^2` against the standard normal.
    pub anderson_darling: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SizeSummary {
    pub n: usize,
    pub replicates: usize,
    pub used: usize,
    /// Replicates excluded for any reason, boundary hits included.
    pub failures: usize,
    pub boundary_hits: usize,
    pub failure_rate: f64,
    pub valid: bool,
    pub bias: [f64; 3],
    /// Covariance of `sqrt(n)(theta_hat - theta0)`.
    pub covariance: [[f64; 3]; 3],
    pub frobenius_distance: f64,
    pub relative_frobenius_distance: f64,
    pub coverage: [f64; 3],
    pub median_residual: f64,
    /// Median of `sqrt(n) |theta_hat - theta0|_inf`.
    pub median_scaled_error: f64,
    pub median_error: f64,
    pub normality: Option<[CoordinateNormality; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimReport {
    pub config: SimConfig,
    pub info_inverse: [[f64; 3]; 3],
    pub info_inverse_frobenius: f64,
    pub sizes: Vec<SizeSummary>,
    pub valid: bool,
    pub notes: Vec<String>,
    #[serde(skip)]
    pub records: Vec<ReplicateRecord>,
}

/// Worker count from `GEVFIT_THREADS`, else rayon's default.
pub fn thread_count() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&k| k > 0)
        .unwrap_or_else(rayon::current_num_threads)
}

fn replicate(cfg: &SimConfig, info_inv: &Matrix3<f64>, z: f64, n: usize, r: usize) -> ReplicateRecord {
    let mut rec = ReplicateRecord {
        n,
        r,
        theta_hat: None,
        loglik: None,
        converged: false,
        boundary_hit: false,
        residual: None,
        ci_hit: None,
        error: None,
    };
    let stream = ((n as u64) << 32) | r as u64;
    let outcome = (|| -> Result<()> {
        let sample = gev::sample_stream(&cfg.theta0, n, cfg.seed, stream)?;
        let bx = match cfg.param_box {
            Some(b) => b,
            None => ParamBox::default_for(sample.values())?,
        };
        let fit = mle::fit(&sample, &bx, &cfg.fit)?;
        rec.theta_hat = Some(fit.theta_hat.to_array());
        rec.loglik = Some(fit.loglik);
        rec.converged = fit.converged;
        rec.boundary_hit = !fit.interior();
        if let Some(se) = fit.stderr {
            let est = fit.theta_hat.to_array();
            let t0 = cfg.theta0.to_array();
            rec.ci_hit = Some([0, 1, 2].map(|j| (est[j] - t0[j]).abs() <= z * se[j]));
        }
        rec.residual = Some(mle::linearization_residual_with(&sample, &cfg.theta0, &fit, info_inv)?);
        Ok(())
    })();
    if let Err(e) = outcome {
        rec.error = Some(e.to_string());
    }
    rec
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

fn to_rows(m: &Matrix3<f64>) -> [[f64; 3]; 3] {
    [0, 1, 2].map(|i| [0, 1, 2].map(|j| m[(i, j)]))
}

/// Unbiased covariance of 3-vectors.
pub fn covariance(xs: &[[f64; 3]]) -> Matrix3<f64> {
    let m = xs.len() as f64;
    let mean = xs.iter().fold(Vector3::zeros(), |a, x| a + Vector3::from(*x)) / m;
    let mut c = Matrix3::zeros();
    for x in xs {
        let d = Vector3::from(*x) - mean;
        c += d * d.transpose();
    }
    c / (m - 1.0)
}

/// `|a - b|_F / |b|_F`.
pub fn relative_frobenius(a: &Matrix3<f64>, b: &Matrix3<f64>) -> f64 {
    (a - b).norm() / b.norm()
}

fn coordinate_stats(y: &mut [f64]) -> Result<CoordinateNormality> {
    let m = y.len() as f64;
    let mean = y.iter().sum::<f64>() / m;
    let central = |k: i32| y.iter().map(|v| (v - mean).powi(k)).sum::<f64>() / m;
    let m2 = central(2);
    if !(m2 > 0.0) {
        return Err(GevError::DegenerateSample("standardized errors have zero variance".into()));
    }
    let skewness = central(3) / m2.powf(1.5);
    let excess_kurtosis = central(4) / (m2 * m2) - 3.0;
    let std = Normal::standard();
    y.sort_by(f64::total_cmp);
    let n = y.len();
    let mut acc = 0.0;
    for i in 0..n {
        let lo = std.cdf(y[i]).ln();
        // log(1 - Phi(y)) as log Phi(-y)
        let hi = std.cdf(-y[n - 1 - i]).ln();
        acc += (2 * i + 1) as f64 * (lo + hi);
    }
    Ok(CoordinateNormality {
        mean,
        variance: m2 * m / (m - 1.0),
        skewness,
        excess_kurtosis,
        anderson_darling: -m - acc / m,
    })
}

/// Per-coordinate normality statistics of `I^(1/2) e` for scaled errors
/// `e = sqrt(n)(theta_hat - theta0)`.
pub fn normality_diagnostics(errors: &[[f64; 3]], info: &Matrix3<f64>) -> Result<[CoordinateNormality; 3]> {
    if errors.len() < MIN_NORMALITY_REPLICATES {
        return Err(invalid(
            "replicates",
            format!("normality diagnostics need at least {MIN_NORMALITY_REPLICATES} usable replicates, got {}", errors.len()),
        ));
    }
    let root = symmetric_power(info, 0.5)?;
    let std: Vec<Vector3<f64>> = errors.iter().map(|e| root * Vector3::from(*e)).collect();
    let mut out = Vec::with_capacity(3);
    for j in 0..3 {
        let mut y: Vec<f64> = std.iter().map(|v| v[j]).collect();
        out.push(coordinate_stats(&mut y)?);
    }
    Ok(out.try_into().expect("three coordinates"))
}

fn summarize(cfg: &SimConfig, n: usize, recs: &[ReplicateRecord], info: &Matrix3<f64>, info_inv: &Matrix3<f64>) -> SizeSummary {
    let used: Vec<&ReplicateRecord> = recs.iter().filter(|r| r.usable()).collect();
    let t0 = cfg.theta0.to_array();
    let rn = (n as f64).sqrt();
    let errs: Vec<[f64; 3]> =
        used.iter().map(|r| { let e = r.theta_hat.unwrap(); [0, 1, 2].map(|j| e[j] - t0[j]) }).collect();
    let scaled: Vec<[f64; 3]> = errs.iter().map(|e| e.map(|v| rn * v)).collect();
    // NaN, serialized as null, when nothing is usable
    let m = used.len() as f64;
    let bias = [0, 1, 2].map(|j| errs.iter().map(|e| e[j]).sum::<f64>() / m);
    let cov = if scaled.len() >= 2 { covariance(&scaled) } else { Matrix3::from_element(f64::NAN) };
    let coverage = [0, 1, 2].map(|j| used.iter().filter(|r| r.ci_hit.unwrap()[j]).count() as f64 / m);
    let max_abs = |e: &[f64; 3]| e.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let failures = recs.len() - used.len();
    let failure_rate = failures as f64 / recs.len() as f64;
    SizeSummary {
        n,
        replicates: recs.len(),
        used: used.len(),
        failures,
        boundary_hits: recs.iter().filter(|r| r.boundary_hit).count(),
        failure_rate,
        valid: failure_rate <= MAX_FAILURE_RATE,
        bias,
        covariance: to_rows(&cov),
        frobenius_distance: (cov - info_inv).norm(),
        relative_frobenius_distance: relative_frobenius(&cov, info_inv),
        coverage,
        median_residual: median(used.iter().map(|r| r.residual.unwrap()).collect()),
        median_scaled_error: median(scaled.iter().map(max_abs).collect()),
        median_error: median(errs.iter().map(max_abs).collect()),
        normality: normality_diagnostics(&scaled, info).ok(),
    }
}

pub fn run_simulation(cfg: &SimConfig) -> Result<SimReport> {
    run_simulation_with_threads(cfg, thread_count())
}

/// [`run_simulation`] on a pool of exactly `threads` workers.
pub fn run_simulation_with_threads(cfg: &SimConfig, threads: usize) -> Result<SimReport> {
    cfg.validate()?;
    let info = fisher::fisher_information(&cfg.theta0)?;
    let info_m = info.matrix();
    let info_inv = info.inverse()?;
    let normal = Normal::standard();
    let z = normal.inverse_cdf(0.5 + 0.5 * cfg.ci_level);
    let jobs: Vec<(usize, usize)> =
        cfg.n_grid.iter().flat_map(|&n| (0..cfg.replicates).map(move |r| (n, r))).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| invalid("threads", e.to_string()))?;
    let records: Vec<ReplicateRecord> =
        pool.install(|| jobs.par_iter().map(|&(n, r)| replicate(cfg, &info_inv, z, n, r)).collect());
    let sizes: Vec<SizeSummary> = cfg
        .n_grid
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let recs = &records[i * cfg.replicates..(i + 1) * cfg.replicates];
            summarize(cfg, n, recs, &info_m, &info_inv)
        })
        .collect();
    Ok(SimReport {
        config: cfg.clone(),
        info_inverse: to_rows(&info_inv),
        info_inverse_frobenius: info_inv.norm(),
        valid: sizes.iter().all(|s| s.valid),
        sizes,
        notes: vec![
            "tolerance bands used to judge these numbers are engineering choices, not finite-sample theory".into(),
            "boundary fits are excluded from covariance and coverage and counted as failures".into(),
        ],
        records,
    })
}

/// Per-replicate CSV: `n, r, gamma_hat, mu_hat, sigma_hat, loglik, converged, boundary_hit, residual`.
pub fn replicates_csv(records: &[ReplicateRecord]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| GevError::Io(e.to_string());
    w.write_record(["n", "r", "gamma_hat", "mu_hat", "sigma_hat", "loglik", "converged", "boundary_hit", "residual"])
        .map_err(io)?;
    let f = |v: Option<f64>| v.filter(|x| x.is_finite()).map(crate::output::fmt_f64).unwrap_or_default();
    for rec in records {
        let t = rec.theta_hat;
        w.write_record([
            rec.n.to_string(),
            rec.r.to_string(),
            f(t.map(|t| t[0])),
            f(t.map(|t| t[1])),
            f(t.map(|t| t[2])),
            f(rec.loglik),
            rec.converged.to_string(),
            rec.boundary_hit.to_string(),
            f(rec.residual),
        ])
        .map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| GevError::Io(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("ASCII output"))
}
