use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use gevfit::dqm::COORDINATE_DIRECTIONS;
use gevfit::output::{fmt_f64, to_json};
use gevfit::sim::replicates_csv;
use gevfit::{
    common_support, dqm_certify, fisher_information, fisher_information_mc, fit as fit_sample, gev, mass_outside,
    support_of, FitOptions, GevError, ParamBox, Sample, SimConfig, SupportInterval, Theta,
};
use serde::Serialize;

use crate::args::{DqmArgs, FitArgs, InfoArgs, SampleArgs, SimulateArgs, SupportArgs};
use crate::{config, exit, input, overlay, CliError};

fn emit(text: &str, out: Option<&Path>) -> Result<(), CliError> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| CliError::input(format!("cannot write {}: {e}", p.display()))),
        None => {
            let mut so = std::io::stdout().lock();
            so.write_all(text.as_bytes()).and_then(|_| so.flush()).map_err(|e| CliError::input(e.to_string()))
        }
    }
}

fn json<T: Serialize>(value: &T) -> Result<String, CliError> {
    to_json(value).map_err(|e| CliError::input(format!("serialization failed: {e}")))
}

fn theta_from(gamma: Option<f64>, mu: Option<f64>, sigma: Option<f64>) -> Result<Theta, CliError> {
    let gamma = gamma.ok_or_else(|| CliError::input("missing --gamma"))?;
    Ok(Theta::new(gamma, mu.unwrap_or(0.0), sigma.unwrap_or(1.0))?)
}

fn with_file<T: serde::de::DeserializeOwned + Default>(path: &Option<PathBuf>) -> Result<T, CliError> {
    path.as_deref().map_or_else(|| Ok(T::default()), config::load)
}

#[derive(Serialize)]
struct FitReport<'a> {
    input: String,
    n: usize,
    theta_hat: Theta,
    loglik: f64,
    stderr: Option<[f64; 3]>,
    converged: bool,
    grad_norm: f64,
    iterations: usize,
    boundary_hit: [bool; 3],
    multimodal: bool,
    #[serde(rename = "box")]
    param_box: ParamBox,
    warnings: &'a [String],
}

pub fn fit(flags: FitArgs) -> Result<u8, CliError> {
    let file: FitArgs = with_file(&flags.config)?;
    let a = overlay!(flags, file; input, out, gamma_range, mu_range, sigma_range, grad_tol, multistart, max_newton, simplex_evals);
    let path = a.input.ok_or_else(|| CliError::input("missing input file"))?;
    let text = config::read_to_string(&path)?;
    let values = input::parse_values(&text, &path.display().to_string())?;
    if values.is_empty() {
        return Err(GevError::EmptySample.into());
    }
    let mut bx = ParamBox::default_for(&values)?;
    bx.gamma = a.gamma_range.unwrap_or(bx.gamma);
    bx.mu = a.mu_range.unwrap_or(bx.mu);
    bx.sigma = a.sigma_range.unwrap_or(bx.sigma);
    bx.validate()?;
    let d = FitOptions::default();
    let opts = FitOptions {
        grad_tol: a.grad_tol.unwrap_or(d.grad_tol),
        multistart: a.multistart.unwrap_or(d.multistart),
        max_newton: a.max_newton.unwrap_or(d.max_newton),
        simplex_evals: a.simplex_evals.unwrap_or(d.simplex_evals),
    };
    let sample = Sample::new(values, gevfit::Origin::File(path.clone()));
    let r = fit_sample(&sample, &bx, &opts)?;
    let report = FitReport {
        input: path.display().to_string(),
        n: r.n,
        theta_hat: r.theta_hat,
        loglik: r.loglik,
        stderr: r.stderr,
        converged: r.converged,
        grad_norm: r.grad_norm,
        iterations: r.iterations,
        boundary_hit: r.boundary_hit,
        multimodal: r.multimodal,
        param_box: bx,
        warnings: &r.warnings,
    };
    for w in &r.warnings {
        eprintln!("gevfit: warning: {w}");
    }
    emit(&json(&report)?, a.out.as_deref())?;
    Ok(exit::OK)
}

pub fn simulate(a: SimulateArgs) -> Result<u8, CliError> {
    let mut cfg: SimConfig = config::load(&a.config)?;
    cfg.seed = a.seed.unwrap_or(cfg.seed);
    cfg.replicates = a.replicates.unwrap_or(cfg.replicates);
    cfg.n_grid = a.n_grid.unwrap_or(cfg.n_grid);
    cfg.ci_level = a.ci_level.unwrap_or(cfg.ci_level);
    cfg.validate()?;
    let report = gevfit::run_simulation(&cfg)?;
    fs::create_dir_all(&a.out_dir)
        .map_err(|e| CliError::input(format!("cannot create {}: {e}", a.out_dir.display())))?;
    let report_path = a.out_dir.join("report.json");
    let csv_path = a.out_dir.join("replicates.csv");
    emit(&json(&report)?, Some(&report_path))?;
    emit(&replicates_csv(&report.records)?, Some(&csv_path))?;

    let mut table = String::from("n       used  fail  rel_frob  cov_gamma  cov_mu  cov_sigma  med_sqrt_n_err  med_resid\n");
    for s in &report.sizes {
        table.push_str(&format!(
            "{:<7} {:>4}  {:>4}  {:>8.4}  {:>9.4}  {:>6.4}  {:>9.4}  {:>14.4}  {:>9.4}\n",
            s.n,
            s.used,
            s.failures,
            s.relative_frobenius_distance,
            s.coverage[0],
            s.coverage[1],
            s.coverage[2],
            s.median_scaled_error,
            s.median_residual
        ));
    }
    emit(&table, None)?;
    if report.valid {
        Ok(exit::OK)
    } else {
        eprintln!("gevfit: report invalid: failure rate above 5% for at least one sample size");
        Ok(exit::UNDEFINED)
    }
}

pub fn dqm(flags: DqmArgs) -> Result<u8, CliError> {
    let file: DqmArgs = with_file(&flags.config)?;
    let a = overlay!(flags, file; gamma, mu, sigma, k_min, k_max, direction, out);
    let theta = theta_from(a.gamma, a.mu, a.sigma)?;
    let dirs = a.direction.unwrap_or_else(|| COORDINATE_DIRECTIONS.to_vec());
    let report = dqm_certify(&theta, &dirs, (a.k_min.unwrap_or(4), a.k_max.unwrap_or(14)))?;
    emit(&json(&report)?, a.out.as_deref())?;
    Ok(exit::OK)
}

#[derive(Serialize)]
struct MassRow {
    k: i32,
    epsilon: f64,
    mass_outside: Option<f64>,
    ratio: Option<f64>,
}

#[derive(Serialize)]
struct SupportReport {
    theta0: Theta,
    support: SupportInterval,
    epsilon: f64,
    common_support: SupportInterval,
    mass_outside: f64,
    /// `mass_outside(eps) / eps^2` along dyadic `eps`; null where `eps` is inadmissible.
    table: Vec<MassRow>,
}

pub fn support(flags: SupportArgs) -> Result<u8, CliError> {
    let file: SupportArgs = with_file(&flags.config)?;
    let a = overlay!(flags, file; gamma, mu, sigma, eps, k_min, k_max, out);
    let theta = theta_from(a.gamma, a.mu, a.sigma)?;
    let eps = a.eps.ok_or_else(|| CliError::input("missing --eps"))?;
    let (k_min, k_max) = (a.k_min.unwrap_or(3), a.k_max.unwrap_or(12));
    if !(0..=60).contains(&k_min) || !(k_min..=60).contains(&k_max) {
        return Err(CliError::input(format!("need 0 <= k_min <= k_max <= 60, got [{k_min}, {k_max}]")));
    }
    let cs = common_support(&theta, eps)?;
    let table = (k_min..=k_max)
        .map(|k| {
            let e = 2f64.powi(-k);
            let m = mass_outside(&theta, e).ok();
            MassRow { k, epsilon: e, mass_outside: m, ratio: m.map(|m| m / (e * e)) }
        })
        .collect();
    let report = SupportReport {
        theta0: theta,
        support: support_of(&theta),
        epsilon: eps,
        common_support: cs.interval,
        mass_outside: mass_outside(&theta, eps)?,
        table,
    };
    emit(&json(&report)?, a.out.as_deref())?;
    Ok(exit::OK)
}

#[derive(Serialize)]
struct InfoReport {
    theta: Theta,
    method: &'static str,
    fisher: [[f64; 3]; 3],
    inverse: [[f64; 3]; 3],
    eigenvalues: [f64; 3],
    /// Quadrature error bound, or the largest Monte Carlo standard error.
    error_estimate: f64,
    near_singular: bool,
}

pub fn info(flags: InfoArgs) -> Result<u8, CliError> {
    let file: InfoArgs = with_file(&flags.config)?;
    let a = overlay!(flags, file; gamma, mu, sigma, mc, seed, out);
    let theta = theta_from(a.gamma, a.mu, a.sigma)?;
    let (f, method) = match a.mc {
        Some(n) => (fisher_information_mc(&theta, n, a.seed.unwrap_or(0))?, "monte_carlo"),
        None => (fisher_information(&theta)?, "quadrature"),
    };
    let inv = f.inverse()?;
    let report = InfoReport {
        theta,
        method,
        fisher: f.entries,
        inverse: std::array::from_fn(|i| std::array::from_fn(|j| inv[(i, j)])),
        eigenvalues: f.eigenvalues(),
        error_estimate: f.quadrature_error,
        near_singular: f.near_singular,
    };
    if f.near_singular {
        eprintln!("gevfit: warning: shape within {} of -1/2; the information is nearly singular", gevfit::fisher::NEAR_SINGULAR_BAND);
    }
    emit(&json(&report)?, a.out.as_deref())?;
    Ok(exit::OK)
}

pub fn sample(flags: SampleArgs) -> Result<u8, CliError> {
    let file: SampleArgs = with_file(&flags.config)?;
    let a = overlay!(flags, file; gamma, mu, sigma, n, seed, out);
    let theta = theta_from(a.gamma, a.mu, a.sigma)?;
    let n = a.n.ok_or_else(|| CliError::input("missing -n"))?;
    let s = gev::sample(&theta, n, a.seed.unwrap_or(0))?;
    let mut text = String::with_capacity(24 * n);
    for &x in s.values() {
        text.push_str(&fmt_f64(x));
        text.push('\n');
    }
    emit(&text, a.out.as_deref())?;
    Ok(exit::OK)
}
