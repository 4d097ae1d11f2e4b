//! Flag definitions. Every subcommand also takes `--config FILE`, a JSON
//! object whose keys are the long flag names in snake case; flags given
//! on the command line take precedence over the file.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

#[derive(Debug, Parser)]
#[command(name = "gevfit", version, about = "Generalized extreme-value fitting and diagnostics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Maximum likelihood fit of a one-column data file.
    Fit(FitArgs),
    /// Monte Carlo study driven by a JSON configuration.
    Simulate(SimulateArgs),
    /// Differentiability-in-quadratic-mean report at a parameter.
    Dqm(DqmArgs),
    /// Common support over an epsilon cube and its outside mass.
    Support(SupportArgs),
    /// Fisher information matrix and its inverse.
    Info(InfoArgs),
    /// Draw a seeded sample, one value per line.
    Sample(SampleArgs),
}

fn parse_pair(s: &str) -> Result<[f64; 2], String> {
    let v = parse_list(s)?;
    <[f64; 2]>::try_from(v.as_slice()).map_err(|_| format!("expected LO,HI, got `{s}`"))
}

fn parse_triple(s: &str) -> Result<[f64; 3], String> {
    let v = parse_list(s)?;
    <[f64; 3]>::try_from(v.as_slice()).map_err(|_| format!("expected three comma-separated numbers, got `{s}`"))
}

fn parse_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',').map(|p| p.trim().parse::<f64>().map_err(|_| format!("`{p}` is not a number"))).collect()
}

#[derive(Debug, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitArgs {
    /// Data file: CSV with one numeric column and optional header, or one number per line.
    pub input: Option<PathBuf>,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Shape range of the fit box, `LO,HI`.
    #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
    pub gamma_range: Option<[f64; 2]>,
    #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
    pub mu_range: Option<[f64; 2]>,
    #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
    pub sigma_range: Option<[f64; 2]>,
    /// Tolerance on the max-norm of the mean score.
    #[arg(long)]
    pub grad_tol: Option<f64>,
    #[arg(long)]
    pub multistart: Option<usize>,
    #[arg(long)]
    pub max_newton: Option<usize>,
    #[arg(long)]
    pub simplex_evals: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Simulation configuration (JSON).
    pub config: PathBuf,
    /// Directory receiving `report.json` and `replicates.csv`.
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub replicates: Option<usize>,
    /// Comma-separated sample sizes.
    #[arg(long, value_delimiter = ',')]
    pub n_grid: Option<Vec<usize>>,
    #[arg(long)]
    pub ci_level: Option<f64>,
}

#[derive(Debug, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DqmArgs {
    #[arg(long, allow_negative_numbers = true)]
    pub gamma: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub mu: Option<f64>,
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Coarsest step exponent: `t = 2^-k_min`.
    #[arg(long)]
    pub k_min: Option<i32>,
    #[arg(long)]
    pub k_max: Option<i32>,
    /// Direction with unit max-norm, `G,M,S`; repeatable. Defaults to the coordinate axes.
    #[arg(long, value_parser = parse_triple, allow_hyphen_values = true)]
    pub direction: Option<Vec<[f64; 3]>>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SupportArgs {
    #[arg(long, allow_negative_numbers = true)]
    pub gamma: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub mu: Option<f64>,
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Half-width of the max-norm cube around the parameter.
    #[arg(long)]
    pub eps: Option<f64>,
    /// The mass table runs over `eps = 2^-k`, `k = k_min..=k_max`.
    #[arg(long)]
    pub k_min: Option<i32>,
    #[arg(long)]
    pub k_max: Option<i32>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InfoArgs {
    #[arg(long, allow_negative_numbers = true)]
    pub gamma: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub mu: Option<f64>,
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Monte Carlo estimate from this many draws instead of quadrature.
    #[arg(long)]
    pub mc: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleArgs {
    #[arg(long, allow_negative_numbers = true)]
    pub gamma: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub mu: Option<f64>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(short, long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}
