//! `gevfit`: fit GEV data files, run Monte Carlo studies, and print
//! regularity diagnostics.
//!
//! Exit codes: 0 ok, 1 input error, 2 degenerate or undefined, 3 infeasible.

mod args;
mod commands;
mod config;
mod input;

use std::ffi::OsString;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use args::{Cli, Command};

/// Failure with the exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        Self { code: exit::INPUT, message: message.into() }
    }
}

impl From<gevfit::GevError> for CliError {
    fn from(e: gevfit::GevError) -> Self {
        use gevfit::GevError::*;
        let code = match e {
            EmptySample | DegenerateSample(_) | InformationUndefined { .. } | Singular(_) | NoStandardErrors(_) => {
                exit::UNDEFINED
            }
            Infeasible(_) => exit::INFEASIBLE,
            _ => exit::INPUT,
        };
        Self { code, message: e.to_string() }
    }
}

pub mod exit {
    pub const OK: u8 = 0;
    pub const INPUT: u8 = 1;
    pub const UNDEFINED: u8 = 2;
    pub const INFEASIBLE: u8 = 3;
}

/// Parse `argv` and run the subcommand; returns the process exit code.
pub fn run<I, T>(argv: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => exit::OK,
                _ => exit::INPUT,
            };
        }
    };
    let result = match cli.command {
        Command::Fit(a) => commands::fit(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Dqm(a) => commands::dqm(a),
        Command::Support(a) => commands::support(a),
        Command::Info(a) => commands::info(a),
        Command::Sample(a) => commands::sample(a),
    };
    result.unwrap_or_else(|e| {
        eprintln!("gevfit: {}", e.message);
        e.code
    })
}

fn main() -> ExitCode {
    ExitCode::from(run(std::env::args_os()))
}
