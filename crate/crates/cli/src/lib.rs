//! Configuration-driven experiments for the `fracnls` solvers.
//!
//! Every command reads an [`ExperimentConfig`], builds the benchmark systems
//! or the full time integration it describes, and writes CSV tables plus a
//! `run.json` manifest to an output directory. The computational entry
//! points ([`benchmark`], [`commands`]) return structured results so they can
//! be driven from tests without parsing files.

pub mod benchmark;
pub mod commands;
pub mod config;
pub mod output;

use std::process::ExitCode;

pub use commands::Command;
pub use config::ExperimentConfig;

/// Package version written to every manifest.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("solver error: {0}")]
    Solver(#[from] fracnls::Error),
    #[error("io error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Config(_) => 2,
            CliError::Solver(_) => 3,
            CliError::Io(_) => 1,
        })
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
