//! Command-line front end: data ingestion, configuration, orchestration of
//! the simulation/fitting/selection machinery, and report emission.

pub mod commands;
pub mod config;
pub mod dataset;

use thiserror::Error;

/// CLI-level errors, each mapped to a process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, config file, or parameter combinations (exit 2).
    #[error("configuration error: {0}")]
    Config(String),
    /// Input data problems (exit 3).
    #[error("data error: {0}")]
    Data(String),
    /// Numerical or solver failures (exit 4).
    #[error("numerical error: {0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Numeric(_) => 4,
        }
    }
}

impl From<quantar::Error> for CliError {
    fn from(e: quantar::Error) -> Self {
        use quantar::Error::*;
        match &e {
            InvalidParameter(_) | Domain(_) => CliError::Config(e.to_string()),
            InsufficientData { .. } => CliError::Data(e.to_string()),
            Degenerate { .. } => CliError::Numeric(format!(
                "{e}; the series may be constant or collinear, check the input column"
            )),
            Stationarity(_) | Convergence(_) | UndefinedMoment(_) | Solver(_)
            | FailureBudget { .. } => CliError::Numeric(e.to_string()),
        }
    }
}
