use std::io;

use thiserror::Error;

/// Failures of a CLI run, each mapped to a process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("numerical failure: {0}")]
    Numeric(wva_core::Error),
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Io(_) | CliError::Csv(_) => 1,
        }
    }
}

impl From<wva_core::Error> for CliError {
    fn from(e: wva_core::Error) -> Self {
        use wva_core::Error as E;
        match e {
            E::InvalidParameter(_)
            | E::OrthogonalPostselection { .. }
            | E::ModeMismatch
            | E::PremiseViolated(_) => CliError::Usage(e.to_string()),
            E::QuadratureFailure { .. }
            | E::NoConvergence { .. }
            | E::DivisionDegenerate { .. }
            | E::EnvelopeViolation { .. }
            | E::EmptyBatch => CliError::Numeric(e),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
