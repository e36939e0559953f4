use std::fmt;
use std::process::ExitCode;

use gauss_eot_core::Error;

/// A failed command and the exit status it maps to:
/// 2 for bad input, 3 for a numerical precondition, 4 for non-convergence.
#[derive(Debug)]
pub enum CliError {
    Input(String),
    Numerical(String),
    NotConverged(String),
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::NotConverged(_) => 4,
        }
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(self.code())
    }

    pub fn input(msg: impl Into<String>) -> Self {
        CliError::Input(msg.into())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(m) => write!(f, "input error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical error: {m}"),
            CliError::NotConverged(m) => write!(f, "{m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::InvalidInput(_) | Error::NotPsd { .. } | Error::Unsupported(_) => {
                CliError::Input(msg)
            }
            Error::NotConverged { .. } | Error::BarycenterNotConverged(_) => {
                CliError::NotConverged(msg)
            }
            Error::SingularMatrix
            | Error::NotPositiveDefinite
            | Error::NotIntegrable
            | Error::InfeasibleDual
            | Error::InfeasiblePrimal { .. }
            | Error::NumericalInconsistency(_) => CliError::Numerical(msg),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Input(e.to_string())
    }
}
