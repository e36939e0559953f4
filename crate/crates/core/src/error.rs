use alloc::boxed::Box;
use alloc::string::String;

use crate::barycenter::BarycenterSolution;

/// Errors raised by the numerical routines.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("matrix is not positive semi-definite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPsd { min_eigenvalue: f64 },
    #[error("matrix is singular")]
    SingularMatrix,
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("no convergence after {iterations} iterations (last residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("barycenter iteration stopped after {} iterations with residual {:e}", .0.iterations, .0.residual)]
    BarycenterNotConverged(Box<BarycenterSolution>),
    #[error("quadratic potential is not integrable against the measure")]
    NotIntegrable,
    #[error("dual pair is infeasible")]
    InfeasibleDual,
    #[error("coupling matrix is not a strict contraction (operator norm {norm})")]
    InfeasiblePrimal { norm: f64 },
    #[error("numerical inconsistency: {0}")]
    NumericalInconsistency(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// True for the iteration-budget failures (`NotConverged` and its barycenter variant).
    pub fn is_convergence_failure(&self) -> bool {
        matches!(
            self,
            Error::NotConverged { .. } | Error::BarycenterNotConverged(_)
        )
    }
}

pub type Result<T> = core::result::Result<T, Error>;
