//! Error types shared across the crate.

use thiserror::Error;

use crate::solver::SolveTrace;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("validation failed: {0}")]
    Validation(String),

    /// The input left the Gamma_k cone. `first_failing_j` is the smallest j
    /// with S_j <= margin; `point` is the flat grid index for field-level
    /// checks; `argument` names the offending entry of a matrix list.
    #[error("cone violation: S_{first_failing_j} non-positive{}{}",
        point.map(|p| format!(" at grid point {p}")).unwrap_or_default(),
        argument.map(|a| format!(" in argument {a}")).unwrap_or_default())]
    ConeViolation {
        first_failing_j: usize,
        point: Option<usize>,
        argument: Option<usize>,
    },

    #[error("compatibility violated: {0}")]
    Compatibility(String),

    #[error("right-hand side not strictly positive (first offending grid point {point})")]
    Positivity { point: usize },

    #[error("Newton backtracking exhausted at residual {residual:.3e}")]
    StepFailure {
        residual: f64,
        trace: Box<SolveTrace>,
    },

    #[error("Newton did not converge within iteration budget (residual {residual:.3e})")]
    NonConvergence {
        residual: f64,
        trace: Box<SolveTrace>,
    },

    #[error("continuation step underflow at t = {t:.6}")]
    ContinuationFailure { t: f64, trace: Box<SolveTrace> },

    #[error("linear solve failed after {iterations} iterations (relative residual {residual:.3e})")]
    LinearSolve { iterations: usize, residual: f64 },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Stable CLI exit-code classification: 1 for usage/i/o, 2 for
    /// mathematical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parameter(_) | Error::Validation(_) | Error::Io(_) | Error::Json(_) => 1,
            _ => 2,
        }
    }

    /// Short machine-readable name for manifests and FFI status codes.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Parameter(_) => "parameter",
            Error::Validation(_) => "validation",
            Error::ConeViolation { .. } => "cone-violation",
            Error::Compatibility(_) => "compatibility",
            Error::Positivity { .. } => "positivity",
            Error::StepFailure { .. } => "step-failure",
            Error::NonConvergence { .. } => "non-convergence",
            Error::ContinuationFailure { .. } => "continuation-failure",
            Error::LinearSolve { .. } => "linear-solve",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}
