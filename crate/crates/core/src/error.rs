use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("malformed problem file (line {line}): {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    /// FISTA ran out of iterations. Carries the last iterate so callers can inspect it.
    #[error("FISTA did not converge in {iterations} iterations (gradient-mapping norm {residual:e})")]
    NotConverged {
        iterations: usize,
        residual: f64,
        last_iterate: Vec<f64>,
    },

    #[error("objective is not finite at state {state:?}")]
    NonFiniteObjective { state: Vec<f64> },

    #[error("quadrature did not reach the requested accuracy (estimated error {estimated_error:e} after {evaluations} intervals)")]
    Quadrature { estimated_error: f64, evaluations: usize },

    #[error("degenerate chain: {0}")]
    DegenerateChain(String),

    #[error("support partition mismatch: {0}")]
    Partition(String),

    #[error("uniqueness of the minimizer is not certified (singular Gram matrix on S ∪ ∂I0)")]
    NotCertified,

    #[error("bias and MSE targets are inconsistent: T(b) = {temp_from_bias:e}, T(MSE) = {temp_from_mse:e}")]
    InconsistentTarget { temp_from_bias: f64, temp_from_mse: f64 },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    /// True for failures of a numerical routine, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NotConverged { .. }
                | Error::NonFiniteObjective { .. }
                | Error::Quadrature { .. }
                | Error::DegenerateChain(_)
                | Error::NotCertified
                | Error::InconsistentTarget { .. }
        )
    }
}
