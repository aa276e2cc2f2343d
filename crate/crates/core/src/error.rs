use thiserror::Error;

/// Errors raised by the numerical and network routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not positive definite (pivot {pivot} at index {index})")]
    NotPositiveDefinite { index: usize, pivot: f64 },

    #[error("matrix is not Hermitian (max asymmetry {max_asymmetry:e})")]
    NotHermitian { max_asymmetry: f64 },

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: String, found: String },

    #[error("no convergence after {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error("gain vector is zero and cannot be normalized")]
    ZeroGain,

    #[error("every relay has a zero channel coefficient")]
    ZeroChannel,

    #[error("noise covariance is singular")]
    SingularK,

    #[error("gain violates the stage power constraint (relative residual {residual:e})")]
    InfeasibleGain { residual: f64 },

    #[error("{redrawn} of {trials} trials at sweep value {sweep_value} were redrawn after numerical failures")]
    TooManyRedraws {
        sweep_value: f64,
        redrawn: usize,
        trials: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn dim_mismatch(expected: impl ToString, found: impl ToString) -> Error {
    Error::DimensionMismatch {
        expected: expected.to_string(),
        found: found.to_string(),
    }
}
