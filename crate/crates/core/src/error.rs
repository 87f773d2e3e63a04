//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by any module of the crate.
///
/// Variants split into two families: input/contract violations
/// (`UnsupportedFormat` through `InvalidParameter`) and numerical failures
/// (`NumericalFailure` through `NonConvergence`). The CLI maps the first
/// family to exit code 2 and the second to exit code 3.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),
    #[error("malformed input: {0}")]
    MalformedInput(String),
    #[error("asymmetric input: {0}")]
    AsymmetricInput(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("instance too large: {0}")]
    TooLarge(String),
    #[error("instance too small: {0}")]
    TooSmall(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("step too large: {0}")]
    StepTooLarge(String),
    #[error("did not converge: {0}")]
    NonConvergence(String),
}

impl Error {
    /// True for errors caused by bad input rather than a numerical breakdown.
    pub fn is_input_error(&self) -> bool {
        !matches!(
            self,
            Error::NumericalFailure(_) | Error::StepTooLarge(_) | Error::NonConvergence(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
