use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("insufficient coefficients: need {needed}, have {available}")]
    InsufficientCoefficients { needed: usize, available: usize },

    #[error("circulant eigenvalues are not real: imaginary residue {residue:e}")]
    NonRealSpectrum { residue: f64 },

    #[error("inner solve failed to converge after {iterations} iterations (relres {relres:e})")]
    InnerSolve { iterations: usize, relres: f64 },

    #[error("preconditioner application failed: {0}")]
    Preconditioner(Box<Error>),

    #[error("power iteration stagnated after {iterations} iterations")]
    PowerStagnation { iterations: usize },

    #[error("fixed-point iteration did not converge in {sweeps} sweeps (last change {change:e})")]
    FixedPoint { sweeps: usize, change: f64 },

    #[error("linear solve did not converge at time level {level}: relres {relres:e} after {iterations} iterations")]
    TimeLevel { level: usize, iterations: usize, relres: f64 },

    #[error("dense computation failed: {0}")]
    Dense(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter { name, reason: reason.into() }
}

pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
