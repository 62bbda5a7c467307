use thiserror::Error;

/// Errors produced by sketch construction, kernel approximation and the solvers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SketchError {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("oracle guard exceeded: {0}")]
    GuardExceeded(String),

    #[error("undefined value: {0}")]
    UndefinedValue(String),

    #[error("no convergence after {iterations} iterations (last residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("preconditioner failure: {0}")]
    PreconditionerFailure(String),
}

pub type Result<T> = std::result::Result<T, SketchError>;

pub(crate) fn check_open_unit(name: &str, value: f64) -> Result<()> {
    if value > 0.0 && value < 1.0 {
        Ok(())
    } else {
        Err(SketchError::InvalidParameter(format!(
            "{name} must lie in (0, 1), got {value}"
        )))
    }
}
