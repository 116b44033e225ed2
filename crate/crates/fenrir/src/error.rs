use thiserror::Error;

/// Errors produced by the solver, regression, and estimation layers.
///
/// Divergence-type errors are routinely triggered by optimisers probing bad
/// parameter regions; callers in the estimation layer translate them into a
/// large finite penalty instead of aborting.
#[derive(Error, Debug, Clone)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("state diverged (non-finite) at step {step}, t = {t}")]
    Diverged { step: usize, t: f64 },

    #[error("innovation covariance not positive definite (min diagonal {min_diag:e})")]
    NotPositiveDefinite { min_diag: f64 },

    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepSizeUnderflow { t: f64, h: f64 },

    #[error("step budget of {max_steps} exhausted at t = {t}")]
    MaxStepsExceeded { t: f64, max_steps: usize },

    #[error("observation time {t} is not on the solver grid")]
    TimeNotOnGrid { t: f64 },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("io error: {0}")]
    Io(String),

    #[error("{0}")]
    Config(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
