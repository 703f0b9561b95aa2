use thiserror::Error;

use crate::solver::TraceRecord;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("zero distance between {0}, path loss is undefined")]
    ZeroDistance(&'static str),

    #[error("weight rho[{index}] = {value} is not positive")]
    NonPositiveWeight { index: usize, value: f64 },

    /// The solver hit NaN/inf. The trace up to the failing iteration is kept.
    #[error("non-finite iterate at iteration {iteration}")]
    NonFinite {
        iteration: usize,
        trace: Vec<TraceRecord>,
    },

    #[error("linear system is not Hermitian positive definite: {0}")]
    NotPositiveDefinite(&'static str),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn dims(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }
}
