use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("precision loss: {0}")]
    PrecisionLoss(String),
    #[error("quadrature failed: {0}")]
    Quadrature(String),
    #[error("not a density matrix: {0}")]
    NotDensityMatrix(String),
    #[error("ill-conditioned basis: {0}")]
    IllConditioned(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for failures caused by floating-point limits rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::PrecisionLoss(_) | Error::Quadrature(_) | Error::IllConditioned(_)
        )
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
