use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("covariance factorization failed: {0}")]
    Covariance(String),

    #[error("compensated sums are not Cauchy under refinement; level gaps: {gaps:?}")]
    NonCauchy { gaps: Vec<f64> },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
