use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("input error: {0}")]
    Input(String),
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("quadrature did not reach tolerance {tolerance:e} (estimate {estimate:e})")]
    Accuracy { tolerance: f64, estimate: f64 },
    #[error("internal consistency error: {0}")]
    Internal(String),
    #[error("resource limit: {0}")]
    Resource(String),
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
