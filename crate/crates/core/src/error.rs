use thiserror::Error;

/// Errors produced by the simulation and verification engine.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// An iterative numerical procedure failed to converge.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// Invalid run configuration.
    #[error("config error: {0}")]
    Config(String),

    /// Rejection sampling exhausted its attempt budget.
    #[error("sampling error: {0}")]
    Sampling(String),

    /// A tree encoding failed validation.
    #[error("structural error: {0}")]
    Structure(String),

    /// Calibration diagnostics exceeded their thresholds.
    #[error("calibration error: {0}")]
    Calibration(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
