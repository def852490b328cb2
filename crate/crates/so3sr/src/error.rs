use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Input outside the documented domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// Request beyond what the implementation supports (degree budget, grid size, ...).
    #[error("capability error: {0}")]
    Capability(String),
    #[error("saturation: placed {achieved} of {requested} points after {tries} tries")]
    Saturation {
        achieved: usize,
        requested: usize,
        tries: usize,
    },
    #[error("singular interpolation matrix (condition estimate {condition:.3e})")]
    Singular { condition: f64 },
    #[error("internal consistency error: {0}")]
    Consistency(String),
    #[error("usage error: {0}")]
    Usage(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
