use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value is outside the range the library supports.
    #[error("configuration error: {0}")]
    Config(String),
    /// An argument does not fit the object it is applied to.
    #[error("argument error: {0}")]
    Argument(String),
    /// An operation was called in a state that does not allow it.
    #[error("usage error: {0}")]
    Usage(String),
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
