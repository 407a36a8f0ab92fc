use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Invalid or inconsistent configuration (law parameters, lookahead, coupling requests, ...).
    #[error("configuration error: {0}")]
    Config(String),
    /// Argument outside the domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// A coefficient or kernel produced a non-finite value.
    #[error("numeric failure at step {step}: {message}")]
    Numeric { step: usize, message: String },
    /// The requested reduction or reference law is not available for this input.
    #[error("unsupported: {0}")]
    Unsupported(String),
    /// The quantity diverges (e.g. local time does not exist).
    #[error("divergence: {0}")]
    Divergent(String),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
