use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// Malformed input such as invalid counts, shapes or parameters.
    #[error("invalid input: {0}")]
    Validation(String),
    /// An iteration failed to converge or produced non-finite values.
    #[error("numerical failure: {0}")]
    Numeric(String),
    /// A density or kernel is unbounded at the requested point.
    #[error("pole: {0}")]
    Pole(String),
}

impl Error {
    /// Whether this error is a numerical (rather than input) failure.
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::Numeric(_) | Error::Pole(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn validation<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Validation(msg.into()))
}

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}

pub(crate) fn numeric<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Numeric(msg.into()))
}
