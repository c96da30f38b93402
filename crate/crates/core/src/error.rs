use thiserror::Error;

/// Failure classes of the pipeline. The CLI maps them to exit codes 2, 3 and 4.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    /// Inputs outside the admissible domain.
    #[error("{0}")]
    Config(String),
    /// A numerical stage did not meet its tolerance.
    #[error("{0}")]
    Numerical(String),
    /// A computed object violates a structural invariant.
    #[error("{0}")]
    Invariant(String),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }

    pub(crate) fn invariant(msg: impl Into<String>) -> Self {
        Error::Invariant(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
