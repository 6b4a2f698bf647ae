//! Crate-wide error type with the exit-code classes the CLI needs.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("degenerate branch: {0}")]
    DegenerateBranch(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }

    /// Process exit code class: 2 config, 3 numerical, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Numerical(_) | Error::DegenerateBranch(_) => 3,
            Error::Io(_) => 4,
        }
    }
}

impl From<crate::quad::QuadError> for Error {
    fn from(e: crate::quad::QuadError) -> Self {
        Error::Numerical(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
