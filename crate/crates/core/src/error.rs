use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument fell outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A configuration was internally inconsistent.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// A file could not be parsed. `line` is 1-based when known.
    #[error("{path}:{line}: {msg}", path = .path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    /// A file or stream did not have the expected format.
    #[error("format error: {0}")]
    Format(String),

    #[error("fit error: {0}")]
    Fit(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn config(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}
