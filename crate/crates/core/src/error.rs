use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{op}: dimension mismatch ({detail})")]
    Dimension { op: &'static str, detail: String },

    #[error("{}:{line}: {msg}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("literal triple ({entity}, {relation}): {msg}")]
    Literal {
        entity: String,
        relation: String,
        msg: String,
    },

    #[error("lookup failed: {0}")]
    Lookup(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn dim_err(op: &'static str, detail: impl Into<String>) -> Error {
    Error::Dimension {
        op,
        detail: detail.into(),
    }
}
