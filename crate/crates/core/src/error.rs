use std::path::PathBuf;

use crate::config::ValidationReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Validation(ValidationReport),

    #[error("config parse error on line {line}: {msg}")]
    ConfigParse { line: usize, msg: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {msg}")]
    Dataset {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("model format: {0}")]
    Format(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("training: {0}")]
    Training(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

impl Error {
    /// Process exit status: 2 for invalid configurations or inputs, 3 for
    /// unreadable files and malformed data.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Io { .. } | Error::Dataset { .. } | Error::Format(_) => 3,
            _ => 2,
        }
    }
}
