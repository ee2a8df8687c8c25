use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = KngError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum KngError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("format error: {0}")]
    Format(String),
    #[error("validation error: {0}")]
    Validation(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("invalid state: {0}")]
    State(String),
    #[error("numeric failure on neuron {neuron}: {reason}")]
    Numeric { neuron: usize, reason: String },
    #[error("metric undefined: {0}")]
    UndefinedMetric(String),
}

impl KngError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        KngError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the CLI: 1 for validation/argument
    /// problems, 2 for I/O and file-format problems.
    pub fn exit_code(&self) -> i32 {
        match self {
            KngError::Io { .. } | KngError::Format(_) => 2,
            _ => 1,
        }
    }
}

macro_rules! bail {
    ($variant:ident, $($arg:tt)*) => {
        return Err($crate::error::KngError::$variant(format!($($arg)*)))
    };
}
pub(crate) use bail;
