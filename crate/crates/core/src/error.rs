use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, EdgError>;

#[derive(Debug, Error)]
pub enum EdgError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("reference matrix has zero norm")]
    ZeroNorm,

    #[error("factor is rank deficient")]
    RankDeficient,

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl EdgError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        EdgError::InvalidInput(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        EdgError::Io {
            path: path.into(),
            source,
        }
    }
}
