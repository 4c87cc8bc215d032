use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, NeatError>;

#[derive(Debug, Error)]
pub enum NeatError {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("incompatible genomes: {0}")]
    IncompatibleGenome(String),
    #[error("corrupt genome: {0}")]
    CorruptGenome(String),
    #[error("no data: {0}")]
    NoData(String),
    #[error("empty window: confusion counts are all zero")]
    EmptyWindow,
    #[error("invalid record: {0}")]
    InvalidRecord(String),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },
    #[error("cannot access {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl NeatError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        NeatError::Io {
            path: path.into(),
            source,
        }
    }
}
