use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}:{line}: grade {grade} outside 0..=3")]
    GradeRange {
        path: PathBuf,
        line: usize,
        grade: i64,
    },

    #[error("duplicate id `{0}`")]
    DuplicateId(String),

    #[error("vector `{id}` has dimension {found}, expected {expected}")]
    DimensionMismatch {
        id: String,
        expected: usize,
        found: usize,
    },

    #[error("unknown id `{0}`")]
    MissingId(String),

    #[error("unknown document ordinal {0}")]
    UnknownOrdinal(usize),

    #[error("cannot build an index over an empty corpus")]
    EmptyCorpus,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("query id mismatch: `{0}` vs `{1}`")]
    QueryMismatch(String, String),

    #[error("pseudo-relevance feedback needs at least one feedback passage")]
    EmptyFeedback,

    #[error("query `{0}` has no vector")]
    MissingQueryVector(String),

    #[error("{0} index not loaded")]
    MissingIndex(&'static str),

    #[error("invalid index format: {0}")]
    Format(String),

    #[error("{0} already exists; pass --force to overwrite")]
    OutputExists(PathBuf),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}
