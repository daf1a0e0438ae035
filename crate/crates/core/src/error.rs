use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Malformed {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{0}: file contains no records")]
    EmptyFile(PathBuf),

    #[error("empty corpus")]
    EmptyCorpus,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("sequence of length {len} exceeds max_len {max_len}")]
    SequenceTooLong { len: usize, max_len: usize },

    #[error("embedding lexicon has no vector for gloss {0:?}")]
    MissingGlossEmbedding(String),

    #[error("embedding dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("length mismatch: {0}")]
    LengthMismatch(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("iteration {k}: {source}")]
    Iteration {
        k: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable category, used by the CLI error line.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Malformed { .. } => "malformed",
            Error::EmptyFile(_) => "empty_file",
            Error::EmptyCorpus => "empty_corpus",
            Error::Config(_) => "config",
            Error::SequenceTooLong { .. } => "sequence_too_long",
            Error::MissingGlossEmbedding(_) => "missing_gloss_embedding",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::LengthMismatch(_) => "length_mismatch",
            Error::Checkpoint(_) => "checkpoint",
            Error::Iteration { source, .. } => source.kind(),
            Error::Json(_) => "json",
        }
    }
}
