use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the toolkit.
///
/// Everything except [`Error::Io`] on an output path is caused by bad input,
/// which lets callers map failures onto exit codes without string matching.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid schema: {0}")]
    Schema(String),
    #[error("invalid lexicon: {0}")]
    Lexicon(String),
    #[error("invalid template set: {0}")]
    Template(String),
    #[error("missing required column `{0}`")]
    MissingColumn(String),
    #[error("record {image_id}: {message}")]
    Record { image_id: String, message: String },
    #[error("embedding {id}: {message}")]
    Embedding { id: String, message: String },
    #[error("{0}")]
    Metric(String),
    #[error("{0}")]
    Classifier(String),
    #[error("extracted ids absent from ground truth: {}", .0.join(", "))]
    Join(Vec<String>),
    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.into(),
        }
    }
}
