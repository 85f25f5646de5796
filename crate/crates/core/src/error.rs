use std::path::{Path, PathBuf};

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: malformed record: {message}")]
    MalformedRecord {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("label `{label}` is not part of scheme `{scheme}`")]
    UnknownLabel { label: String, scheme: String },

    #[error("document `{doc_id}` sentence {index} has no `{level}` label")]
    MissingLabel {
        doc_id: String,
        index: usize,
        level: String,
    },

    #[error("document `{0}` has no sentences")]
    EmptyDocument(String),

    #[error("document `{doc_id}` sentence {index} is empty")]
    EmptySentence { doc_id: String, index: usize },

    #[error("duplicate document id `{0}`")]
    DuplicateDocument(String),

    #[error("invalid label scheme: {0}")]
    InvalidScheme(String),

    #[error("invalid split: {0}")]
    InvalidSplit(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("zero-norm vector in {0}")]
    ZeroNorm(&'static str),

    #[error("label index {index} out of range for {count} labels")]
    LabelOutOfRange { index: usize, count: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unknown registry key `{0}`")]
    UnknownKey(String),

    #[error("prototype error: {0}")]
    Prototype(String),

    #[error("metric error: {0}")]
    Metric(String),

    #[error("training diverged at epoch {epoch}, document `{doc_id}`: loss is {loss}")]
    Diverged {
        epoch: usize,
        doc_id: String,
        loss: f64,
    },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("fingerprint mismatch: checkpoint has {checkpoint}, config has {config}")]
    FingerprintMismatch { checkpoint: String, config: String },

    #[error("{}: {source}", path.display())]
    File {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    TomlDe(#[from] toml::de::Error),

    #[error(transparent)]
    TomlSer(#[from] toml::ser::Error),
}

impl Error {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// Wraps an I/O error with the path it concerns.
    pub fn file(path: impl AsRef<Path>) -> impl FnOnce(std::io::Error) -> Self {
        let path = path.as_ref().to_path_buf();
        move |source| Error::File { path, source }
    }
}
