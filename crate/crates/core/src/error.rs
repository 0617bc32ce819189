use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("schema error: {0}")]
    Schema(String),

    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("header mismatch: {0}")]
    HeaderMismatch(String),

    #[error("row {row}, column {column}: cannot parse {value:?} ({reason})")]
    Parse {
        row: usize,
        column: String,
        value: String,
        reason: String,
    },

    #[error("row {row}: unknown target label {value:?}")]
    UnknownLabel { row: usize, value: String },

    #[error("malformed input: {0}")]
    Malformed(String),

    #[error("empty dataset")]
    EmptyDataset,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("cannot split: {0}")]
    Split(String),

    #[error("class {0} is absent from the training data")]
    ClassAbsent(String),

    #[error("schema fingerprint mismatch: model expects {expected}, got {found}")]
    SchemaMismatch { expected: String, found: String },

    #[error("record does not match schema: {0}")]
    RecordShape(String),

    #[error("model file: {0}")]
    ModelFormat(String),

    #[error("record not found: {0}")]
    RecordNotFound(String),

    #[error("invalid class: {0}")]
    InvalidClass(String),

    #[error("invalid count: {0}")]
    InvalidCount(String),

    #[error("session log: {0}")]
    SessionLog(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Stable machine-readable code for API and CLI error payloads.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Schema(_) => "schema",
            Error::Io { .. } => "io",
            Error::HeaderMismatch(_) => "header_mismatch",
            Error::Parse { .. } => "parse",
            Error::UnknownLabel { .. } => "unknown_label",
            Error::Malformed(_) => "invalid_request",
            Error::EmptyDataset => "empty_dataset",
            Error::InvalidConfig(_) => "invalid_config",
            Error::Split(_) => "split",
            Error::ClassAbsent(_) => "class_absent",
            Error::SchemaMismatch { .. } => "schema_mismatch",
            Error::RecordShape(_) => "invalid_record",
            Error::ModelFormat(_) => "model_format",
            Error::RecordNotFound(_) => "record_not_found",
            Error::InvalidClass(_) => "invalid_class",
            Error::InvalidCount(_) => "invalid_count",
            Error::SessionLog(_) => "session_log",
        }
    }
}
