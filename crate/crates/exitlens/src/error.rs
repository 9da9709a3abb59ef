//! Crate-wide error type.
//!
//! Errors are split into two categories that map onto the CLI exit codes:
//! [`ErrorKind::Validation`] (exit code 1) covers malformed inputs detected
//! up front — manifests, datasets, parameters — while [`ErrorKind::Runtime`]
//! (exit code 2) covers failures during execution.

use std::path::PathBuf;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Broad failure category, used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad input: rejected before any real work happened.
    Validation,
    /// Failure while executing an otherwise valid request.
    Runtime,
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("manifest error in {path}: {reason}")]
    Manifest { path: PathBuf, reason: String },

    #[error("invalid model config: {reason}")]
    InvalidConfig { reason: String },

    #[error("missing tensor `{name}`")]
    MissingTensor { name: String },

    #[error("tensor `{name}` shape mismatch: expected {expected:?} ({expected_len} values), got {actual_len} values")]
    ShapeMismatch {
        name: String,
        expected: Vec<usize>,
        expected_len: usize,
        actual_len: usize,
    },

    #[error("non-finite value in {context}")]
    NonFinite { context: String },

    #[error("token id {id} out of range for vocab size {vocab}")]
    TokenOutOfRange { id: u32, vocab: u32 },

    #[error("context of length {len} exceeds max_seq_len {max}")]
    ContextOverflow { len: usize, max: usize },

    #[error("empty context")]
    EmptyContext,

    #[error("kv cache holds {cached} positions but context has only {context}")]
    StaleCache { cached: usize, context: usize },

    #[error("vector length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("zero-norm vector in {context}: similarity undefined")]
    ZeroNorm { context: String },

    #[error("layer {layer} out of range 1..={max}")]
    LayerOutOfRange { layer: usize, max: usize },

    #[error("no traces to aggregate")]
    EmptyTraces,

    #[error("trace does not carry {signal} data (capture level too low)")]
    MissingSignal { signal: String },

    #[error("similarity {value} outside [-1, 1]")]
    SimilarityOutOfRange { value: f64 },

    #[error("baseline adaptability score is zero")]
    ZeroBaseline,

    #[error("threshold grid is empty")]
    EmptyGrid,

    #[error("missing field `{field}` in {context}")]
    MissingField { field: String, context: String },

    #[error("reference `{value}` is not an integer")]
    MalformedReference { value: String },

    #[error("{0} is not supported")]
    Unsupported(String),

    #[error("dataset line {line}: {reason}")]
    DatasetLine { line: usize, reason: String },

    #[error("duplicate item id `{id}`")]
    DuplicateId { id: String },

    #[error("trace archive error: {reason}")]
    ArchiveFormat { reason: String },

    #[error("invalid parameter: {reason}")]
    InvalidParam { reason: String },
}

impl Error {
    /// Category of the failure; drives the CLI exit code.
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Io { .. } | Error::NonFinite { .. } | Error::ZeroNorm { .. } => {
                ErrorKind::Runtime
            }
            _ => ErrorKind::Validation,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
