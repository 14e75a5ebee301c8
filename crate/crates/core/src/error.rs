use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: invalid JSON: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}: truncated file, expected {expected} bytes but found {actual}")]
    Truncated {
        path: PathBuf,
        expected: u64,
        actual: u64,
    },
    #[error("{path}: {actual} bytes but header declares {expected}")]
    TrailingBytes {
        path: PathBuf,
        expected: u64,
        actual: u64,
    },
    #[error("{path}: bad magic {found:?}, expected {expected:?}")]
    BadMagic {
        path: PathBuf,
        expected: [u8; 4],
        found: [u8; 4],
    },
    #[error("{path}: unsupported version {found}")]
    BadVersion { path: PathBuf, found: u32 },
    #[error("video {video_id}: dimension mismatch, expected {expected} but found {found}")]
    DimMismatch {
        video_id: String,
        expected: usize,
        found: usize,
    },
    #[error("video {video_id}: non-finite value in {what}")]
    NonFinite { video_id: String, what: String },
    #[error("zero-norm vector: {0}")]
    ZeroVector(String),
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("video id sets differ; only in predictions: {only_pred:?}; only in ground truth: {only_gt:?}")]
    IdMismatch {
        only_pred: Vec<String>,
        only_gt: Vec<String>,
    },
    #[error("non-finite gradient in tensor {0}")]
    NonFiniteGradient(String),
    #[error("training diverged at epoch {epoch}")]
    Diverged { epoch: usize },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }
}
