use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Operand dimensions disagree with what a kernel or layer expects.
    #[error("shape error: {0}")]
    Shape(String),

    /// A parameter or configuration value is outside its valid domain.
    #[error("configuration error: {0}")]
    Config(String),

    /// Input data violates a precondition (negative variance, empty class, ...).
    #[error("data error: {0}")]
    Data(String),

    #[error("file not found: {}", .0.display())]
    MissingFile(PathBuf),

    #[error("{}:{line}: malformed row: {reason}", path.display())]
    MalformedRow {
        path: PathBuf,
        line: u64,
        reason: String,
    },

    #[error("{}:{line}: unknown class label {label:?}", path.display())]
    UnknownLabel {
        path: PathBuf,
        line: u64,
        label: String,
    },

    #[error("cannot split {drivers} driver(s) into disjoint train and validation sets")]
    UnsatisfiableSplit { drivers: usize },

    #[error("unsupported image format: {0}")]
    UnsupportedImage(String),

    #[error("corrupt image: {0}")]
    CorruptImage(String),

    #[error("weight container: bad magic bytes {0:?}")]
    BadMagic([u8; 4]),

    #[error("weight container: unsupported version {0}")]
    UnsupportedVersion(u32),

    #[error("weight container: truncated while reading {0}")]
    Truncated(&'static str),

    #[error("weight container: expected tensor {expected:?}, found {found:?}")]
    NameMismatch { expected: String, found: String },

    #[error("weight container: tensor {name:?} has dims {found:?}, model expects {expected:?}")]
    ShapeMismatch {
        name: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },

    #[error("weight container: tensor {name:?} has unsupported dtype code {code}")]
    UnsupportedDtype { name: String, code: u8 },

    #[error("weight container: model has {expected} tensors, file has {found}")]
    TensorCount { expected: usize, found: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    /// True for errors raised while decoding or matching a weight container.
    pub fn is_weight_mismatch(&self) -> bool {
        matches!(
            self,
            Error::BadMagic(_)
                | Error::UnsupportedVersion(_)
                | Error::Truncated(_)
                | Error::NameMismatch { .. }
                | Error::ShapeMismatch { .. }
                | Error::UnsupportedDtype { .. }
                | Error::TensorCount { .. }
        )
    }
}
