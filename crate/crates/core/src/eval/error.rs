use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("no embedding for {0:?}")]
    Unknown(String),
    #[error("embedding for {text:?} has dimension {found}, expected {expected}")]
    Dimension { text: String, expected: usize, found: usize },
    #[error("embedding for {0:?} has zero norm")]
    ZeroNorm(String),
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("class list is empty")]
    NoClasses,

    #[error("duplicate class {0:?}")]
    DuplicateClass(String),

    #[error("cannot embed prompt {prompt:?}: {source}")]
    Prompt {
        prompt: String,
        #[source]
        source: EmbedError,
    },

    #[error("invalid box {bbox:?} in sample {sample_id:?}")]
    InvalidBox { sample_id: String, bbox: [f64; 4] },

    #[error("{what} {value} in sample {sample_id:?} is outside [0, 1]")]
    InvalidScore { sample_id: String, what: &'static str, value: f64 },

    #[error("ground truth in sample {sample_id:?} has label {label:?} outside the class list")]
    UnknownLabel { sample_id: String, label: String },

    #[error("ground truth is empty")]
    EmptyGroundTruth,

    #[error("invalid evaluation config: {}", .0.join("; "))]
    Config(Vec<String>),

    #[error("{path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("i/o error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Store(#[from] crate::store::StoreError),
}

pub type Result<T, E = EvalError> = std::result::Result<T, E>;
