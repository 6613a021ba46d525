use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ProbeError {
    #[error("degenerate task: {0}")]
    DegenerateTask(String),

    #[error("{what}: expected {expected}, found {found}")]
    Dimension { what: String, expected: usize, found: usize },

    #[error("no training rows")]
    Empty,

    #[error("reference set is empty")]
    EmptyReferences,

    #[error("target {index} has box {bbox:?}; components must lie in [0, 1] with positive width and height")]
    InvalidBox { index: usize, bbox: [f64; 4] },

    #[error("class label {label} at target {index} is outside 0..{n_classes}")]
    InvalidClass { index: usize, label: usize, n_classes: usize },

    #[error("trajectory needs at least 3 layers, got {0}")]
    TrajectoryTooShort(usize),

    #[error("probe loss became non-finite at epoch {epoch}")]
    NonFinite { epoch: usize },

    #[error("invalid probe config: {}", .0.join("; "))]
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
    Eval(#[from] crate::eval::EvalError),

    #[error(transparent)]
    Store(#[from] crate::store::StoreError),
}

pub type Result<T, E = ProbeError> = std::result::Result<T, E>;
