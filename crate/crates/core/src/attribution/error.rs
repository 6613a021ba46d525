use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum AttributionError {
    #[error("store dimension {found} does not match SAE input dimension {expected}")]
    Dimension { expected: usize, found: usize },

    #[error("no records for access point {0:?}")]
    Empty(String),

    #[error("cannot merge partial results with n={left} and n={right} or latent counts {left_m} and {right_m}")]
    Incompatible { left: usize, right: usize, left_m: usize, right_m: usize },

    #[error("{path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("i/o error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Sae(#[from] crate::sae::SaeError),

    #[error(transparent)]
    Store(#[from] crate::store::StoreError),
}

pub type Result<T, E = AttributionError> = std::result::Result<T, E>;

pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> AttributionError {
    let path = path.into();
    move |source| AttributionError::Io { path, source }
}
