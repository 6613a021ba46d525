use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("schema error: {0}")]
    Schema(String),

    #[error("non-finite value in sample {sample_id:?} token {token_index} channel {channel}")]
    NonFinite {
        sample_id: String,
        token_index: u32,
        channel: usize,
    },

    #[error("access point {point_name:?}: expected dimension {expected}, found {found}")]
    DimensionMismatch {
        point_name: String,
        expected: usize,
        found: usize,
    },

    #[error("access point {point_name:?} declared with layer {expected} and {found}")]
    LayerMismatch {
        point_name: String,
        expected: u16,
        found: u16,
    },

    #[error("value in sample {sample_id:?} token {token_index} is not representable as f32")]
    Precision { sample_id: String, token_index: u32 },

    #[error("no records to write")]
    Empty,

    #[error("batch size must be at least 1")]
    BatchSize,

    #[error("corrupt table at {path}: {reason}")]
    Corrupt { path: PathBuf, reason: String },

    #[error("i/o error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parquet error at {path}: {source}")]
    Parquet {
        path: PathBuf,
        #[source]
        source: parquet::errors::ParquetError,
    },

    #[error(transparent)]
    Arrow(#[from] arrow_schema::ArrowError),
}

impl StoreError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        StoreError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parquet(path: impl Into<PathBuf>, source: parquet::errors::ParquetError) -> Self {
        StoreError::Parquet {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn corrupt(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        StoreError::Corrupt {
            path: path.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = StoreError> = std::result::Result<T, E>;
