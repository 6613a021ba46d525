use std::path::PathBuf;

use thiserror::Error;

use crate::store::StoreError;

#[derive(Debug, Error)]
pub enum SaeError {
    #[error("invalid SAE configuration: {}", .0.join("; "))]
    Config(Vec<String>),

    #[error("{what}: expected dimension {expected}, found {found}")]
    Dimension {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("normalization scale is zero (constant dataset)")]
    ZeroScale,

    #[error("empty batch")]
    EmptyBatch,

    #[error(
        "non-finite loss at step {step} (recon {recon}, aux {aux}); max |z| = {max_abs_latent}, {dead_latents} dead latents"
    )]
    NonFinite {
        step: u64,
        recon: f64,
        aux: f64,
        max_abs_latent: f64,
        dead_latents: usize,
    },

    #[error("unpaired records: {}", format_keys(.missing))]
    Pairing { missing: Vec<(String, u32)> },

    #[error("access point {0:?} not present in the table")]
    UnknownPoint(String),

    #[error("checkpoint {path}: {reason}")]
    Checkpoint { path: PathBuf, reason: String },

    #[error("i/o error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Store(#[from] StoreError),
}

fn format_keys(keys: &[(String, u32)]) -> String {
    let shown: Vec<String> = keys
        .iter()
        .take(20)
        .map(|(s, t)| format!("({s}, {t})"))
        .collect();
    let more = keys.len().saturating_sub(shown.len());
    if more > 0 {
        format!("{} and {more} more", shown.join(", "))
    } else {
        shown.join(", ")
    }
}

pub type Result<T, E = SaeError> = std::result::Result<T, E>;
