//! Text embedding providers.

use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use sha2::{Digest, Sha256};

use super::error::EmbedError;
use crate::store::{FeatureDataset, PointFilter, StoreError};

/// Maps text to a vector. Implementations must be deterministic per string.
pub trait EmbeddingProvider: Send + Sync {
    fn id(&self) -> &str;
    fn dim(&self) -> usize;
    fn embed(&self, text: &str) -> Result<Vec<f64>, EmbedError>;
}

/// Lowercase and collapse runs of whitespace.
pub fn canonical_text(text: &str) -> String {
    text.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn l2_normalize(v: &mut [f64]) -> bool {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n == 0.0 || !n.is_finite() {
        return false;
    }
    v.iter_mut().for_each(|x| *x /= n);
    true
}

pub const DEFAULT_HASH_SEED: u64 = 0x5eed_0f_7e57;

/// Deterministic embedder for tests and desk-scale experiments: a unit
/// Gaussian vector seeded by a SHA-256 of the canonical text. Equal strings
/// map to equal vectors; distinct strings are nearly orthogonal in high
/// dimension.
#[derive(Debug, Clone)]
pub struct HashedEmbedder {
    dim: usize,
    seed: u64,
}

impl HashedEmbedder {
    pub fn new(dim: usize) -> Self {
        Self::with_seed(dim, DEFAULT_HASH_SEED)
    }

    pub fn with_seed(dim: usize, seed: u64) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        Self { dim, seed }
    }

    pub fn vector(&self, text: &str) -> Vec<f64> {
        let mut hasher = Sha256::new();
        hasher.update(self.seed.to_le_bytes());
        hasher.update(canonical_text(text).as_bytes());
        let digest: [u8; 32] = hasher.finalize().into();
        let mut rng = ChaCha8Rng::from_seed(digest);
        let mut v: Vec<f64> = (0..self.dim).map(|_| StandardNormal.sample(&mut rng)).collect();
        l2_normalize(&mut v);
        v
    }
}

impl EmbeddingProvider for HashedEmbedder {
    fn id(&self) -> &str {
        "hashed"
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>, EmbedError> {
        Ok(self.vector(text))
    }
}

/// Hashed embedding with the default seed.
pub fn hashed_test_embedder(text: &str, dim: usize) -> Vec<f64> {
    HashedEmbedder::new(dim).vector(text)
}

/// Embeddings computed elsewhere (by a real text encoder) and stored in a
/// feature table: `sample_id` holds the text, `vector` the embedding.
#[derive(Debug, Clone)]
pub struct PrecomputedEmbeddings {
    id: String,
    dim: usize,
    table: HashMap<String, Vec<f64>>,
}

impl PrecomputedEmbeddings {
    pub fn from_pairs(id: impl Into<String>, pairs: impl IntoIterator<Item = (String, Vec<f64>)>) -> Result<Self, EmbedError> {
        let mut table = HashMap::new();
        let mut dim = None;
        for (text, mut v) in pairs {
            let expected = *dim.get_or_insert(v.len());
            if v.len() != expected {
                return Err(EmbedError::Dimension {
                    text,
                    expected,
                    found: v.len(),
                });
            }
            if !l2_normalize(&mut v) {
                return Err(EmbedError::ZeroNorm(text));
            }
            table.insert(text, v);
        }
        Ok(Self {
            id: id.into(),
            dim: dim.unwrap_or(0),
            table,
        })
    }

    /// Load every record of `point` from a stored table.
    pub fn from_table(id: impl Into<String>, dataset: &FeatureDataset, point: &str) -> Result<Self, StoreError> {
        let records = dataset.read_all(&PointFilter::one(point))?;
        Self::from_pairs(id, records.into_iter().map(|r| (r.sample_id, r.vector)))
            .map_err(|e| StoreError::Schema(e.to_string()))
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }
}

impl EmbeddingProvider for PrecomputedEmbeddings {
    fn id(&self) -> &str {
        &self.id
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>, EmbedError> {
        self.table
            .get(text)
            .cloned()
            .ok_or_else(|| EmbedError::Unknown(text.to_string()))
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
