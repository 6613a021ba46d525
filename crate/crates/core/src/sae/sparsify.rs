//! Sparsifying nonlinearities.
//!
//! Ties at the selection boundary go to the lowest latent index (and, for
//! BatchTopK, the lowest row), so selections are reproducible bit for bit.

use std::cmp::Ordering;

use ndarray::{Array2, ArrayView2};

use super::config::{SaeConfig, SaeVariant};

/// Sparse codes together with the active index set of every row.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub codes: Array2<f64>,
    /// Active latents per row, ascending.
    pub active: Vec<Vec<usize>>,
}

impl Selection {
    /// Mean number of active latents per row.
    pub fn l0(&self) -> f64 {
        if self.active.is_empty() {
            return 0.0;
        }
        self.active.iter().map(Vec::len).sum::<usize>() as f64 / self.active.len() as f64
    }
}

/// Larger value first, then lower index.
fn rank(a: (usize, f64), b: (usize, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then(a.0.cmp(&b.0))
}

/// Indices of the `k` largest entries among `candidates`, ascending.
pub fn top_k_indices(values: &[f64], candidates: impl IntoIterator<Item = usize>, k: usize) -> Vec<usize> {
    let mut items: Vec<(usize, f64)> = candidates.into_iter().map(|i| (i, values[i])).collect();
    let k = k.min(items.len());
    if k == 0 {
        return Vec::new();
    }
    if k < items.len() {
        items.select_nth_unstable_by(k - 1, |&a, &b| rank(a, b));
        items.truncate(k);
    }
    let mut idx: Vec<usize> = items.into_iter().map(|(i, _)| i).collect();
    idx.sort_unstable();
    idx
}

/// Keep the `k` largest entries of a single vector, zeroing the rest.
pub fn topk(z: &[f64], k: usize) -> Vec<f64> {
    let mut out = vec![0.0; z.len()];
    for i in top_k_indices(z, 0..z.len(), k) {
        out[i] = z[i];
    }
    out
}

pub fn relu(z: &[f64]) -> Vec<f64> {
    z.iter().map(|&v| v.max(0.0)).collect()
}

fn from_active(z: ArrayView2<f64>, active: Vec<Vec<usize>>) -> Selection {
    let mut codes = Array2::zeros(z.raw_dim());
    for (r, idx) in active.iter().enumerate() {
        for &i in idx {
            codes[[r, i]] = z[[r, i]];
        }
    }
    Selection { codes, active }
}

pub fn topk_rows(z: ArrayView2<f64>, k: usize) -> Selection {
    let m = z.ncols();
    let active = z
        .rows()
        .into_iter()
        .map(|row| {
            let row = row.to_vec();
            top_k_indices(&row, 0..m, k)
        })
        .collect();
    from_active(z, active)
}

pub fn relu_rows(z: ArrayView2<f64>) -> Selection {
    let active = z
        .rows()
        .into_iter()
        .map(|row| row.iter().enumerate().filter(|(_, &v)| v > 0.0).map(|(i, _)| i).collect())
        .collect();
    from_active(z, active)
}

/// Keep the `k * rows` largest entries of the whole batch.
pub fn batch_topk(z: ArrayView2<f64>, k: usize) -> Selection {
    let (rows, m) = z.dim();
    let flat: Vec<f64> = z.iter().copied().collect();
    let keep = top_k_indices(&flat, 0..rows * m, k * rows);
    let mut active = vec![Vec::new(); rows];
    for f in keep {
        active[f / m].push(f % m);
    }
    from_active(z, active)
}

/// Apply the configured variant. Matryoshka uses per-row TopK; its nesting
/// lives in the loss.
pub fn sparsify(z: ArrayView2<f64>, config: &SaeConfig) -> Selection {
    match config.variant {
        SaeVariant::Relu => relu_rows(z),
        SaeVariant::TopK | SaeVariant::Matryoshka => topk_rows(z, config.k),
        SaeVariant::BatchTopK => batch_topk(z, config.k),
    }
}

/// Per-row sparsification for inference on single records. BatchTopK falls
/// back to per-row TopK so a record's code does not depend on its batch.
pub fn sparsify_rowwise(z: ArrayView2<f64>, config: &SaeConfig) -> Selection {
    match config.variant {
        SaeVariant::Relu => relu_rows(z),
        _ => topk_rows(z, config.k),
    }
}
