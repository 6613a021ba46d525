//! Dataset-level input normalization: `x' = (x - mean) / s` with
//! `s = mean(||x - mean||) / sqrt(d)`, so normalized inputs have an expected
//! norm of `sqrt(d)`.

use serde::{Deserialize, Serialize};

use super::error::{Result, SaeError};
use crate::store::{FeatureDataset, PointFilter};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: Vec<f64>,
    pub scale: f64,
}

impl NormStats {
    /// Two passes over `rows`; the closure must yield the same rows each time.
    pub fn fit<'a, I, F>(rows: F) -> Result<Self>
    where
        F: Fn() -> I,
        I: Iterator<Item = &'a [f64]>,
    {
        let mut mean: Vec<f64> = Vec::new();
        let mut n = 0usize;
        for row in rows() {
            if mean.is_empty() {
                mean = vec![0.0; row.len()];
            } else if row.len() != mean.len() {
                return Err(SaeError::Dimension {
                    what: "normalization input",
                    expected: mean.len(),
                    found: row.len(),
                });
            }
            for (m, &v) in mean.iter_mut().zip(row) {
                *m += v;
            }
            n += 1;
        }
        if n == 0 {
            return Err(SaeError::EmptyBatch);
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let norm_sum: f64 = rows().map(|row| centered_norm(row, &mean)).sum();
        Self::finish(mean, norm_sum, n)
    }

    /// Fit over every record of one access point in a stored table.
    pub fn fit_dataset(ds: &FeatureDataset, point: &str) -> Result<Self> {
        let filter = PointFilter::one(point);
        let d = ds
            .schema()
            .dimension_of(point)
            .ok_or_else(|| SaeError::UnknownPoint(point.to_string()))?;
        let mut mean = vec![0.0; d];
        let mut n = 0usize;
        for batch in ds.batches(&filter, 4096, None)? {
            for r in batch? {
                for (m, v) in mean.iter_mut().zip(&r.vector) {
                    *m += v;
                }
                n += 1;
            }
        }
        if n == 0 {
            return Err(SaeError::EmptyBatch);
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let mut norm_sum = 0.0;
        for batch in ds.batches(&filter, 4096, None)? {
            for r in batch? {
                norm_sum += centered_norm(&r.vector, &mean);
            }
        }
        Self::finish(mean, norm_sum, n)
    }

    fn finish(mean: Vec<f64>, norm_sum: f64, n: usize) -> Result<Self> {
        let d = mean.len() as f64;
        let scale = norm_sum / n as f64 / d.sqrt();
        let magnitude = mean.iter().map(|v| v * v).sum::<f64>().sqrt().max(1.0);
        // Deviations at rounding level mean the data is constant.
        if !(scale > 64.0 * f64::EPSILON * magnitude) || !scale.is_finite() {
            return Err(SaeError::ZeroScale);
        }
        Ok(Self { mean, scale })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.mean).map(|(v, m)| (v - m) / self.scale).collect()
    }

    pub fn apply_in_place(&self, x: &mut [f64]) {
        for (v, m) in x.iter_mut().zip(&self.mean) {
            *v = (*v - m) / self.scale;
        }
    }

    pub fn invert(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.mean).map(|(v, m)| v * self.scale + m).collect()
    }
}

fn centered_norm(row: &[f64], mean: &[f64]) -> f64 {
    row.iter().zip(mean).map(|(v, m)| (v - m) * (v - m)).sum::<f64>().sqrt()
}

/// Normalize a single vector.
pub fn normalize_input(x: &[f64], stats: &NormStats) -> Result<Vec<f64>> {
    if x.len() != stats.dim() {
        return Err(SaeError::Dimension {
            what: "normalization input",
            expected: stats.dim(),
            found: x.len(),
        });
    }
    Ok(stats.apply(x))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fit(rows: &[Vec<f64>]) -> Result<NormStats> {
        NormStats::fit(|| rows.iter().map(Vec::as_slice))
    }

    #[test]
    fn mean_maps_to_zero() {
        let rows = vec![vec![1.0, 2.0], vec![3.0, 6.0]];
        let s = fit(&rows).unwrap();
        assert_eq!(normalize_input(&[2.0, 4.0], &s).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn unit_vectors_scale_by_two_in_four_dims() {
        let rows = vec![
            vec![1.0, 0.0, 0.0, 0.0],
            vec![-1.0, 0.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0, 0.0],
            vec![0.0, -1.0, 0.0, 0.0],
        ];
        // brute force: mean is zero, every norm is one, so s = 1 / sqrt(4)
        let brute = rows.iter().map(|r| r.iter().map(|v| v * v).sum::<f64>().sqrt()).sum::<f64>() / 4.0 / 2.0;
        let s = fit(&rows).unwrap();
        assert_eq!(s.scale, brute);
        assert_eq!(s.scale, 0.5);
        assert_eq!(s.apply(&rows[2]), vec![0.0, 2.0, 0.0, 0.0]);
    }

    #[test]
    fn renormalizing_is_identity() {
        let rows: Vec<Vec<f64>> = (0..50)
            .map(|i| {
                let t = i as f64;
                vec![t.sin() * 3.0 + 1.0, (t * 0.7).cos() - 2.0, t * 0.01, (t * 1.3).sin()]
            })
            .collect();
        let s = fit(&rows).unwrap();
        let normalized: Vec<Vec<f64>> = rows.iter().map(|r| s.apply(r)).collect();
        let s2 = fit(&normalized).unwrap();
        assert!(s2.mean.iter().all(|m| m.abs() < 1e-6));
        assert!((s2.scale - 1.0).abs() < 1e-6);
        for r in &normalized {
            for (a, b) in s2.apply(r).iter().zip(r) {
                assert!((a - b).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn expected_norm_is_sqrt_d() {
        let rows: Vec<Vec<f64>> = (0..200).map(|i| vec![(i % 7) as f64, (i % 3) as f64 * 5.0, 1.0]).collect();
        let s = fit(&rows).unwrap();
        let mean_norm = rows
            .iter()
            .map(|r| s.apply(r).iter().map(|v| v * v).sum::<f64>().sqrt())
            .sum::<f64>()
            / rows.len() as f64;
        assert!((mean_norm - 3f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn constant_dataset_is_rejected() {
        let rows = vec![vec![0.3, 0.7]; 10];
        assert!(matches!(fit(&rows), Err(SaeError::ZeroScale)));
    }
}
