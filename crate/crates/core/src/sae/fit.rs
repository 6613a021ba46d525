//! Epoch loops feeding stored tables or paired transcoder data to a trainer.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::error::{Result, SaeError};
use super::normalize::NormStats;
use super::train::SaeTrainer;
use super::transcoder::TranscoderTask;
use crate::store::{FeatureDataset, PointFilter};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitOptions {
    pub epochs: usize,
    pub max_steps: Option<u64>,
    pub shuffle_seed: u64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            epochs: 1,
            max_steps: None,
            shuffle_seed: 0,
        }
    }
}

fn epoch_seed(seed: u64, epoch: usize) -> u64 {
    seed.wrapping_add((epoch as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Train on one access point of a stored table, normalizing with `stats`.
pub fn fit_dataset(
    trainer: &mut SaeTrainer,
    dataset: &FeatureDataset,
    point: &str,
    stats: &NormStats,
    opts: &FitOptions,
) -> Result<()> {
    let d = trainer.model.input_dim();
    if dataset.schema().entry(point).is_none() {
        return Err(SaeError::UnknownPoint(point.to_string()));
    }
    let filter = PointFilter::one(point);
    let batch_size = trainer.model.config.batch_size;
    for epoch in 0..opts.epochs {
        let stream = dataset.batches(&filter, batch_size, Some(epoch_seed(opts.shuffle_seed, epoch)))?;
        for batch in stream {
            if opts.max_steps.is_some_and(|m| trainer.state.step >= m) {
                return Ok(());
            }
            let batch = batch?;
            let mut x = Array2::<f64>::zeros((batch.len(), d));
            for (mut row, rec) in x.rows_mut().into_iter().zip(&batch) {
                if rec.dim() != d {
                    return Err(SaeError::Dimension {
                        what: "SAE input",
                        expected: d,
                        found: rec.dim(),
                    });
                }
                let normalized = stats.apply(&rec.vector);
                row.assign(&ndarray::ArrayView1::from(&normalized));
            }
            trainer.step(x.view(), None)?;
        }
    }
    Ok(())
}

/// Train on an in-memory paired task, which must already be normalized.
pub fn fit_task(trainer: &mut SaeTrainer, task: &TranscoderTask, opts: &FitOptions) -> Result<()> {
    let batch_size = trainer.model.config.batch_size;
    for epoch in 0..opts.epochs {
        let order = task.epoch_order(opts.shuffle_seed, epoch as u64);
        for chunk in order.chunks(batch_size) {
            if opts.max_steps.is_some_and(|m| trainer.state.step >= m) {
                return Ok(());
            }
            let (x, y) = task.gather(chunk);
            trainer.step(x.view(), Some(y.view()))?;
        }
    }
    Ok(())
}
