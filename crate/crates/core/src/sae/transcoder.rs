//! Transcoders: SAE machinery whose reconstruction target is the vector at
//! another access point of the same `(sample_id, token_index)` slot.

use std::collections::BTreeMap;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::SaeConfig;
use super::error::{Result, SaeError};
use super::model::SaeModel;
use crate::store::{FeatureDataset, FeatureRecord, PointFilter};

/// Paired input/target rows for transcoder training.
#[derive(Debug, Clone, PartialEq)]
pub struct TranscoderTask {
    pub source: String,
    pub target: String,
    pub keys: Vec<(String, u32)>,
    pub inputs: Array2<f64>,
    pub targets: Array2<f64>,
}

impl TranscoderTask {
    /// Pair records by slot. Every record on either side must find a partner.
    pub fn pair(source: &[FeatureRecord], target: &[FeatureRecord]) -> Result<Self> {
        let (Some(s0), Some(t0)) = (source.first(), target.first()) else {
            return Err(SaeError::EmptyBatch);
        };
        let by_slot: BTreeMap<(String, u32), &FeatureRecord> = target.iter().map(|r| (r.slot(), r)).collect();
        let source_slots: std::collections::BTreeSet<(String, u32)> = source.iter().map(FeatureRecord::slot).collect();

        let mut missing: Vec<(String, u32)> = source
            .iter()
            .map(FeatureRecord::slot)
            .filter(|k| !by_slot.contains_key(k))
            .collect();
        missing.extend(by_slot.keys().filter(|k| !source_slots.contains(*k)).cloned());
        if !missing.is_empty() {
            missing.sort();
            missing.dedup();
            return Err(SaeError::Pairing { missing });
        }

        let (d_in, d_out) = (s0.dim(), t0.dim());
        let mut inputs = Vec::with_capacity(source.len() * d_in);
        let mut targets = Vec::with_capacity(source.len() * d_out);
        let mut keys = Vec::with_capacity(source.len());
        for r in source {
            let t = by_slot[&r.slot()];
            inputs.extend_from_slice(&r.vector);
            targets.extend_from_slice(&t.vector);
            keys.push(r.slot());
        }
        let shape_err = |what, expected, found| SaeError::Dimension { what, expected, found };
        let inputs = Array2::from_shape_vec((keys.len(), d_in), inputs)
            .map_err(|_| shape_err("transcoder source", d_in, 0))?;
        let targets = Array2::from_shape_vec((keys.len(), d_out), targets)
            .map_err(|_| shape_err("transcoder target", d_out, 0))?;
        Ok(Self {
            source: s0.access_point.point_name.clone(),
            target: t0.access_point.point_name.clone(),
            keys,
            inputs,
            targets,
        })
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    /// Row order for one epoch; seeded permutation of all rows.
    pub fn epoch_order(&self, seed: u64, epoch: u64) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ epoch.wrapping_mul(0x9E37_79B9_7F4A_7C15));
        order.shuffle(&mut rng);
        order
    }

    /// Gather the rows at `idx` as `(inputs, targets)`.
    pub fn gather(&self, idx: &[usize]) -> (Array2<f64>, Array2<f64>) {
        (
            self.inputs.select(ndarray::Axis(0), idx),
            self.targets.select(ndarray::Axis(0), idx),
        )
    }
}

/// Load both access points, pair them and initialize a model whose output
/// dimension is the target's.
pub fn make_transcoder(
    config: &SaeConfig,
    dataset: &FeatureDataset,
    source: &str,
    target: &str,
) -> Result<(SaeModel, TranscoderTask)> {
    let schema = dataset.schema();
    let d_in = schema
        .dimension_of(source)
        .ok_or_else(|| SaeError::UnknownPoint(source.to_string()))?;
    let d_out = schema
        .dimension_of(target)
        .ok_or_else(|| SaeError::UnknownPoint(target.to_string()))?;
    if config.input_dim != d_in {
        return Err(SaeError::Dimension {
            what: "transcoder source",
            expected: config.input_dim,
            found: d_in,
        });
    }
    let src = dataset.read_all(&PointFilter::one(source))?;
    let tgt = dataset.read_all(&PointFilter::one(target))?;
    let task = TranscoderTask::pair(&src, &tgt)?;
    let config = SaeConfig {
        output_dim: Some(d_out),
        ..config.clone()
    };
    Ok((SaeModel::init(config)?, task))
}
