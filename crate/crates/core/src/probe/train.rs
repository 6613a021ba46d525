use std::collections::BTreeSet;

use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::error::{ProbeError, Result};
use super::model::{class_loss_and_grad, loc_loss_and_grad, ProbeConfig, ProbeGrad, ProbeModel, ProbeTarget, ProbeTask};
use super::score::{score_probe, ScoreMode};
use crate::optim::{adam_update, Moments};

fn check_rows(x: ArrayView2<f64>, n: usize) -> Result<()> {
    if x.nrows() == 0 {
        return Err(ProbeError::Empty);
    }
    if x.nrows() != n {
        return Err(ProbeError::Dimension {
            what: "targets per feature row".to_string(),
            expected: x.nrows(),
            found: n,
        });
    }
    Ok(())
}

/// Mini-batch Adam over a seeded per-epoch permutation.
fn fit(
    mut model: ProbeModel,
    x: ArrayView2<f64>,
    cfg: &ProbeConfig,
    loss: impl Fn(&ProbeModel, ArrayView2<f64>, &[usize]) -> Result<ProbeGrad>,
) -> Result<ProbeModel> {
    let issues = cfg.validate();
    if !issues.is_empty() {
        return Err(ProbeError::Config(issues));
    }
    let mut mw = Moments::zeros(model.w.len());
    let mut mb = Moments::zeros(model.b.len());
    let mut order: Vec<usize> = (0..x.nrows()).collect();
    let mut t = 0u64;
    for epoch in 0..cfg.epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ (epoch as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
        order.sort_unstable();
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            let xb = x.select(Axis(0), chunk);
            let g = loss(&model, xb.view(), chunk)?;
            if !g.loss.is_finite() {
                return Err(ProbeError::NonFinite { epoch });
            }
            t += 1;
            adam_update(&cfg.optimizer, t, model.w.as_slice_mut().expect("standard layout"), g.w.as_slice().expect("standard layout"), &mut mw);
            adam_update(&cfg.optimizer, t, model.b.as_slice_mut().expect("standard layout"), g.b.as_slice().expect("standard layout"), &mut mb);
        }
    }
    Ok(model)
}

/// Cross-entropy probe over `n_classes` labels. Needs at least two distinct
/// labels among the targets.
pub fn train_class_probe(x: ArrayView2<f64>, labels: &[usize], n_classes: usize, layer_index: u16, cfg: &ProbeConfig) -> Result<ProbeModel> {
    check_rows(x, labels.len())?;
    for (index, &label) in labels.iter().enumerate() {
        if label >= n_classes {
            return Err(ProbeError::InvalidClass { index, label, n_classes });
        }
    }
    let distinct: BTreeSet<usize> = labels.iter().copied().collect();
    if distinct.len() < 2 {
        return Err(ProbeError::DegenerateTask(format!("targets contain {} distinct class(es)", distinct.len())));
    }
    let model = ProbeModel::zeros(ProbeTask::Classification, layer_index, n_classes, x.ncols());
    fit(model, x, cfg, |m, xb, idx| {
        let yb: Vec<usize> = idx.iter().map(|&i| labels[i]).collect();
        class_loss_and_grad(m, xb, &yb)
    })
}

/// Smooth L1 box regression probe.
pub fn train_loc_probe(x: ArrayView2<f64>, boxes: &[[f64; 4]], layer_index: u16, cfg: &ProbeConfig) -> Result<ProbeModel> {
    check_rows(x, boxes.len())?;
    let model = ProbeModel::zeros(ProbeTask::Localization, layer_index, 4, x.ncols());
    fit(model, x, cfg, |m, xb, idx| {
        let yb: Vec<[f64; 4]> = idx.iter().map(|&i| boxes[i]).collect();
        loc_loss_and_grad(m, xb, &yb, cfg.beta)
    })
}

/// Features of one layer, rows aligned with the shared targets.
#[derive(Debug, Clone)]
pub struct LayerData {
    pub layer_index: u16,
    pub features: Array2<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LayerResult {
    pub layer_index: u16,
    pub class_probe: ProbeModel,
    pub loc_probe: ProbeModel,
    pub class_ap50: f64,
    pub loc_ap50: f64,
    pub joint_ap50: f64,
}

/// Deterministic split by sample: shuffled distinct sample ids, the last
/// `holdout_fraction` of them held out. Returns (train rows, held-out rows);
/// with no holdout both sets are all rows.
pub fn split_by_sample(sample_ids: &[String], holdout_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut ids: Vec<&str> = sample_ids.iter().map(String::as_str).collect::<BTreeSet<_>>().into_iter().collect();
    let n_hold = (ids.len() as f64 * holdout_fraction).floor() as usize;
    if n_hold == 0 || n_hold == ids.len() {
        let all: Vec<usize> = (0..sample_ids.len()).collect();
        return (all.clone(), all);
    }
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let held: BTreeSet<&str> = ids[ids.len() - n_hold..].iter().copied().collect();
    (0..sample_ids.len()).partition(|&i| !held.contains(sample_ids[i].as_str()))
}

/// Train and score classification and localization probes on every layer.
/// Layers train in parallel; each probe is single-threaded and seeded, so
/// results do not depend on the thread count.
pub fn probe_layers(
    layers: &[LayerData],
    slots: &[(String, u32)],
    targets: &[ProbeTarget],
    n_classes: usize,
    cfg: &ProbeConfig,
) -> Result<Vec<LayerResult>> {
    for (i, t) in targets.iter().enumerate() {
        t.validate(i)?;
    }
    let samples: Vec<String> = slots.iter().map(|s| s.0.clone()).collect();
    let (train, held) = split_by_sample(&samples, cfg.holdout_fraction, cfg.seed);
    let labels: Vec<usize> = train.iter().map(|&i| targets[i].y_class).collect();
    let boxes: Vec<[f64; 4]> = train.iter().map(|&i| targets[i].y_bbox).collect();
    let held_slots: Vec<(String, u32)> = held.iter().map(|&i| slots[i].clone()).collect();
    let held_targets: Vec<ProbeTarget> = held.iter().map(|&i| targets[i].clone()).collect();

    layers
        .par_iter()
        .map(|layer| {
            if layer.features.nrows() != targets.len() {
                return Err(ProbeError::Dimension {
                    what: format!("rows at layer {}", layer.layer_index),
                    expected: targets.len(),
                    found: layer.features.nrows(),
                });
            }
            let xt = layer.features.select(Axis(0), &train);
            let xh = layer.features.select(Axis(0), &held);
            let class_probe = train_class_probe(xt.view(), &labels, n_classes, layer.layer_index, cfg)?;
            let loc_probe = train_loc_probe(xt.view(), &boxes, layer.layer_index, cfg)?;
            let score = |mode| score_probe(mode, Some(&class_probe), Some(&loc_probe), xh.view(), &held_slots, &held_targets, n_classes);
            Ok(LayerResult {
                layer_index: layer.layer_index,
                class_ap50: score(ScoreMode::ClassOnly)?,
                loc_ap50: score(ScoreMode::LocOnly)?,
                joint_ap50: score(ScoreMode::Joint)?,
                class_probe,
                loc_probe,
            })
        })
        .collect()
}

/// Fraction of rows whose predicted class equals the label.
pub fn class_accuracy(model: &ProbeModel, x: ArrayView2<f64>, labels: &[usize]) -> Result<f64> {
    check_rows(x, labels.len())?;
    let pred = model.predict_classes(x)?;
    Ok(pred.iter().zip(labels).filter(|((p, _), y)| p == *y).count() as f64 / labels.len() as f64)
}

/// Mean per-row smooth L1 loss of a localization probe.
pub fn loc_loss(model: &ProbeModel, x: ArrayView2<f64>, boxes: &[[f64; 4]], beta: f64) -> Result<f64> {
    check_rows(x, boxes.len())?;
    Ok(loc_loss_and_grad(model, x, boxes, beta)?.loss)
}
