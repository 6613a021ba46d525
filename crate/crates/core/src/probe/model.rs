use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::error::{ProbeError, Result};
use crate::optim::AdamConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeTask {
    Classification,
    Localization,
}

impl ProbeTask {
    pub fn as_str(self) -> &'static str {
        match self {
            ProbeTask::Classification => "classification",
            ProbeTask::Localization => "localization",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetSource {
    #[default]
    GroundTruth,
    ModelPrediction,
}

/// Per-token probe target. `y_bbox` is `(cx, cy, w, h)` normalized to the image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeTarget {
    #[serde(default)]
    pub source: TargetSource,
    pub y_class: usize,
    pub y_bbox: [f64; 4],
}

impl ProbeTarget {
    pub fn validate(&self, index: usize) -> Result<()> {
        let b = self.y_bbox;
        let ok = b.iter().all(|v| (0.0..=1.0).contains(v)) && b[2] > 0.0 && b[3] > 0.0;
        if ok {
            Ok(())
        } else {
            Err(ProbeError::InvalidBox { index, bbox: b })
        }
    }
}

/// `(cx, cy, w, h)` to `(x1, y1, x2, y2)`; width and height are floored at a
/// tiny positive value so regressed boxes stay valid.
pub fn cxcywh_to_xyxy(b: [f64; 4]) -> [f64; 4] {
    let w = b[2].max(1e-9);
    let h = b[3].max(1e-9);
    [b[0] - w / 2.0, b[1] - h / 2.0, b[0] + w / 2.0, b[1] + h / 2.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProbeConfig {
    pub optimizer: AdamConfig,
    pub epochs: usize,
    pub batch_size: usize,
    /// Smooth L1 transition point.
    pub beta: f64,
    pub seed: u64,
    /// Minimum dip margin for a transition layer.
    pub delta: f64,
    /// Fraction of samples held out for scoring.
    pub holdout_fraction: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            optimizer: AdamConfig {
                lr: 1e-3,
                ..AdamConfig::default()
            },
            epochs: 10,
            batch_size: 256,
            beta: 1.0,
            seed: 0,
            delta: 0.05,
            holdout_fraction: 0.2,
        }
    }
}

impl ProbeConfig {
    pub fn validate(&self) -> Vec<String> {
        let mut issues = Vec::new();
        if !(self.optimizer.lr > 0.0) {
            issues.push("probe.optimizer.lr must be positive".to_string());
        }
        if self.epochs == 0 {
            issues.push("probe.epochs must be at least 1".to_string());
        }
        if self.batch_size == 0 {
            issues.push("probe.batch_size must be at least 1".to_string());
        }
        if !(self.beta > 0.0) {
            issues.push("probe.beta must be positive".to_string());
        }
        if !(self.delta >= 0.0) {
            issues.push("probe.delta must be non-negative".to_string());
        }
        if !(0.0..1.0).contains(&self.holdout_fraction) {
            issues.push("probe.holdout_fraction must lie in [0, 1)".to_string());
        }
        issues
    }
}

/// Linear probe `W·φ + b` on one layer's features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeModel {
    pub task: ProbeTask,
    pub layer_index: u16,
    /// `outputs × d`.
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

impl ProbeModel {
    pub fn zeros(task: ProbeTask, layer_index: u16, outputs: usize, d: usize) -> Self {
        Self {
            task,
            layer_index,
            w: Array2::zeros((outputs, d)),
            b: Array1::zeros(outputs),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.w.nrows()
    }

    pub fn check_input(&self, x: ArrayView2<f64>) -> Result<()> {
        if x.ncols() != self.input_dim() {
            return Err(ProbeError::Dimension {
                what: "probe input".to_string(),
                expected: self.input_dim(),
                found: x.ncols(),
            });
        }
        Ok(())
    }

    /// Raw outputs, one row per feature row.
    pub fn forward(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_input(x)?;
        Ok(x.dot(&self.w.t()) + &self.b)
    }

    /// Predicted class and its softmax probability per row, ties to the
    /// lowest class.
    pub fn predict_classes(&self, x: ArrayView2<f64>) -> Result<Vec<(usize, f64)>> {
        let logits = self.forward(x)?;
        Ok(logits
            .axis_iter(Axis(0))
            .map(|row| {
                let p = softmax(row.as_slice().expect("standard layout"));
                let mut best = 0;
                for (i, &v) in p.iter().enumerate() {
                    if v > p[best] {
                        best = i;
                    }
                }
                (best, p[best])
            })
            .collect())
    }

    pub fn predict_boxes(&self, x: ArrayView2<f64>) -> Result<Vec<[f64; 4]>> {
        let out = self.forward(x)?;
        Ok(out.axis_iter(Axis(0)).map(|r| [r[0], r[1], r[2], r[3]]).collect())
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|v| (v - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}

pub fn smooth_l1(u: f64, beta: f64) -> f64 {
    if u.abs() < beta {
        0.5 * u * u / beta
    } else {
        u.abs() - 0.5 * beta
    }
}

fn smooth_l1_grad(u: f64, beta: f64) -> f64 {
    if u.abs() < beta {
        u / beta
    } else {
        u.signum()
    }
}

/// Loss and parameter gradients, averaged over the batch.
#[derive(Debug, Clone)]
pub struct ProbeGrad {
    pub loss: f64,
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

fn grads_from_residual(x: ArrayView2<f64>, delta: Array2<f64>, loss: f64) -> ProbeGrad {
    let n = x.nrows() as f64;
    ProbeGrad {
        loss: loss / n,
        w: delta.t().dot(&x) / n,
        b: delta.sum_axis(Axis(0)) / n,
    }
}

/// Mean cross-entropy of `W·x + b` against class labels.
pub fn class_loss_and_grad(model: &ProbeModel, x: ArrayView2<f64>, labels: &[usize]) -> Result<ProbeGrad> {
    let logits = model.forward(x)?;
    let mut delta = Array2::zeros(logits.raw_dim());
    let mut loss = 0.0;
    for (i, (row, &y)) in logits.axis_iter(Axis(0)).zip(labels).enumerate() {
        let row = row.as_slice().expect("standard layout");
        let p = softmax(row);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        loss += lse - row[y];
        for (c, pc) in p.into_iter().enumerate() {
            delta[[i, c]] = pc - if c == y { 1.0 } else { 0.0 };
        }
    }
    Ok(grads_from_residual(x, delta, loss))
}

/// Mean over rows of the smooth L1 loss summed over the four coordinates.
pub fn loc_loss_and_grad(model: &ProbeModel, x: ArrayView2<f64>, boxes: &[[f64; 4]], beta: f64) -> Result<ProbeGrad> {
    let out = model.forward(x)?;
    let mut delta = Array2::zeros(out.raw_dim());
    let mut loss = 0.0;
    for (i, b) in boxes.iter().enumerate() {
        for c in 0..4 {
            let u = out[[i, c]] - b[c];
            loss += smooth_l1(u, beta);
            delta[[i, c]] = smooth_l1_grad(u, beta);
        }
    }
    Ok(grads_from_residual(x, delta, loss))
}
