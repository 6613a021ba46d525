//! Conversion of raw capture tensors into canonical per-token records.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::error::{Result, StoreError};
use super::types::{AccessPointSpec, Aux, Dtype, FeatureRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AxisRole {
    Batch,
    Token,
    Channel,
}

impl FromStr for AxisRole {
    type Err = StoreError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "batch" => Ok(AxisRole::Batch),
            "token" => Ok(AxisRole::Token),
            "channel" => Ok(AxisRole::Channel),
            other => Err(StoreError::Schema(format!("unknown axis role {other:?}"))),
        }
    }
}

/// Dense row-major tensor as dumped by a capture tool.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl RawTensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(StoreError::Schema(format!(
                "shape {shape:?} needs {expected} values, got {}",
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.shape.len()];
        for i in (0..self.shape.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * self.shape[i + 1];
        }
        strides
    }
}

/// Describes how to read a [`RawTensor`].
///
/// `axes` names the role of every tensor axis (`"batch"`, `"token"`,
/// `"channel"`); the token axis is optional. `padding_mask[b][t] == true`
/// marks a padded slot that is dropped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutDescriptor {
    pub access_point: AccessPointSpec,
    pub axes: Vec<String>,
    pub sample_ids: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub padding_mask: Option<Vec<Vec<bool>>>,
    #[serde(default)]
    pub dtype: Dtype,
}

/// Optional per-slot predictions in canonical `(batch, token[, 4])` order.
#[derive(Debug, Clone, Default)]
pub struct AuxTensors {
    pub objectness: Option<RawTensor>,
    pub boxes: Option<RawTensor>,
}

struct AxisMap {
    batch: usize,
    token: Option<usize>,
    channel: usize,
}

fn resolve_axes(axes: &[String], rank: usize) -> Result<AxisMap> {
    if axes.len() != rank {
        return Err(StoreError::Schema(format!(
            "layout declares {} axes for a rank-{rank} tensor",
            axes.len()
        )));
    }
    let (mut batch, mut token, mut channel) = (None, None, None);
    for (i, name) in axes.iter().enumerate() {
        let slot = match name.parse::<AxisRole>()? {
            AxisRole::Batch => &mut batch,
            AxisRole::Token => &mut token,
            AxisRole::Channel => &mut channel,
        };
        if slot.replace(i).is_some() {
            return Err(StoreError::Schema(format!("axis role {name:?} declared twice")));
        }
    }
    match (batch, channel) {
        (Some(batch), Some(channel)) => Ok(AxisMap {
            batch,
            token,
            channel,
        }),
        _ => Err(StoreError::Schema(
            "layout needs both a batch and a channel axis".into(),
        )),
    }
}

fn aux_value(t: &RawTensor, b: usize, tok: usize, n_tok: usize, width: usize, c: usize) -> f64 {
    t.data[(b * n_tok + tok) * width + c]
}

/// Flatten a raw tensor into one record per `(sample, unmasked token)`.
///
/// Records come out sample-major with ascending `token_index`. Values are
/// rounded through the layout's dtype.
pub fn align(raw: &RawTensor, layout: &LayoutDescriptor, aux: &AuxTensors) -> Result<Vec<FeatureRecord>> {
    let axes = resolve_axes(&layout.axes, raw.shape.len())?;
    let n_batch = raw.shape[axes.batch];
    let n_tok = axes.token.map_or(1, |t| raw.shape[t]);
    let dim = raw.shape[axes.channel];
    if dim == 0 {
        return Err(StoreError::Schema("channel axis has length 0".into()));
    }
    if layout.sample_ids.len() != n_batch {
        return Err(StoreError::Schema(format!(
            "{} sample ids for batch of {n_batch}",
            layout.sample_ids.len()
        )));
    }
    if let Some(mask) = &layout.padding_mask {
        if mask.len() != n_batch || mask.iter().any(|row| row.len() != n_tok) {
            return Err(StoreError::Schema(format!(
                "padding mask must be {n_batch}x{n_tok}"
            )));
        }
    }
    if let Some(obj) = &aux.objectness {
        if obj.data.len() != n_batch * n_tok {
            return Err(StoreError::Schema(format!(
                "objectness must hold {n_batch}x{n_tok} values"
            )));
        }
    }
    if let Some(boxes) = &aux.boxes {
        if boxes.data.len() != n_batch * n_tok * 4 {
            return Err(StoreError::Schema(format!(
                "boxes must hold {n_batch}x{n_tok}x4 values"
            )));
        }
    }

    let strides = raw.strides();
    let mut records = Vec::with_capacity(n_batch * n_tok);
    for b in 0..n_batch {
        for t in 0..n_tok {
            if layout.padding_mask.as_ref().is_some_and(|m| m[b][t]) {
                continue;
            }
            let base = b * strides[axes.batch] + axes.token.map_or(0, |ax| t * strides[ax]);
            let sample_id = &layout.sample_ids[b];
            let token_index = u32::try_from(t)
                .map_err(|_| StoreError::Schema("token axis exceeds u32".into()))?;
            let mut vector = Vec::with_capacity(dim);
            for c in 0..dim {
                let v = raw.data[base + c * strides[axes.channel]];
                if !v.is_finite() {
                    return Err(StoreError::NonFinite {
                        sample_id: sample_id.clone(),
                        token_index,
                        channel: c,
                    });
                }
                vector.push(layout.dtype.quantize(v));
            }
            let objectness = aux
                .objectness
                .as_ref()
                .map(|o| aux_value(o, b, t, n_tok, 1, 0) as f32);
            let bbox = aux.boxes.as_ref().map(|bx| {
                let mut out = [0f32; 4];
                for (c, slot) in out.iter_mut().enumerate() {
                    *slot = aux_value(bx, b, t, n_tok, 4, c) as f32;
                }
                out
            });
            if objectness.is_some_and(|o| !o.is_finite())
                || bbox.is_some_and(|bx| bx.iter().any(|v| !v.is_finite()))
            {
                return Err(StoreError::NonFinite {
                    sample_id: sample_id.clone(),
                    token_index,
                    channel: dim,
                });
            }
            records.push(FeatureRecord {
                access_point: layout.access_point.clone(),
                sample_id: sample_id.clone(),
                token_index,
                vector,
                aux: Aux { objectness, bbox },
            });
        }
    }
    Ok(records)
}
