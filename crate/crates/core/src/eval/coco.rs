//! COCO-style JSON input and output.
//!
//! Boxes are `[x, y, w, h]` on disk and `[x1, y1, x2, y2]` in memory. Image
//! ids may be integers or strings; both become the `sample_id` string.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::error::{EvalError, Result};
use super::mapping::{MappedDetection, RawDetection};
use super::metrics::GroundTruth;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CocoImage {
    pub id: Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file_name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height: Option<u32>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CocoAnnotation {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<u64>,
    pub image_id: Value,
    pub category_id: u64,
    pub bbox: [f64; 4],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CocoCategory {
    pub id: u64,
    pub name: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CocoGroundTruth {
    #[serde(default)]
    pub images: Vec<CocoImage>,
    pub annotations: Vec<CocoAnnotation>,
    pub categories: Vec<CocoCategory>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CocoDetection {
    pub image_id: Value,
    pub bbox: [f64; 4],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objectness: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category_id: Option<u64>,
}

pub fn xywh_to_xyxy(b: [f64; 4]) -> [f64; 4] {
    [b[0], b[1], b[0] + b[2], b[1] + b[3]]
}

pub fn xyxy_to_xywh(b: [f64; 4]) -> [f64; 4] {
    [b[0], b[1], b[2] - b[0], b[3] - b[1]]
}

pub fn image_key(id: &Value) -> String {
    match id {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn image_value(sample_id: &str) -> Value {
    sample_id.parse::<u64>().map(Value::from).unwrap_or_else(|_| Value::from(sample_id))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let bytes = fs::read(path).map_err(|source| EvalError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_slice(&bytes).map_err(|e| EvalError::Format {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

impl CocoGroundTruth {
    pub fn load(path: &Path) -> Result<Self> {
        read_json(path)
    }

    /// Class names in category order.
    pub fn class_names(&self) -> Vec<String> {
        self.categories.iter().map(|c| c.name.clone()).collect()
    }

    pub fn category_name(&self, id: u64) -> Option<&str> {
        self.categories.iter().find(|c| c.id == id).map(|c| c.name.as_str())
    }

    pub fn category_id(&self, name: &str) -> Option<u64> {
        self.categories.iter().find(|c| c.name == name).map(|c| c.id)
    }

    pub fn ground_truth(&self) -> Result<Vec<GroundTruth>> {
        self.annotations
            .iter()
            .map(|a| {
                let sample_id = image_key(&a.image_id);
                let label = self
                    .category_name(a.category_id)
                    .ok_or_else(|| EvalError::UnknownLabel {
                        sample_id: sample_id.clone(),
                        label: a.category_id.to_string(),
                    })?
                    .to_string();
                Ok(GroundTruth {
                    sample_id,
                    bbox: xywh_to_xyxy(a.bbox),
                    label,
                })
            })
            .collect()
    }
}

pub fn load_detections(path: &Path) -> Result<Vec<RawDetection>> {
    let dets: Vec<CocoDetection> = read_json(path)?;
    dets.into_iter()
        .enumerate()
        .map(|(i, d)| {
            let text = d.text.ok_or_else(|| EvalError::Format {
                path: path.to_path_buf(),
                reason: format!("detection {i} has no \"text\" field"),
            })?;
            Ok(RawDetection {
                sample_id: image_key(&d.image_id),
                bbox: xywh_to_xyxy(d.bbox),
                text,
                confidence: d.score,
                objectness: d.objectness,
            })
        })
        .collect()
}

/// Kept detections as a COCO results list.
pub fn to_coco_results(mapped: &[MappedDetection], gt: &CocoGroundTruth) -> Vec<CocoDetection> {
    mapped
        .iter()
        .filter(|d| d.is_kept())
        .map(|d| CocoDetection {
            image_id: image_value(&d.sample_id),
            bbox: xyxy_to_xywh(d.bbox),
            score: Some(d.score),
            text: Some(d.text.clone()),
            objectness: None,
            category_id: d.label.as_deref().and_then(|l| gt.category_id(l)),
        })
        .collect()
}

#[derive(Serialize)]
struct ProvenanceRow<'a> {
    sample_id: &'a str,
    text: &'a str,
    x1: f64,
    y1: f64,
    x2: f64,
    y2: f64,
    label: &'a str,
    score: f64,
    similarity: String,
    provenance: &'a str,
    confidence_imputed: bool,
}

/// CSV of every detection that was not kept, plus kept detections whose
/// confidence was imputed.
pub fn provenance_csv(mapped: &[MappedDetection]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for d in mapped.iter().filter(|d| !d.is_kept() || d.confidence_imputed) {
        w.serialize(ProvenanceRow {
            sample_id: &d.sample_id,
            text: &d.text,
            x1: d.bbox[0],
            y1: d.bbox[1],
            x2: d.bbox[2],
            y2: d.bbox[3],
            label: d.label.as_deref().unwrap_or(""),
            score: d.score,
            similarity: d.similarity.map(|s| s.to_string()).unwrap_or_default(),
            provenance: d.provenance.as_str(),
            confidence_imputed: d.confidence_imputed,
        })
        .map_err(|e| EvalError::Format {
            path: "provenance.csv".into(),
            reason: e.to_string(),
        })?;
    }
    w.into_inner().map_err(|e| EvalError::Format {
        path: "provenance.csv".into(),
        reason: e.to_string(),
    })
}
