use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::config::EvalConfig;
use super::embed::{dot, l2_normalize, EmbeddingProvider};
use super::error::{EvalError, Result};
use super::label_space::{LabelSpace, PromptKind};

/// One open-ended detection: absolute-pixel `[x1, y1, x2, y2]` box and the
/// free text the model produced for it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawDetection {
    pub sample_id: String,
    pub bbox: [f64; 4],
    pub text: String,
    /// Missing confidence is treated as 1.0 and flagged on the output.
    pub confidence: Option<f64>,
    pub objectness: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Kept,
    FilteredConf,
    FilteredNegative,
    FilteredPart,
    TruncatedMaxpred,
    Unembeddable,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Kept => "kept",
            Provenance::FilteredConf => "filtered_conf",
            Provenance::FilteredNegative => "filtered_negative",
            Provenance::FilteredPart => "filtered_part",
            Provenance::TruncatedMaxpred => "truncated_maxpred",
            Provenance::Unembeddable => "unembeddable",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MappedDetection {
    pub sample_id: String,
    pub bbox: [f64; 4],
    pub text: String,
    /// Class index into the label space; `None` when the detection never
    /// reached the class assignment.
    pub class: Option<usize>,
    pub label: Option<String>,
    pub score: f64,
    /// Similarity to the assigned prompt (the argmax prompt when filtered).
    pub similarity: Option<f64>,
    pub provenance: Provenance,
    pub confidence_imputed: bool,
}

impl MappedDetection {
    pub fn is_kept(&self) -> bool {
        self.provenance == Provenance::Kept
    }
}

pub fn validate_box(sample_id: &str, bbox: &[f64; 4]) -> Result<()> {
    let ok = bbox.iter().all(|v| v.is_finite()) && bbox[2] > bbox[0] && bbox[3] > bbox[1];
    if ok {
        Ok(())
    } else {
        Err(EvalError::InvalidBox {
            sample_id: sample_id.to_string(),
            bbox: *bbox,
        })
    }
}

fn validate_unit(sample_id: &str, what: &'static str, value: Option<f64>) -> Result<()> {
    match value {
        Some(v) if !(0.0..=1.0).contains(&v) => Err(EvalError::InvalidScore {
            sample_id: sample_id.to_string(),
            what,
            value: v,
        }),
        _ => Ok(()),
    }
}

/// Similarity of a text embedding to every prompt, in prompt order.
fn similarities(space: &LabelSpace, e: &[f64]) -> Vec<f64> {
    space.prompts.iter().map(|p| dot(&p.embedding, e)).collect()
}

/// First index of the maximum.
fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Softmax weights at `temperature` for the `k` most similar class prompts,
/// ties to the lowest class index.
fn topk_classes(space: &LabelSpace, sims: &[f64], k: usize, temperature: f64) -> Vec<(usize, f64, f64)> {
    let mut classes: Vec<(usize, f64)> = space.class_prompts().map(|(c, _)| c).zip(sims.iter().copied()).collect();
    classes.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    classes.truncate(k);
    let top = classes[0].1;
    let exps: Vec<f64> = classes.iter().map(|(_, s)| ((s - top) / temperature).exp()).collect();
    let z: f64 = exps.iter().sum();
    classes.iter().zip(exps).map(|(&(c, s), e)| (c, s, e / z)).collect()
}

/// Map raw detections onto the label space.
///
/// Output follows input order; a detection expanded by `use_topk` yields its
/// candidates consecutively, most similar first.
pub fn map_labels(
    detections: &[RawDetection],
    space: &LabelSpace,
    config: &EvalConfig,
    provider: &dyn EmbeddingProvider,
) -> Result<Vec<MappedDetection>> {
    let issues = config.validate();
    if !issues.is_empty() {
        return Err(EvalError::Config(issues));
    }
    let mut cache: HashMap<&str, Option<Vec<f64>>> = HashMap::new();
    let mut out = Vec::with_capacity(detections.len());

    for det in detections {
        validate_box(&det.sample_id, &det.bbox)?;
        validate_unit(&det.sample_id, "confidence", det.confidence)?;
        validate_unit(&det.sample_id, "objectness", det.objectness)?;
        let confidence = det.confidence.unwrap_or(1.0);
        let base = MappedDetection {
            sample_id: det.sample_id.clone(),
            bbox: det.bbox,
            text: det.text.clone(),
            class: None,
            label: None,
            score: confidence,
            similarity: None,
            provenance: Provenance::Kept,
            confidence_imputed: det.confidence.is_none(),
        };

        if confidence < config.min_conf {
            out.push(MappedDetection {
                provenance: Provenance::FilteredConf,
                ..base
            });
            continue;
        }

        let embedding = cache.entry(det.text.as_str()).or_insert_with(|| {
            let mut v = provider.embed(&det.text).ok()?;
            let dim = space.prompts.first().map_or(0, |p| p.embedding.len());
            (v.len() == dim && l2_normalize(&mut v)).then_some(v)
        });
        let Some(embedding) = embedding.as_deref() else {
            out.push(MappedDetection {
                provenance: Provenance::Unembeddable,
                ..base
            });
            continue;
        };

        let sims = similarities(space, embedding);
        let best = argmax(&sims);
        let score = match (config.use_objectness, det.objectness) {
            (true, Some(o)) => confidence * o,
            _ => confidence,
        };
        let filtered = match space.prompts[best].kind {
            PromptKind::Negative => Some(Provenance::FilteredNegative),
            PromptKind::Part(_) => Some(Provenance::FilteredPart),
            PromptKind::Class(_) => None,
        };
        if let Some(provenance) = filtered {
            out.push(MappedDetection {
                score,
                similarity: Some(sims[best]),
                provenance,
                ..base
            });
            continue;
        }

        if config.use_topk {
            let class_sims: Vec<f64> = space.class_prompts().map(|(c, _)| sims[c]).collect();
            for (c, s, w) in topk_classes(space, &class_sims, config.k_map, config.topk_temperature) {
                out.push(MappedDetection {
                    class: Some(c),
                    label: Some(space.classes[c].clone()),
                    score: score * w,
                    similarity: Some(s),
                    ..base.clone()
                });
            }
        } else {
            let PromptKind::Class(c) = space.prompts[best].kind else { unreachable!() };
            out.push(MappedDetection {
                class: Some(c),
                label: Some(space.classes[c].clone()),
                score,
                similarity: Some(sims[best]),
                ..base
            });
        }
    }

    truncate_per_image(&mut out, config.max_pred);
    Ok(out)
}

/// Keep the `max_pred` highest-scoring candidates per image; ties keep the
/// earlier detection.
fn truncate_per_image(out: &mut [MappedDetection], max_pred: usize) {
    let mut by_image: HashMap<&str, Vec<usize>> = HashMap::new();
    for (i, d) in out.iter().enumerate() {
        if d.is_kept() {
            by_image.entry(d.sample_id.as_str()).or_default().push(i);
        }
    }
    let mut drop = Vec::new();
    for mut idx in by_image.into_values() {
        if idx.len() <= max_pred {
            continue;
        }
        idx.sort_by(|&a, &b| out[b].score.total_cmp(&out[a].score).then(a.cmp(&b)));
        drop.extend_from_slice(&idx[max_pred..]);
    }
    for i in drop {
        out[i].provenance = Provenance::TruncatedMaxpred;
    }
}

/// Area IoU of two `[x1, y1, x2, y2]` boxes.
pub fn iou(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    let iw = (a[2].min(b[2]) - a[0].max(b[0])).max(0.0);
    let ih = (a[3].min(b[3]) - a[1].max(b[1])).max(0.0);
    let inter = iw * ih;
    let union = (a[2] - a[0]) * (a[3] - a[1]) + (b[2] - b[0]) * (b[3] - b[1]) - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}
