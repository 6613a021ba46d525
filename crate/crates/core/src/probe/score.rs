use std::path::Path;

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use super::error::{ProbeError, Result};
use super::model::{cxcywh_to_xyxy, ProbeModel, ProbeTarget, TargetSource};
use crate::eval::{evaluate, EvalConfig, GroundTruth, MappedDetection, Provenance};
use crate::store::FeatureRecord;

/// Which probe outputs form the detections.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreMode {
    /// Class and confidence from the classification probe, box from the
    /// localization probe.
    Joint,
    /// Classification probe with the reference box.
    ClassOnly,
    /// Localization probe with the reference class and unit confidence;
    /// equal scores rank in row order.
    LocOnly,
}

impl ScoreMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ScoreMode::Joint => "joint",
            ScoreMode::ClassOnly => "classification",
            ScoreMode::LocOnly => "localization",
        }
    }
}

fn class_names(n: usize) -> Vec<String> {
    (0..n).map(|c| c.to_string()).collect()
}

/// AP at IoU 0.5 of probe detections against the per-row references.
pub fn score_probe(
    mode: ScoreMode,
    class_probe: Option<&ProbeModel>,
    loc_probe: Option<&ProbeModel>,
    x: ArrayView2<f64>,
    slots: &[(String, u32)],
    references: &[ProbeTarget],
    n_classes: usize,
) -> Result<f64> {
    if references.is_empty() {
        return Err(ProbeError::EmptyReferences);
    }
    if slots.len() != references.len() || x.nrows() != references.len() {
        return Err(ProbeError::Dimension {
            what: "rows for scoring".to_string(),
            expected: references.len(),
            found: x.nrows().min(slots.len()),
        });
    }
    fn need<'a>(p: Option<&'a ProbeModel>, mode: ScoreMode, what: &str) -> Result<&'a ProbeModel> {
        p.ok_or_else(|| ProbeError::DegenerateTask(format!("{} scoring needs a {what} probe", mode.as_str())))
    }
    let classes: Vec<(usize, f64)> = match mode {
        ScoreMode::LocOnly => references.iter().map(|r| (r.y_class, 1.0)).collect(),
        _ => need(class_probe, mode, "classification")?.predict_classes(x)?,
    };
    let boxes: Vec<[f64; 4]> = match mode {
        ScoreMode::ClassOnly => references.iter().map(|r| r.y_bbox).collect(),
        _ => need(loc_probe, mode, "localization")?.predict_boxes(x)?,
    };
    let names = class_names(n_classes);
    let dets: Vec<MappedDetection> = slots
        .iter()
        .zip(classes.iter().zip(&boxes))
        .map(|((sample, _), (&(c, conf), b))| MappedDetection {
            sample_id: sample.clone(),
            bbox: cxcywh_to_xyxy(*b),
            text: names[c].clone(),
            class: Some(c),
            label: Some(names[c].clone()),
            score: conf,
            similarity: None,
            provenance: Provenance::Kept,
            confidence_imputed: false,
        })
        .collect();
    let truth: Vec<GroundTruth> = slots
        .iter()
        .zip(references)
        .map(|((sample, _), r)| GroundTruth {
            sample_id: sample.clone(),
            bbox: cxcywh_to_xyxy(r.y_bbox),
            label: names.get(r.y_class).cloned().unwrap_or_else(|| r.y_class.to_string()),
        })
        .collect();
    let cfg = EvalConfig {
        iou_thresholds: vec![0.5],
        max_dets: usize::MAX,
        ..Default::default()
    };
    Ok(evaluate(&dets, &truth, &names, &cfg)?.ap50)
}

/// One row of a targets file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetRow {
    pub sample_id: String,
    pub token_index: u32,
    #[serde(flatten)]
    pub target: ProbeTarget,
}

pub fn load_targets(path: &Path) -> Result<Vec<TargetRow>> {
    let bytes = std::fs::read(path).map_err(|source| ProbeError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let rows: Vec<TargetRow> = serde_json::from_slice(&bytes).map_err(|e| ProbeError::Format {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    for (i, r) in rows.iter().enumerate() {
        r.target.validate(i)?;
    }
    Ok(rows)
}

/// Targets for approximation mode from the model's own prediction records:
/// class is the argmax of the record vector (ties to the lowest index), box
/// the predicted box. Records with objectness below `min_conf` or without a
/// box are skipped; a missing objectness counts as 1.
pub fn approximation_targets(predictions: &[FeatureRecord], min_conf: f64) -> Vec<TargetRow> {
    predictions
        .iter()
        .filter(|r| f64::from(r.aux.objectness.unwrap_or(1.0)) >= min_conf)
        .filter_map(|r| {
            let b = r.aux.bbox?;
            let mut best = 0;
            for (i, &v) in r.vector.iter().enumerate() {
                if v > r.vector[best] {
                    best = i;
                }
            }
            Some(TargetRow {
                sample_id: r.sample_id.clone(),
                token_index: r.token_index,
                target: ProbeTarget {
                    source: TargetSource::ModelPrediction,
                    y_class: best,
                    y_bbox: b.map(f64::from),
                },
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::probe::model::ProbeTask;
    use crate::store::{AccessPointSpec, Aux};
    use ndarray::{array, Array2};

    fn refs() -> (Vec<(String, u32)>, Vec<ProbeTarget>) {
        let slots = vec![("a".to_string(), 0), ("a".to_string(), 1), ("b".to_string(), 0)];
        let t = |c, b| ProbeTarget {
            source: TargetSource::GroundTruth,
            y_class: c,
            y_bbox: b,
        };
        (slots, vec![t(0, [0.2, 0.2, 0.1, 0.1]), t(1, [0.7, 0.7, 0.2, 0.2]), t(1, [0.5, 0.5, 0.3, 0.3])])
    }

    /// Probes that read class and box directly off one-hot-plus-box features.
    fn exact_probes() -> (ProbeModel, ProbeModel, Array2<f64>) {
        let x = array![
            [1.0, 0.0, 0.2, 0.2, 0.1, 0.1],
            [0.0, 1.0, 0.7, 0.7, 0.2, 0.2],
            [0.0, 1.0, 0.5, 0.5, 0.3, 0.3]
        ];
        let mut cls = ProbeModel::zeros(ProbeTask::Classification, 0, 2, 6);
        cls.w[[0, 0]] = 10.0;
        cls.w[[1, 1]] = 10.0;
        let mut loc = ProbeModel::zeros(ProbeTask::Localization, 0, 4, 6);
        for c in 0..4 {
            loc.w[[c, c + 2]] = 1.0;
        }
        (cls, loc, x)
    }

    #[test]
    fn exact_probe_scores_one() {
        let (slots, r) = refs();
        let (cls, loc, x) = exact_probes();
        for mode in [ScoreMode::Joint, ScoreMode::ClassOnly, ScoreMode::LocOnly] {
            let ap = score_probe(mode, Some(&cls), Some(&loc), x.view(), &slots, &r, 2).unwrap();
            assert!((ap - 1.0).abs() < 1e-12, "{mode:?}");
        }
    }

    #[test]
    fn shifted_boxes_score_zero() {
        let (slots, r) = refs();
        let (cls, mut loc, x) = exact_probes();
        loc.b[0] = 5.0;
        let ap = score_probe(ScoreMode::Joint, Some(&cls), Some(&loc), x.view(), &slots, &r, 2).unwrap();
        assert_eq!(ap, 0.0);
    }

    #[test]
    fn empty_references_error() {
        let (cls, loc, _) = exact_probes();
        let x = Array2::zeros((0, 6));
        let err = score_probe(ScoreMode::Joint, Some(&cls), Some(&loc), x.view(), &[], &[], 2).unwrap_err();
        assert!(matches!(err, ProbeError::EmptyReferences));
    }

    #[test]
    fn approximation_filters_by_objectness() {
        let ap = AccessPointSpec::activation("m", "head", 7);
        let rec = |tok, obj: f32| FeatureRecord {
            access_point: ap.clone(),
            sample_id: "s".into(),
            token_index: tok,
            vector: vec![0.1, 0.9, 0.3],
            aux: Aux {
                objectness: Some(obj),
                bbox: Some([0.5, 0.5, 0.25, 0.25]),
            },
        };
        let t = approximation_targets(&[rec(0, 0.2), rec(1, 0.8)], 0.5);
        assert_eq!(t.len(), 1);
        assert_eq!(t[0].token_index, 1);
        assert_eq!(t[0].target.y_class, 1);
        assert_eq!(t[0].target.source, TargetSource::ModelPrediction);
    }
}
