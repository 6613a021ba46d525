use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::config::EvalConfig;
use super::error::{EvalError, Result};
use super::mapping::{iou, validate_box, MappedDetection};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub sample_id: String,
    pub bbox: [f64; 4],
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    #[serde(rename = "AP")]
    pub ap: f64,
    #[serde(rename = "AP50")]
    pub ap50: f64,
    #[serde(rename = "AR")]
    pub ar: f64,
    pub gt_count: usize,
    pub det_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    #[serde(rename = "AP")]
    pub ap: f64,
    #[serde(rename = "AP50")]
    pub ap50: f64,
    #[serde(rename = "AR")]
    pub ar: f64,
    /// Classes with at least one ground-truth box.
    pub per_class: BTreeMap<String, ClassMetrics>,
    pub iou_thresholds: Vec<f64>,
    pub max_dets: usize,
}

/// Detections and ground truth of one class in one image. Detections are
/// sorted by score descending, ties in input order.
struct Cell<'a> {
    dets: Vec<&'a MappedDetection>,
    gts: Vec<&'a [f64; 4]>,
}

impl Cell<'_> {
    /// Greedy matching at `threshold`: each detection takes the unmatched box
    /// with the highest IoU at or above it, ties to the lowest index.
    fn matches(&self, threshold: f64) -> Vec<bool> {
        let mut used = vec![false; self.gts.len()];
        self.dets
            .iter()
            .map(|d| {
                let mut best: Option<(usize, f64)> = None;
                for (gi, g) in self.gts.iter().enumerate() {
                    if used[gi] {
                        continue;
                    }
                    let v = iou(&d.bbox, g);
                    if v >= threshold && best.is_none_or(|(_, bv)| v > bv) {
                        best = Some((gi, v));
                    }
                }
                if let Some((gi, _)) = best {
                    used[gi] = true;
                }
                best.is_some()
            })
            .collect()
    }
}

/// 101-point interpolated precision over a score-sorted hit sequence.
pub fn interpolated_ap(hits: &[bool], n_gt: usize) -> f64 {
    let mut recall = Vec::with_capacity(hits.len());
    let mut precision = Vec::with_capacity(hits.len());
    let (mut tp, mut fp) = (0.0, 0.0);
    for &h in hits {
        if h {
            tp += 1.0;
        } else {
            fp += 1.0;
        }
        recall.push(tp / n_gt as f64);
        precision.push(tp / (tp + fp));
    }
    for i in (0..precision.len().saturating_sub(1)).rev() {
        precision[i] = precision[i].max(precision[i + 1]);
    }
    let mut sum = 0.0;
    for i in 0..=100 {
        let r = i as f64 / 100.0;
        let at = recall.partition_point(|&rc| rc < r);
        if at < precision.len() {
            sum += precision[at];
        }
    }
    sum / 101.0
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// COCO-scheme AP and AR over kept detections.
///
/// AP uses every detection; AR keeps the `max_dets` highest-scoring
/// detections per image and class. Both average over classes with ground
/// truth, then over thresholds.
pub fn evaluate(detections: &[MappedDetection], ground_truth: &[GroundTruth], classes: &[String], config: &EvalConfig) -> Result<EvalReport> {
    let issues = config.validate();
    if !issues.is_empty() {
        return Err(EvalError::Config(issues));
    }
    if ground_truth.is_empty() {
        return Err(EvalError::EmptyGroundTruth);
    }
    let index: HashMap<&str, usize> = classes.iter().enumerate().map(|(i, c)| (c.as_str(), i)).collect();

    // (class, image) cells; BTreeMap keeps the reduction order fixed.
    let mut cells: BTreeMap<(usize, &str), Cell> = BTreeMap::new();
    let mut gt_count = vec![0usize; classes.len()];
    let mut det_count = vec![0usize; classes.len()];
    for g in ground_truth {
        validate_box(&g.sample_id, &g.bbox)?;
        let c = *index.get(g.label.as_str()).ok_or_else(|| EvalError::UnknownLabel {
            sample_id: g.sample_id.clone(),
            label: g.label.clone(),
        })?;
        gt_count[c] += 1;
        cells
            .entry((c, g.sample_id.as_str()))
            .or_insert_with(|| Cell { dets: Vec::new(), gts: Vec::new() })
            .gts
            .push(&g.bbox);
    }
    for d in detections.iter().filter(|d| d.is_kept()) {
        let label = d.label.as_deref().unwrap_or_default();
        let c = *index.get(label).ok_or_else(|| EvalError::UnknownLabel {
            sample_id: d.sample_id.clone(),
            label: label.to_string(),
        })?;
        if !d.score.is_finite() {
            return Err(EvalError::InvalidScore {
                sample_id: d.sample_id.clone(),
                what: "score",
                value: d.score,
            });
        }
        det_count[c] += 1;
        cells
            .entry((c, d.sample_id.as_str()))
            .or_insert_with(|| Cell { dets: Vec::new(), gts: Vec::new() })
            .dets
            .push(d);
    }
    for cell in cells.values_mut() {
        cell.dets.sort_by(|a, b| b.score.total_cmp(&a.score));
    }

    let thresholds = &config.iou_thresholds;
    let evaluated: Vec<usize> = (0..classes.len()).filter(|&c| gt_count[c] > 0).collect();
    // ap[class][threshold], ar[class][threshold]
    let mut ap = vec![vec![0.0; thresholds.len()]; classes.len()];
    let mut ar = vec![vec![0.0; thresholds.len()]; classes.len()];
    for &c in &evaluated {
        let class_cells: Vec<&Cell> = cells.range((c, "")..).take_while(|((cc, _), _)| *cc == c).map(|(_, v)| v).collect();
        for (ti, &t) in thresholds.iter().enumerate() {
            let mut scored: Vec<(f64, bool)> = Vec::new();
            let mut recalled = 0usize;
            for cell in &class_cells {
                let hits = cell.matches(t);
                recalled += hits.iter().take(config.max_dets).filter(|h| **h).count();
                scored.extend(cell.dets.iter().map(|d| d.score).zip(hits));
            }
            scored.sort_by(|a, b| b.0.total_cmp(&a.0));
            let hits: Vec<bool> = scored.into_iter().map(|s| s.1).collect();
            ap[c][ti] = interpolated_ap(&hits, gt_count[c]);
            ar[c][ti] = recalled as f64 / gt_count[c] as f64;
        }
    }

    let over_classes = |m: &Vec<Vec<f64>>, ti: usize| mean(&evaluated.iter().map(|&c| m[c][ti]).collect::<Vec<_>>());
    let ap_all = mean(&(0..thresholds.len()).map(|ti| over_classes(&ap, ti)).collect::<Vec<_>>());
    let ar_all = mean(&(0..thresholds.len()).map(|ti| over_classes(&ar, ti)).collect::<Vec<_>>());
    let ap50 = match thresholds.iter().position(|&t| (t - 0.5).abs() < 1e-12) {
        Some(ti) => over_classes(&ap, ti),
        None => ap50_only(&cells, &evaluated, &gt_count),
    };

    let per_class = evaluated
        .iter()
        .map(|&c| {
            let ap50_c = thresholds
                .iter()
                .position(|&t| (t - 0.5).abs() < 1e-12)
                .map_or(f64::NAN, |ti| ap[c][ti]);
            (
                classes[c].clone(),
                ClassMetrics {
                    ap: mean(&ap[c]),
                    ap50: ap50_c,
                    ar: mean(&ar[c]),
                    gt_count: gt_count[c],
                    det_count: det_count[c],
                },
            )
        })
        .collect();

    Ok(EvalReport {
        ap: ap_all,
        ap50,
        ar: ar_all,
        per_class,
        iou_thresholds: thresholds.clone(),
        max_dets: config.max_dets,
    })
}

/// AP at IoU 0.5 when the configured thresholds skip it.
fn ap50_only(cells: &BTreeMap<(usize, &str), Cell>, evaluated: &[usize], gt_count: &[usize]) -> f64 {
    let per: Vec<f64> = evaluated
        .iter()
        .map(|&c| {
            let mut scored: Vec<(f64, bool)> = Vec::new();
            for ((_, _), cell) in cells.range((c, "")..).take_while(|((cc, _), _)| *cc == c) {
                scored.extend(cell.dets.iter().map(|d| d.score).zip(cell.matches(0.5)));
            }
            scored.sort_by(|a, b| b.0.total_cmp(&a.0));
            interpolated_ap(&scored.into_iter().map(|s| s.1).collect::<Vec<_>>(), gt_count[c])
        })
        .collect();
    mean(&per)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::mapping::Provenance;

    fn kept(sample: &str, bbox: [f64; 4], label: &str, score: f64) -> MappedDetection {
        MappedDetection {
            sample_id: sample.to_string(),
            bbox,
            text: label.to_string(),
            class: None,
            label: Some(label.to_string()),
            score,
            similarity: None,
            provenance: Provenance::Kept,
            confidence_imputed: false,
        }
    }

    fn gt(sample: &str, bbox: [f64; 4], label: &str) -> GroundTruth {
        GroundTruth {
            sample_id: sample.to_string(),
            bbox,
            label: label.to_string(),
        }
    }

    const BOX: [f64; 4] = [0.0, 0.0, 10.0, 10.0];
    const FAR: [f64; 4] = [50.0, 50.0, 60.0, 60.0];

    fn classes() -> Vec<String> {
        vec!["cat".to_string()]
    }

    #[test]
    fn single_true_positive() {
        let r = evaluate(&[kept("a", BOX, "cat", 0.9)], &[gt("a", BOX, "cat")], &classes(), &EvalConfig::default()).unwrap();
        assert_eq!(r.ap50, 1.0);
        assert_eq!(r.ar, 1.0);
    }

    #[test]
    fn false_positive_after_true_positive() {
        let dets = [kept("a", BOX, "cat", 0.9), kept("a", FAR, "cat", 0.8)];
        let r = evaluate(&dets, &[gt("a", BOX, "cat")], &classes(), &EvalConfig::default()).unwrap();
        assert_eq!(r.ap50, 1.0);
    }

    #[test]
    fn false_positive_before_true_positive() {
        let dets = [kept("a", FAR, "cat", 0.9), kept("a", BOX, "cat", 0.8)];
        let r = evaluate(&dets, &[gt("a", BOX, "cat")], &classes(), &EvalConfig::default()).unwrap();
        assert_eq!(r.ap50, 0.5);
    }

    #[test]
    fn ground_truth_label_must_be_known() {
        let err = evaluate(&[], &[gt("a", BOX, "zebra")], &classes(), &EvalConfig::default()).unwrap_err();
        assert!(matches!(err, EvalError::UnknownLabel { .. }));
    }

    #[test]
    fn filtered_detections_do_not_count() {
        let mut d = kept("a", BOX, "cat", 0.9);
        d.provenance = Provenance::FilteredNegative;
        let r = evaluate(&[d], &[gt("a", BOX, "cat")], &classes(), &EvalConfig::default()).unwrap();
        assert_eq!(r.ap, 0.0);
        assert_eq!(r.per_class["cat"].det_count, 0);
    }

    #[test]
    fn report_json_keys() {
        let r = evaluate(&[kept("a", BOX, "cat", 0.9)], &[gt("a", BOX, "cat")], &classes(), &EvalConfig::default()).unwrap();
        let v = serde_json::to_value(&r).unwrap();
        for k in ["AP", "AP50", "AR", "per_class"] {
            assert!(v.get(k).is_some(), "{k}");
        }
    }
}
