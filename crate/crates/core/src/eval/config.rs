use serde::{Deserialize, Serialize};

/// Control parameters of the label-mapping and evaluation pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub encoder_id: String,
    /// Kept detections per image after sorting by score.
    pub max_pred: usize,
    /// Detections with confidence below this are dropped first.
    pub min_conf: f64,
    /// Multiply confidence by objectness when the detection carries one.
    pub use_objectness: bool,
    /// Expand each detection into its `k_map` most similar classes.
    pub use_topk: bool,
    pub k_map: usize,
    /// Softmax temperature over similarities for the top-k expansion weights.
    pub topk_temperature: f64,
    pub use_negatives: bool,
    pub use_parts: bool,
    pub negatives: Vec<String>,
    /// `{}` is replaced by the class name.
    pub part_template: String,
    pub iou_thresholds: Vec<f64>,
    /// Detection budget per image and class for AR.
    pub max_dets: usize,
}

pub fn coco_iou_thresholds() -> Vec<f64> {
    (0..10).map(|i| 0.5 + 0.05 * i as f64).collect()
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            encoder_id: "hashed".to_string(),
            max_pred: 900,
            min_conf: 0.0,
            use_objectness: false,
            use_topk: false,
            k_map: 3,
            topk_temperature: 0.01,
            use_negatives: false,
            use_parts: false,
            negatives: vec!["an object".to_string(), "a thing".to_string()],
            part_template: "parts of {}".to_string(),
            iou_thresholds: coco_iou_thresholds(),
            max_dets: 100,
        }
    }
}

impl EvalConfig {
    pub fn part_prompt(&self, class: &str) -> String {
        self.part_template.replace("{}", class)
    }

    pub fn validate(&self) -> Vec<String> {
        let mut issues = Vec::new();
        if self.max_pred == 0 {
            issues.push("eval.max_pred must be at least 1".to_string());
        }
        if !(0.0..=1.0).contains(&self.min_conf) {
            issues.push(format!("eval.min_conf must lie in [0, 1], got {}", self.min_conf));
        }
        if self.use_topk && self.k_map == 0 {
            issues.push("eval.k_map must be at least 1 when use_topk is set".to_string());
        }
        if !(self.topk_temperature > 0.0) {
            issues.push("eval.topk_temperature must be positive".to_string());
        }
        if self.use_negatives && self.negatives.is_empty() {
            issues.push("eval.negatives must not be empty when use_negatives is set".to_string());
        }
        if self.use_parts && !self.part_template.contains("{}") {
            issues.push("eval.part_template must contain {}".to_string());
        }
        if self.iou_thresholds.is_empty() || self.iou_thresholds.iter().any(|t| !(0.0..=1.0).contains(t)) {
            issues.push("eval.iou_thresholds must be a nonempty list of values in [0, 1]".to_string());
        }
        if self.max_dets == 0 {
            issues.push("eval.max_dets must be at least 1".to_string());
        }
        issues
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = EvalConfig::default();
        assert_eq!(c.max_pred, 900);
        assert_eq!(c.min_conf, 0.0);
        assert_eq!(c.iou_thresholds.len(), 10);
        assert!((c.iou_thresholds[9] - 0.95).abs() < 1e-12);
        assert_eq!(c.part_prompt("a car"), "parts of a car");
        assert!(c.validate().is_empty());
    }

    #[test]
    fn validation_collects_all_issues() {
        let c = EvalConfig {
            max_pred: 0,
            min_conf: 2.0,
            iou_thresholds: vec![],
            ..Default::default()
        };
        assert_eq!(c.validate().len(), 3);
    }
}
