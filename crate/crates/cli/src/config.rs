//! Run configuration.
//!
//! Precedence, lowest first: built-in defaults, the `--config` file (TOML, or
//! JSON when the extension is `.json`), command-line flags. The top-level
//! `seed` is copied into every module seed after merging, so the echoed
//! config always shows the seeds actually used.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use strata::eval::EvalConfig;
use strata::probe::ProbeConfig;
use strata::sae::SaeConfig;
use strata::store::{Dtype, DEFAULT_ROW_GROUP_ROWS};
use strata::synth::{DetectionSpec, DictionarySpec, PhaseStackSpec};

use crate::error::{CliError, Kind, Result};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Paths {
    /// Feature table directory read by training and attribution.
    pub store: Option<PathBuf>,
    /// Raw tensor dump directory for `ingest`.
    pub dump: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    /// COCO ground-truth JSON.
    pub ground_truth: Option<PathBuf>,
    /// COCO-style detection list with a `text` field per entry.
    pub detections: Option<PathBuf>,
    /// Feature table of precomputed text embeddings.
    pub embeddings: Option<PathBuf>,
    /// Probe targets JSON.
    pub targets: Option<PathBuf>,
    /// Trajectory JSON for `trajectory`.
    pub trajectory: Option<PathBuf>,
    /// JSON rows `{sample_id, token_index, class}` for attribution.
    pub classes: Option<PathBuf>,
    /// JSON object `sample_id -> image path` for attribution.
    pub images: Option<PathBuf>,
    pub image_root: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IngestSection {
    pub dtype: Dtype,
    pub row_group_rows: usize,
}

impl Default for IngestSection {
    fn default() -> Self {
        Self {
            dtype: Dtype::F32,
            row_group_rows: DEFAULT_ROW_GROUP_ROWS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SaeSection {
    pub point: Option<String>,
    /// Set to train a transcoder from `point` to this point.
    pub target_point: Option<String>,
    pub epochs: usize,
    pub max_steps: Option<u64>,
    /// `input_dim` is taken from the table.
    pub config: SaeConfig,
}

impl Default for SaeSection {
    fn default() -> Self {
        Self {
            point: None,
            target_point: None,
            epochs: 1,
            max_steps: None,
            config: SaeConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProbeSection {
    /// Layer points, in layer order. Empty means every activation point.
    pub points: Vec<String>,
    /// Prediction point whose aux boxes and objectness become the targets
    /// when no targets file is given.
    pub predictions: Option<String>,
    pub min_conf: f64,
    /// Defaults to one more than the largest target class.
    pub n_classes: Option<usize>,
    pub config: ProbeConfig,
}

impl Default for ProbeSection {
    fn default() -> Self {
        Self {
            points: Vec::new(),
            predictions: None,
            min_conf: 0.0,
            n_classes: None,
            config: ProbeConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbeddingSection {
    /// Dimension of the built-in hashed encoder.
    pub dim: usize,
    /// Point name of the precomputed embedding table.
    pub point: String,
}

impl Default for EmbeddingSection {
    fn default() -> Self {
        Self {
            dim: 512,
            point: "text".to_string(),
        }
    }
}

/// Cartesian grid of evaluation settings. Empty axes keep the base value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepGrid {
    pub encoder_id: Vec<String>,
    pub max_pred: Vec<usize>,
    pub min_conf: Vec<f64>,
    pub use_objectness: Vec<bool>,
    pub use_topk: Vec<bool>,
    pub use_negatives: Vec<bool>,
    pub use_parts: Vec<bool>,
}

impl SweepGrid {
    /// Every combination, last axis fastest.
    pub fn expand(&self, base: &EvalConfig) -> Vec<EvalConfig> {
        fn axis<T: Clone>(values: &[T], base: T) -> Vec<T> {
            if values.is_empty() {
                vec![base]
            } else {
                values.to_vec()
            }
        }
        let mut out = Vec::new();
        for enc in axis(&self.encoder_id, base.encoder_id.clone()) {
            for &mp in &axis(&self.max_pred, base.max_pred) {
                for &mc in &axis(&self.min_conf, base.min_conf) {
                    for &obj in &axis(&self.use_objectness, base.use_objectness) {
                        for &topk in &axis(&self.use_topk, base.use_topk) {
                            for &neg in &axis(&self.use_negatives, base.use_negatives) {
                                for &parts in &axis(&self.use_parts, base.use_parts) {
                                    out.push(EvalConfig {
                                        encoder_id: enc.clone(),
                                        max_pred: mp,
                                        min_conf: mc,
                                        use_objectness: obj,
                                        use_topk: topk,
                                        use_negatives: neg,
                                        use_parts: parts,
                                        ..base.clone()
                                    });
                                }
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AttributeSection {
    pub point: Option<String>,
    pub n: usize,
    pub batch_size: usize,
    pub html: bool,
}

impl Default for AttributeSection {
    fn default() -> Self {
        Self {
            point: None,
            n: strata::attribution::DEFAULT_TOP_N,
            batch_size: 1024,
            html: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrajectorySection {
    /// Task whose curve drives transition detection.
    pub task: String,
    pub delta: f64,
}

impl Default for TrajectorySection {
    fn default() -> Self {
        Self {
            task: "joint".to_string(),
            delta: ProbeConfig::default().delta,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSection {
    pub dtype: Dtype,
    pub dictionary: DictionarySpec,
    pub phase: PhaseStackSpec,
    pub detections: DetectionSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    pub paths: Paths,
    pub ingest: IngestSection,
    pub sae: SaeSection,
    pub probes: ProbeSection,
    pub eval: EvalConfig,
    pub embedding: EmbeddingSection,
    pub sweep: Option<SweepGrid>,
    pub attribute: AttributeSection,
    pub trajectory: TrajectorySection,
    pub synth: SynthSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out_dir: PathBuf::from("run"),
            paths: Paths::default(),
            ingest: IngestSection::default(),
            sae: SaeSection::default(),
            probes: ProbeSection::default(),
            eval: EvalConfig::default(),
            embedding: EmbeddingSection::default(),
            sweep: None,
            attribute: AttributeSection::default(),
            trajectory: TrajectorySection::default(),
            synth: SynthSection::default(),
        }
    }
}

/// Parse a config file. Unknown keys are reported together with type errors.
pub fn load(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let value: serde_json::Value = if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text).map_err(|e| CliError::new(Kind::Config, e.to_string()).at(path))?
    } else {
        toml::from_str(&text).map_err(|e| CliError::new(Kind::Config, e.to_string()).at(path))?
    };
    parse_value(value).map_err(|e| e.at(path))
}

pub fn parse_value(value: serde_json::Value) -> Result<RunConfig> {
    let mut unknown = Vec::new();
    let parsed: std::result::Result<RunConfig, _> = serde_ignored::deserialize(value, |p| unknown.push(format!("{p}: unknown key")));
    match parsed {
        Ok(cfg) if unknown.is_empty() => Ok(cfg),
        Ok(_) => Err(CliError::config(unknown)),
        Err(e) => {
            unknown.push(e.to_string());
            Err(CliError::config(unknown))
        }
    }
}

/// Core validation messages name fields from the library's point of view;
/// point them at the config file keys instead.
pub fn rekey(issue: &str) -> String {
    if let Some(rest) = issue.strip_prefix("sae.") {
        format!("sae.config.{rest}")
    } else if let Some(rest) = issue.strip_prefix("probe.") {
        format!("probes.config.{rest}")
    } else {
        issue.to_string()
    }
}

impl RunConfig {
    pub fn propagate_seed(&mut self) {
        let s = self.seed;
        self.sae.config.seed = s;
        self.probes.config.seed = s;
        self.synth.dictionary.seed = s;
        self.synth.phase.seed = s;
        self.synth.detections.seed = s;
    }

    /// Problems in the sections `command` reads, all at once.
    pub fn validate(&self, command: &str) -> Vec<String> {
        let mut issues = Vec::new();
        let mut need = |what: &str, present: bool| {
            if !present {
                issues.push(format!("{what} is required for {command}"));
            }
        };
        match command {
            "ingest" => need("paths.dump", self.paths.dump.is_some()),
            "train-sae" => {
                need("paths.store", self.paths.store.is_some());
                need("sae.point", self.sae.point.is_some());
            }
            "train-probes" => {
                need("paths.store", self.paths.store.is_some());
                need(
                    "paths.targets or probes.predictions",
                    self.paths.targets.is_some() || self.probes.predictions.is_some(),
                );
            }
            "map-labels" | "evaluate" => {
                need("paths.ground_truth", self.paths.ground_truth.is_some());
                need("paths.detections", self.paths.detections.is_some());
            }
            "attribute" => {
                need("paths.store", self.paths.store.is_some());
                need("paths.checkpoint", self.paths.checkpoint.is_some());
                need("attribute.point", self.attribute.point.is_some());
            }
            "trajectory" => need("paths.trajectory", self.paths.trajectory.is_some()),
            _ => {}
        }
        match command {
            "ingest" => {
                if self.ingest.row_group_rows == 0 {
                    issues.push("ingest.row_group_rows must be at least 1".into());
                }
            }
            "train-sae" => {
                // input_dim comes from the table; checks that depend on it
                // run again once it is known
                let cfg = SaeConfig {
                    input_dim: 1,
                    ..self.sae.config.clone()
                };
                let width_dependent = ["sae.input_dim", "sae.k must lie", "sae.matryoshka_prefixes must end"];
                issues.extend(
                    cfg.validate()
                        .into_iter()
                        .filter(|i| !width_dependent.iter().any(|w| i.starts_with(w)))
                        .map(|i| rekey(&i)),
                );
                if self.sae.epochs == 0 && self.sae.max_steps.is_none() {
                    issues.push("sae.epochs must be at least 1".into());
                }
            }
            "train-probes" => {
                issues.extend(self.probes.config.validate().into_iter().map(|i| rekey(&i)));
                if self.probes.n_classes == Some(0) {
                    issues.push("probes.n_classes must be at least 1".into());
                }
            }
            "map-labels" | "evaluate" => {
                issues.extend(self.eval.validate());
                if self.eval.encoder_id == "hashed" && self.embedding.dim == 0 {
                    issues.push("embedding.dim must be at least 1".into());
                }
                if self.eval.encoder_id != "hashed" && self.paths.embeddings.is_none() {
                    issues.push(format!(
                        "paths.embeddings is required for encoder {:?}",
                        self.eval.encoder_id
                    ));
                }
                if let Some(grid) = &self.sweep {
                    for (i, c) in grid.expand(&self.eval).iter().enumerate() {
                        issues.extend(c.validate().into_iter().map(|m| format!("sweep[{i}]: {m}")));
                    }
                }
            }
            "attribute" => {
                if self.attribute.n == 0 {
                    issues.push("attribute.n must be at least 1".into());
                }
                if self.attribute.batch_size == 0 {
                    issues.push("attribute.batch_size must be at least 1".into());
                }
            }
            "trajectory" => {
                if !(self.trajectory.delta >= 0.0) {
                    issues.push("trajectory.delta must be non-negative".into());
                }
            }
            _ => {}
        }
        issues
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_is_the_default() {
        assert_eq!(parse_value(serde_json::json!({})).unwrap(), RunConfig::default());
    }

    #[test]
    fn unknown_keys_are_all_reported() {
        let err = parse_value(serde_json::json!({"sede": 1, "eval": {"max_pred": 5, "topk": true}})).unwrap_err();
        assert_eq!(err.kind, Kind::Config);
        assert_eq!(err.issues.len(), 2, "{:?}", err.issues);
    }

    #[test]
    fn toml_sections_parse() {
        let v: serde_json::Value = toml::from_str(
            "seed = 3\n[eval]\nuse_negatives = true\n[sae.config]\nk = 8\n[sae.config.optimizer]\nlr = 0.01\n",
        )
        .unwrap();
        let cfg = parse_value(v).unwrap();
        assert_eq!(cfg.seed, 3);
        assert!(cfg.eval.use_negatives);
        assert_eq!(cfg.sae.config.k, 8);
        assert_eq!(cfg.sae.config.optimizer.lr, 0.01);
        assert_eq!(cfg.sae.config.optimizer.beta1, SaeConfig::default().optimizer.beta1);
    }

    #[test]
    fn validation_lists_every_problem() {
        let mut cfg = RunConfig::default();
        cfg.eval.max_pred = 0;
        cfg.eval.encoder_id = "clip".into();
        let issues = cfg.validate("evaluate");
        // two missing paths, max_pred, missing embeddings table
        assert_eq!(issues.len(), 4, "{issues:?}");
    }

    #[test]
    fn sweep_is_a_cartesian_product() {
        let grid = SweepGrid {
            use_negatives: vec![false, true],
            use_objectness: vec![false, true],
            max_pred: vec![10, 100, 900],
            ..Default::default()
        };
        let all = grid.expand(&EvalConfig::default());
        assert_eq!(all.len(), 12);
        assert!(!all[0].use_negatives && all[1].use_negatives);
        assert_eq!(all[11].max_pred, 900);
    }
}
