use std::collections::{BTreeMap, HashMap};

use serde_json::json;
use strata::eval::{
    build_label_space, evaluate as score, load_detections, map_labels as map, provenance_csv, to_coco_results, CocoGroundTruth,
    EmbeddingProvider, EvalConfig, EvalReport, GroundTruth, HashedEmbedder, MappedDetection, PrecomputedEmbeddings, RawDetection,
};
use strata::store::FeatureDataset;

use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::output;

pub const MAPPED_FILE: &str = "mapped.json";
pub const RESULTS_FILE: &str = "detections.json";
pub const PROVENANCE_FILE: &str = "provenance.csv";
pub const METRICS_FILE: &str = "metrics.json";
pub const SWEEP_FILE: &str = "sweep.json";

struct Inputs {
    gt: CocoGroundTruth,
    truth: Vec<GroundTruth>,
    classes: Vec<String>,
    detections: Vec<RawDetection>,
}

fn inputs(cfg: &RunConfig) -> Result<Inputs> {
    let gt = CocoGroundTruth::load(cfg.paths.ground_truth.as_ref().expect("validated"))?;
    let truth = gt.ground_truth()?;
    let classes = gt.class_names();
    let detections = load_detections(cfg.paths.detections.as_ref().expect("validated"))?;
    Ok(Inputs {
        gt,
        truth,
        classes,
        detections,
    })
}

/// Providers by encoder id, built on first use.
struct Providers<'a> {
    cfg: &'a RunConfig,
    cache: HashMap<String, Box<dyn EmbeddingProvider>>,
}

impl<'a> Providers<'a> {
    fn new(cfg: &'a RunConfig) -> Self {
        Self {
            cfg,
            cache: HashMap::new(),
        }
    }

    fn get(&mut self, encoder_id: &str) -> Result<&dyn EmbeddingProvider> {
        if !self.cache.contains_key(encoder_id) {
            let p: Box<dyn EmbeddingProvider> = if encoder_id == "hashed" {
                Box::new(HashedEmbedder::new(self.cfg.embedding.dim))
            } else {
                let dir = self
                    .cfg
                    .paths
                    .embeddings
                    .as_ref()
                    .ok_or_else(|| CliError::config(vec![format!("paths.embeddings is required for encoder {encoder_id:?}")]))?;
                let ds = FeatureDataset::open(dir)?;
                Box::new(PrecomputedEmbeddings::from_table(encoder_id, &ds, &self.cfg.embedding.point)?)
            };
            self.cache.insert(encoder_id.to_string(), p);
        }
        Ok(self.cache[encoder_id].as_ref())
    }
}

fn run_mapping(inputs: &Inputs, config: &EvalConfig, providers: &mut Providers) -> Result<Vec<MappedDetection>> {
    let provider = providers.get(&config.encoder_id)?;
    let space = build_label_space(&inputs.classes, config, provider)?;
    Ok(map(&inputs.detections, &space, config, provider)?)
}

fn provenance_counts(mapped: &[MappedDetection]) -> serde_json::Value {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for d in mapped {
        *counts.entry(d.provenance.as_str()).or_default() += 1;
    }
    json!({
        "detections": mapped.len(),
        "provenance": counts,
        "confidence_imputed": mapped.iter().filter(|d| d.confidence_imputed).count(),
    })
}

fn write_mapping(cfg: &RunConfig, inputs: &Inputs, mapped: &[MappedDetection]) -> Result<()> {
    output::write_json(&cfg.out_dir.join(MAPPED_FILE), mapped)?;
    output::write_json(&cfg.out_dir.join(RESULTS_FILE), &to_coco_results(mapped, &inputs.gt))?;
    output::write_bytes(&cfg.out_dir.join(PROVENANCE_FILE), &provenance_csv(mapped)?)
}

pub fn map_labels(cfg: &RunConfig) -> Result<serde_json::Value> {
    let inputs = inputs(cfg)?;
    let mut providers = Providers::new(cfg);
    let mapped = run_mapping(&inputs, &cfg.eval, &mut providers)?;
    write_mapping(cfg, &inputs, &mapped)?;
    Ok(provenance_counts(&mapped))
}

fn headline(r: &EvalReport) -> serde_json::Value {
    json!({ "AP": r.ap, "AP50": r.ap50, "AR": r.ar })
}

pub fn evaluate(cfg: &RunConfig) -> Result<serde_json::Value> {
    let inputs = inputs(cfg)?;
    let mut providers = Providers::new(cfg);
    let mapped = run_mapping(&inputs, &cfg.eval, &mut providers)?;
    let report = score(&mapped, &inputs.truth, &inputs.classes, &cfg.eval)?;
    write_mapping(cfg, &inputs, &mapped)?;
    output::write_json(&cfg.out_dir.join(METRICS_FILE), &report)?;

    let mut summary = headline(&report);
    summary["mapping"] = provenance_counts(&mapped);
    if let Some(grid) = &cfg.sweep {
        let mut rows = Vec::new();
        for c in grid.expand(&cfg.eval) {
            let m = run_mapping(&inputs, &c, &mut providers)?;
            let r = score(&m, &inputs.truth, &inputs.classes, &c)?;
            let mut row = json!({
                "encoder_id": c.encoder_id,
                "max_pred": c.max_pred,
                "min_conf": c.min_conf,
                "use_objectness": c.use_objectness,
                "use_topk": c.use_topk,
                "use_negatives": c.use_negatives,
                "use_parts": c.use_parts,
            });
            row.as_object_mut().unwrap().extend(headline(&r).as_object().unwrap().clone());
            rows.push(row);
        }
        output::write_json(&cfg.out_dir.join(SWEEP_FILE), &rows)?;
        summary["sweep"] = json!(rows);
    }
    Ok(summary)
}
