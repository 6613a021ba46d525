use std::collections::BTreeSet;
use std::path::Path;

use serde_json::{json, Value};
use strata::eval::{xyxy_to_xywh, CocoAnnotation, CocoCategory, CocoDetection, CocoGroundTruth, CocoImage};
use strata::probe::TargetRow;
use strata::store::{write_table, AccessPointSpec, Dtype, FeatureRecord, WriteOptions};
use strata::synth::{
    noisy_confidence_fixture, phase_stack, planted_dictionary, rows_to_records, ungrounded_fixture, DetectionFixture,
};

use crate::config::RunConfig;
use crate::error::Result;
use crate::output;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Kind {
    Dictionary,
    Phase,
    Detections,
    All,
}

fn round_to(records: &mut [FeatureRecord], dtype: Dtype) {
    if dtype == Dtype::F32 {
        for r in records {
            r.vector.iter_mut().for_each(|v| *v = *v as f32 as f64);
        }
    }
}

fn table(records: &mut [FeatureRecord], dir: &Path, dtype: Dtype) -> Result<u64> {
    round_to(records, dtype);
    let schema = write_table(
        records,
        dir,
        WriteOptions {
            dtype,
            ..Default::default()
        },
    )?;
    Ok(schema.row_count)
}

pub fn coco_ground_truth(f: &DetectionFixture) -> CocoGroundTruth {
    let images: BTreeSet<&str> = f.ground_truth.iter().map(|g| g.sample_id.as_str()).collect();
    let category = |name: &str| f.classes.iter().position(|c| c == name).map_or(0, |i| i as u64 + 1);
    CocoGroundTruth {
        images: images
            .into_iter()
            .map(|id| CocoImage {
                id: Value::from(id),
                file_name: None,
                width: None,
                height: None,
            })
            .collect(),
        annotations: f
            .ground_truth
            .iter()
            .enumerate()
            .map(|(i, g)| CocoAnnotation {
                id: Some(i as u64 + 1),
                image_id: Value::from(g.sample_id.as_str()),
                category_id: category(&g.label),
                bbox: xyxy_to_xywh(g.bbox),
            })
            .collect(),
        categories: f
            .classes
            .iter()
            .enumerate()
            .map(|(i, c)| CocoCategory {
                id: i as u64 + 1,
                name: c.clone(),
            })
            .collect(),
    }
}

pub fn coco_detections(f: &DetectionFixture) -> Vec<CocoDetection> {
    f.detections
        .iter()
        .map(|d| CocoDetection {
            image_id: Value::from(d.sample_id.as_str()),
            bbox: xyxy_to_xywh(d.bbox),
            score: d.confidence,
            text: Some(d.text.clone()),
            objectness: d.objectness,
            category_id: None,
        })
        .collect()
}

fn detection_set(dir: &Path, f: &DetectionFixture) -> Result<Value> {
    output::write_json(&dir.join("gt.json"), &coco_ground_truth(f))?;
    output::write_json(&dir.join("detections.json"), &coco_detections(f))?;
    Ok(json!({ "ground_truth": f.ground_truth.len(), "detections": f.detections.len() }))
}

pub fn run(cfg: &RunConfig, kind: Kind) -> Result<Value> {
    let out = &cfg.out_dir;
    let s = &cfg.synth;
    let mut summary = json!({});
    if matches!(kind, Kind::Dictionary | Kind::All) {
        let planted = planted_dictionary(&s.dictionary);
        let mut records = rows_to_records(&planted.data, &AccessPointSpec::activation("planted", "resid", 0));
        let rows = table(&mut records, &out.join("dictionary"), s.dtype)?;
        let atoms: Vec<Vec<f64>> = planted.dictionary.columns().into_iter().map(|c| c.to_vec()).collect();
        output::write_json(&out.join("dictionary_atoms.json"), &atoms)?;
        summary["dictionary"] = json!({ "rows": rows, "point": "resid", "atoms": atoms.len() });
    }
    if matches!(kind, Kind::Phase | Kind::All) {
        let stack = phase_stack(&s.phase);
        let mut records = stack.to_records("phase");
        let rows = table(&mut records, &out.join("phase"), s.dtype)?;
        let targets: Vec<TargetRow> = stack
            .slots
            .iter()
            .zip(&stack.targets)
            .map(|((sample_id, token_index), t)| TargetRow {
                sample_id: sample_id.clone(),
                token_index: *token_index,
                target: t.clone(),
            })
            .collect();
        output::write_json(&out.join("phase_targets.json"), &targets)?;
        summary["phase"] = json!({ "rows": rows, "layers": stack.layers.len(), "targets": targets.len() });
    }
    if matches!(kind, Kind::Detections | Kind::All) {
        summary["ungrounded"] = detection_set(&out.join("ungrounded"), &ungrounded_fixture(&s.detections))?;
        summary["noisy_confidence"] = detection_set(&out.join("noisy_confidence"), &noisy_confidence_fixture(&s.detections))?;
    }
    Ok(summary)
}
