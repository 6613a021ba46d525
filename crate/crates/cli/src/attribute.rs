use std::collections::HashMap;

use serde::Deserialize;
use serde_json::json;
use strata::attribution::{attribute, emit_report, AttributeOptions, EmitOptions, RecordContext};
use strata::sae::Checkpoint;
use strata::store::FeatureDataset;

use crate::config::RunConfig;
use crate::error::Result;
use crate::output;

#[derive(Deserialize)]
struct ClassRow {
    sample_id: String,
    token_index: u32,
    class: String,
}

fn context(cfg: &RunConfig) -> Result<RecordContext> {
    let mut ctx = RecordContext::default();
    if let Some(path) = &cfg.paths.classes {
        let rows: Vec<ClassRow> = output::read_json(path)?;
        ctx.classes = rows.into_iter().map(|r| ((r.sample_id, r.token_index), r.class)).collect();
    }
    if let Some(path) = &cfg.paths.images {
        let images: HashMap<String, String> = output::read_json(path)?;
        ctx.images = images;
    }
    Ok(ctx)
}

pub fn run(cfg: &RunConfig) -> Result<serde_json::Value> {
    let ckpt = Checkpoint::load(cfg.paths.checkpoint.as_ref().expect("validated"))?;
    let ds = FeatureDataset::open(cfg.paths.store.as_ref().expect("validated"))?;
    let point = cfg.attribute.point.as_deref().expect("validated");
    let report = attribute(
        &ckpt.model,
        &ds,
        point,
        ckpt.input_norm.as_ref(),
        &context(cfg)?,
        &AttributeOptions {
            n: cfg.attribute.n,
            batch_size: cfg.attribute.batch_size,
        },
    )?;
    let manifest = emit_report(
        &report,
        &cfg.out_dir,
        &EmitOptions {
            html: cfg.attribute.html,
            image_root: cfg.paths.image_root.clone(),
        },
    )?;
    Ok(json!({
        "point": point,
        "n": report.n,
        "rows_seen": report.rows_seen,
        "coverage": report.coverage,
        "cooccurrence_rows": report.cooccurrence.len(),
        "missing_images": manifest.missing_images.len(),
    }))
}
