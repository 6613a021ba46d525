use ndarray::Array2;
use serde_json::json;
use strata::sae::{fit_dataset, fit_task, make_transcoder, Checkpoint, FitOptions, NormStats, SaeConfig, SaeError, SaeTrainer};
use strata::store::FeatureDataset;

use crate::config::RunConfig;
use crate::error::Result;
use crate::output;

pub const CHECKPOINT_FILE: &str = "sae.ckpt";
pub const LOG_FILE: &str = "train_log.json";

fn normalize_rows(x: &mut Array2<f64>) -> Result<NormStats> {
    let stats = NormStats::fit(|| x.rows().into_iter().map(|r| r.to_slice().expect("standard layout")))?;
    for mut row in x.rows_mut() {
        stats.apply_in_place(row.as_slice_mut().expect("standard layout"));
    }
    Ok(stats)
}

pub fn run(cfg: &RunConfig) -> Result<serde_json::Value> {
    let store = cfg.paths.store.as_ref().expect("validated");
    let point = cfg.sae.point.as_deref().expect("validated");
    let ds = FeatureDataset::open(store)?;
    let d = ds
        .schema()
        .dimension_of(point)
        .ok_or_else(|| SaeError::UnknownPoint(point.to_string()))?;
    let config = SaeConfig {
        input_dim: d,
        ..cfg.sae.config.clone()
    };
    let opts = FitOptions {
        epochs: cfg.sae.epochs,
        max_steps: cfg.sae.max_steps,
        shuffle_seed: cfg.seed,
    };

    let (trainer, input_norm, target_norm) = match &cfg.sae.target_point {
        Some(target) => {
            let (model, mut task) = make_transcoder(&config, &ds, point, target)?;
            let input_norm = normalize_rows(&mut task.inputs)?;
            let target_norm = normalize_rows(&mut task.targets)?;
            let mut trainer = SaeTrainer::from_model(model);
            fit_task(&mut trainer, &task, &opts)?;
            (trainer, input_norm, Some(target_norm))
        }
        None => {
            let stats = NormStats::fit_dataset(&ds, point)?;
            let mut trainer = SaeTrainer::new(config)?;
            fit_dataset(&mut trainer, &ds, point, &stats, &opts)?;
            (trainer, stats, None)
        }
    };

    let path = cfg.paths.checkpoint.clone().unwrap_or_else(|| cfg.out_dir.join(CHECKPOINT_FILE));
    let last = trainer.report.last().copied();
    let ckpt = Checkpoint {
        model: trainer.model,
        state: trainer.state,
        input_norm: Some(input_norm),
        target_norm,
    };
    ckpt.save(&path)?;
    output::write_json(&cfg.out_dir.join(LOG_FILE), &trainer.report)?;
    Ok(json!({
        "point": point,
        "target_point": cfg.sae.target_point,
        "input_dim": ckpt.model.input_dim(),
        "latent_dim": ckpt.model.latent_dim(),
        "steps": ckpt.state.step,
        "final": last,
    }))
}
