use std::collections::HashMap;

use ndarray::Array2;
use serde_json::json;
use strata::probe::{
    approximation_targets, load_targets, probe_layers, LayerData, ProbeTarget, ProbeTrajectory, ScoreMode, TargetRow,
};
use strata::store::{ArtifactKind, FeatureDataset, PointFilter};

use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::output;
use crate::trajectory;

pub const PROBES_FILE: &str = "probes.json";

/// Activation points to probe, ordered by layer then name.
fn layer_points(ds: &FeatureDataset, cfg: &RunConfig) -> Result<Vec<(String, u16)>> {
    let schema = ds.schema();
    if !cfg.probes.points.is_empty() {
        return cfg
            .probes
            .points
            .iter()
            .map(|p| {
                schema
                    .entry(p)
                    .map(|e| (p.clone(), e.spec.layer_index))
                    .ok_or_else(|| CliError::data(format!("access point {p:?} not present in the table")))
            })
            .collect();
    }
    let mut points: Vec<(String, u16)> = schema
        .access_points
        .iter()
        .filter(|e| e.spec.artifact_kind == ArtifactKind::Activation)
        .map(|e| (e.spec.point_name.clone(), e.spec.layer_index))
        .collect();
    points.sort_by(|a, b| a.1.cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
    Ok(points)
}

fn layer_matrix(ds: &FeatureDataset, point: &str, layer_index: u16, slots: &[(String, u32)]) -> Result<LayerData> {
    let records = ds.read_all(&PointFilter::one(point))?;
    let by_slot: HashMap<(&str, u32), &[f64]> = records
        .iter()
        .map(|r| ((r.sample_id.as_str(), r.token_index), r.vector.as_slice()))
        .collect();
    let d = records.first().map_or(0, |r| r.vector.len());
    let mut x = Array2::zeros((slots.len(), d));
    for (mut row, (s, t)) in x.rows_mut().into_iter().zip(slots) {
        let v = by_slot
            .get(&(s.as_str(), *t))
            .ok_or_else(|| CliError::data(format!("point {point:?} has no record for target ({s}, {t})")))?;
        row.assign(&ndarray::ArrayView1::from(*v));
    }
    Ok(LayerData {
        layer_index,
        features: x,
    })
}

pub fn run(cfg: &RunConfig) -> Result<serde_json::Value> {
    let ds = FeatureDataset::open(cfg.paths.store.as_ref().expect("validated"))?;
    let rows: Vec<TargetRow> = match (&cfg.paths.targets, &cfg.probes.predictions) {
        (Some(path), _) => load_targets(path)?,
        (None, Some(point)) => approximation_targets(&ds.read_all(&PointFilter::one(point))?, cfg.probes.min_conf),
        (None, None) => unreachable!("validated"),
    };
    if rows.is_empty() {
        return Err(CliError::data("no probe targets"));
    }
    let slots: Vec<(String, u32)> = rows.iter().map(|r| (r.sample_id.clone(), r.token_index)).collect();
    let targets: Vec<ProbeTarget> = rows.into_iter().map(|r| r.target).collect();
    let n_classes = cfg
        .probes
        .n_classes
        .unwrap_or_else(|| targets.iter().map(|t| t.y_class).max().unwrap_or(0) + 1);

    let points = layer_points(&ds, cfg)?;
    if points.is_empty() {
        return Err(CliError::data("table has no activation points to probe"));
    }
    let layers = points
        .iter()
        .map(|(p, l)| layer_matrix(&ds, p, *l, &slots))
        .collect::<Result<Vec<_>>>()?;
    let results = probe_layers(&layers, &slots, &targets, n_classes, &cfg.probes.config)?;
    output::write_json(&cfg.out_dir.join(PROBES_FILE), &results)?;

    let curve = |f: fn(&strata::probe::LayerResult) -> f64| results.iter().map(|r| (r.layer_index, f(r))).collect::<Vec<_>>();
    let trajectories = vec![
        ProbeTrajectory::new(ScoreMode::ClassOnly.as_str(), curve(|r| r.class_ap50)),
        ProbeTrajectory::new(ScoreMode::LocOnly.as_str(), curve(|r| r.loc_ap50)),
        ProbeTrajectory::new(ScoreMode::Joint.as_str(), curve(|r| r.joint_ap50)),
    ];
    let transition = trajectory::emit(&cfg.out_dir, &trajectories, &cfg.trajectory.task, cfg.probes.config.delta)?;
    Ok(json!({
        "targets": slots.len(),
        "n_classes": n_classes,
        "layers": results.iter().map(|r| json!({
            "layer_index": r.layer_index,
            "classification": r.class_ap50,
            "localization": r.loc_ap50,
            "joint": r.joint_ap50,
        })).collect::<Vec<_>>(),
        "transition": transition,
    }))
}
