use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;
use serde_json::json;
use strata::probe::{detect_transition, trajectory_svg, ProbeTrajectory, TrajectoryPoint, TransitionReport};

use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::output;

pub const TRAJECTORY_FILE: &str = "trajectory.json";
pub const TRANSITION_FILE: &str = "transition.json";
pub const PLOT_FILE: &str = "trajectory.svg";

#[derive(Deserialize)]
#[serde(untagged)]
enum Input {
    Values(Vec<f64>),
    Points(Vec<TrajectoryPoint>),
}

/// A bare array is one curve over layers `0..n` for `task`.
pub fn parse(bytes: &[u8], task: &str, path: &Path) -> Result<Vec<ProbeTrajectory>> {
    let input: Input = serde_json::from_slice(bytes).map_err(|e| {
        CliError::data(format!("{}: expected an array of numbers or of {{layer_index, task, ap50}}: {e}", path.display()))
            .at(path)
    })?;
    Ok(match input {
        Input::Values(v) => vec![ProbeTrajectory::new(task, v.into_iter().enumerate().map(|(i, a)| (i as u16, a)).collect())],
        Input::Points(points) => {
            let mut by_task: BTreeMap<String, Vec<(u16, f64)>> = BTreeMap::new();
            for p in points {
                by_task.entry(p.task).or_default().push((p.layer_index, p.ap50));
            }
            by_task.into_iter().map(|(t, l)| ProbeTrajectory::new(t, l)).collect()
        }
    })
}

/// Write the flat trajectory, the transition of `task` and the plot.
pub fn emit(out_dir: &Path, trajectories: &[ProbeTrajectory], task: &str, delta: f64) -> Result<Option<TransitionReport>> {
    let flat: Vec<&TrajectoryPoint> = trajectories.iter().flat_map(|t| &t.points).collect();
    output::write_json(&out_dir.join(TRAJECTORY_FILE), &flat)?;
    let chosen = trajectories
        .iter()
        .find(|t| t.task == task)
        .or_else(|| (trajectories.len() == 1).then(|| &trajectories[0]));
    let report = match chosen {
        Some(t) if t.points.len() >= 3 => Some(detect_transition(t, delta)?),
        _ => None,
    };
    output::write_json(&out_dir.join(TRANSITION_FILE), &report)?;
    output::write_bytes(&out_dir.join(PLOT_FILE), trajectory_svg(trajectories, report.as_ref()).as_bytes())?;
    Ok(report)
}

pub fn run(cfg: &RunConfig) -> Result<serde_json::Value> {
    let path = cfg.paths.trajectory.as_ref().expect("validated");
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    let trajectories = parse(&bytes, &cfg.trajectory.task, path)?;
    let report = emit(&cfg.out_dir, &trajectories, &cfg.trajectory.task, cfg.trajectory.delta)?;
    let Some(report) = report else {
        return Err(CliError::data(format!(
            "{}: no curve for task {:?} with at least 3 layers",
            path.display(),
            cfg.trajectory.task
        ))
        .at(path));
    };
    Ok(json!({
        "l_star": report.l_star,
        "dip_depth": report.dip_depth,
        "delta": report.delta,
        "phases": report.phases,
    }))
}
