use serde::{Deserialize, Serialize};

use super::error::{ProbeError, Result};

pub const TRAJECTORY_METRIC: &str = "AP@IoU50";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub layer_index: u16,
    pub task: String,
    pub ap50: f64,
}

/// Per-layer AP@IoU50 for one task, ordered by layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeTrajectory {
    pub task: String,
    pub metric: String,
    pub points: Vec<TrajectoryPoint>,
}

impl ProbeTrajectory {
    /// Sorts the points by layer.
    pub fn new(task: impl Into<String>, mut layers: Vec<(u16, f64)>) -> Self {
        let task = task.into();
        layers.sort_by_key(|p| p.0);
        Self {
            points: layers
                .into_iter()
                .map(|(layer_index, ap50)| TrajectoryPoint {
                    layer_index,
                    task: task.clone(),
                    ap50,
                })
                .collect(),
            task,
            metric: TRAJECTORY_METRIC.to_string(),
        }
    }

    pub fn accuracies(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.ap50).collect()
    }

    pub fn layers(&self) -> Vec<u16> {
        self.points.iter().map(|p| p.layer_index).collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Phases {
    pub extraction: Vec<u16>,
    pub reorganization: Vec<u16>,
    pub refinement: Vec<u16>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionReport {
    /// Layer index of the dip, absent when the dip is shallower than delta.
    pub l_star: Option<u16>,
    /// Smaller of the two margins at the deepest interior layer, floored at 0.
    pub dip_depth: f64,
    pub delta: f64,
    pub phases: Option<Phases>,
}

/// Locate the dip-then-surge layer: the lowest interior layer (ties to the
/// earliest) that some earlier and some later layer both exceed by at least
/// `delta`.
pub fn detect_transition(trajectory: &ProbeTrajectory, delta: f64) -> Result<TransitionReport> {
    let acc = trajectory.accuracies();
    let layers = trajectory.layers();
    let n = acc.len();
    if n < 3 {
        return Err(ProbeError::TrajectoryTooShort(n));
    }
    let mut star = 1;
    for i in 2..n - 1 {
        if acc[i] < acc[star] {
            star = i;
        }
    }
    let earlier = acc[..star].iter().copied().fold(f64::NEG_INFINITY, f64::max) - acc[star];
    let later = acc[star + 1..].iter().copied().fold(f64::NEG_INFINITY, f64::max) - acc[star];
    let dip_depth = earlier.min(later).max(0.0);
    if earlier >= delta && later >= delta {
        Ok(TransitionReport {
            l_star: Some(layers[star]),
            dip_depth,
            delta,
            phases: Some(Phases {
                extraction: layers[..star].to_vec(),
                reorganization: vec![layers[star]],
                refinement: layers[star + 1..].to_vec(),
            }),
        })
    } else {
        Ok(TransitionReport {
            l_star: None,
            dip_depth,
            delta,
            phases: None,
        })
    }
}
