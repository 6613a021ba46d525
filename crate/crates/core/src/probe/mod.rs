//! Linear probes on per-token layer features.
//!
//! Each layer gets a classification probe (cross-entropy) and a box
//! regression probe (smooth L1). Probes are scored as AP at IoU 0.5 through
//! the detection evaluator, and the per-layer scores form a trajectory whose
//! interior dip marks the transition layer.

mod error;
mod model;
mod plot;
mod score;
mod train;
mod transition;

pub use error::{ProbeError, Result};
pub use model::{
    class_loss_and_grad, cxcywh_to_xyxy, loc_loss_and_grad, smooth_l1, softmax, ProbeConfig, ProbeGrad, ProbeModel, ProbeTarget,
    ProbeTask, TargetSource,
};
pub use plot::trajectory_svg;
pub use score::{approximation_targets, load_targets, score_probe, ScoreMode, TargetRow};
pub use train::{
    class_accuracy, loc_loss, probe_layers, split_by_sample, train_class_probe, train_loc_probe, LayerData, LayerResult,
};
pub use transition::{detect_transition, Phases, ProbeTrajectory, TrajectoryPoint, TransitionReport, TRAJECTORY_METRIC};
