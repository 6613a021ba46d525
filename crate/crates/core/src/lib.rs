//! Analysis engine for layer activations of object detectors.
//!
//! The crate works entirely on a columnar file boundary: activations and
//! predictions are captured elsewhere, written into feature tables
//! ([`store`]), and every analysis reads them back from disk.
//!
//! * [`store`] aligns raw tensors into per-token [`store::FeatureRecord`]s and
//!   persists them as Parquet tables with a JSON sidecar.
//! * [`sae`] trains sparse autoencoders (ReLU, TopK, BatchTopK, Matryoshka)
//!   and transcoders on those tables.
//! * [`probe`] fits per-layer linear classification and localization probes,
//!   scores them as AP@IoU50 and locates the dip in the resulting trajectory.
//! * [`eval`] maps open-ended detector text onto a fixed label space and runs
//!   COCO-style AP/AR evaluation.
//! * [`attribution`] collects the top activating records per SAE latent.
//! * [`synth`] generates seeded synthetic fixtures with planted structure.

pub mod attribution;
pub mod eval;
pub mod optim;
pub mod probe;
pub mod sae;
pub mod store;
pub mod synth;

pub use attribution::{AttributionEntry, AttributionReport};
pub use eval::{EvalConfig, LabelSpace, MappedDetection, RawDetection};
pub use probe::{ProbeModel, ProbeTarget, ProbeTrajectory, TransitionReport};
pub use sae::{SaeConfig, SaeModel, SaeTrainReport, SaeVariant};
pub use store::{AccessPointSpec, FeatureRecord, FeatureTableSchema};
