//! Canonical activation schema and its columnar persistence.
//!
//! Every table directory contains one Parquet part per access point with the
//! columns `model_id`, `point_name`, `layer_index` (u16), `sample_id`,
//! `token_index` (u32), `vector` (fixed-size list of f32 or f64),
//! `aux_objectness` (nullable f32) and `aux_box` (nullable fixed-size list of
//! four f32, `cx, cy, w, h` normalized). `schema.json` mirrors
//! [`FeatureTableSchema`].
//!
//! For prediction-style artifacts `token_index` is the query or proposal slot
//! of the detector head.

mod align;
mod error;
mod table;
mod types;

pub use align::{align, AuxTensors, AxisRole, LayoutDescriptor, RawTensor};
pub use error::{Result, StoreError};
pub use table::{
    write_table, BatchStream, FeatureDataset, PointFilter, StreamWarning, WriteOptions, DEFAULT_ROW_GROUP_ROWS,
    SCHEMA_FILE,
};
pub use types::{AccessPointEntry, AccessPointSpec, ArtifactKind, Aux, Dtype, FeatureRecord, FeatureTableSchema};
