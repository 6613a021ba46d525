//! Open-vocabulary detection evaluation.
//!
//! Free-text detections are embedded and matched against a label space of
//! class prompts, optionally extended with negative prompts ("an object") and
//! part prompts ("parts of cat") that absorb ungrounded or part-level outputs.
//! Mapped detections are scored with COCO-style AP and AR.

mod coco;
mod config;
mod embed;
mod error;
mod label_space;
mod mapping;
mod metrics;

pub use coco::{
    image_key, load_detections, provenance_csv, to_coco_results, xywh_to_xyxy, xyxy_to_xywh, CocoAnnotation, CocoCategory,
    CocoDetection, CocoGroundTruth, CocoImage,
};
pub use config::{coco_iou_thresholds, EvalConfig};
pub use embed::{
    canonical_text, dot, hashed_test_embedder, l2_normalize, EmbeddingProvider, HashedEmbedder, PrecomputedEmbeddings,
    DEFAULT_HASH_SEED,
};
pub use error::{EmbedError, EvalError, Result};
pub use label_space::{build_label_space, LabelSpace, Prompt, PromptKind};
pub use mapping::{iou, map_labels, validate_box, MappedDetection, Provenance, RawDetection};
pub use metrics::{evaluate, interpolated_ap, ClassMetrics, EvalReport, GroundTruth};
