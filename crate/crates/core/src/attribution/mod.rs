//! Dataset attribution for SAE latents: the records that activate each
//! latent most strongly, collected in one streaming pass.

mod collect;
mod error;
mod report;

pub use collect::{
    attribute, batch_codes, AttributeOptions, AttributionEntry, AttributionReport, Attributor, CooccurrenceRow, Coverage,
    RecordContext, DEFAULT_TOP_N,
};
pub use error::{AttributionError, Result};
pub use report::{
    cooccurrence_csv, emit_report, gallery_html, load_manifest, manifest_json, parse_manifest, EmitOptions, Manifest,
    COOCCURRENCE_FILE, GALLERY_FILE, MANIFEST_FILE,
};
