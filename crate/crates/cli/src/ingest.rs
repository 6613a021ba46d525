//! Raw dump ingestion.
//!
//! A dump directory holds `dump.json` and little-endian tensor files:
//!
//! ```json
//! {"tensors": [{"file": "l0.bin", "encoding": "f32", "shape": [2, 3, 8],
//!               "layout": {"access_point": {...}, "axes": ["batch", "token", "channel"],
//!                          "sample_ids": ["a", "b"]},
//!               "objectness": {"file": "obj.bin", "shape": [2, 3]},
//!               "boxes": {"file": "box.bin", "shape": [2, 3, 4]}}]}
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;
use strata::store::{align, write_table, AuxTensors, Dtype, FeatureRecord, LayoutDescriptor, RawTensor, WriteOptions};

use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::output;

pub const DUMP_MANIFEST: &str = "dump.json";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TensorFile {
    pub file: PathBuf,
    #[serde(default)]
    pub encoding: Dtype,
    pub shape: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DumpTensor {
    #[serde(flatten)]
    pub data: TensorFile,
    pub layout: LayoutDescriptor,
    #[serde(default)]
    pub objectness: Option<TensorFile>,
    #[serde(default)]
    pub boxes: Option<TensorFile>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DumpManifest {
    pub tensors: Vec<DumpTensor>,
}

pub fn read_tensor(dir: &Path, t: &TensorFile) -> Result<RawTensor> {
    let path = dir.join(&t.file);
    let bytes = fs::read(&path).map_err(|e| CliError::io(&path, e))?;
    let width = match t.encoding {
        Dtype::F32 => 4,
        Dtype::F64 => 8,
    };
    let n: usize = t.shape.iter().product();
    if bytes.len() != n * width {
        return Err(CliError::data(format!(
            "{}: shape {:?} needs {} bytes of {:?}, file has {}",
            path.display(),
            t.shape,
            n * width,
            t.encoding,
            bytes.len()
        ))
        .at(&path));
    }
    let data = match t.encoding {
        Dtype::F32 => bytes.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64).collect(),
        Dtype::F64 => bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect(),
    };
    RawTensor::new(t.shape.clone(), data).map_err(|e| CliError::from(e).at(&path))
}

pub fn load_dump(dir: &Path) -> Result<Vec<FeatureRecord>> {
    let manifest: DumpManifest = output::read_json(&dir.join(DUMP_MANIFEST))?;
    if manifest.tensors.is_empty() {
        return Err(CliError::data("dump lists no tensors").at(dir.join(DUMP_MANIFEST)));
    }
    let mut records = Vec::new();
    for t in &manifest.tensors {
        let raw = read_tensor(dir, &t.data)?;
        let aux = AuxTensors {
            objectness: t.objectness.as_ref().map(|f| read_tensor(dir, f)).transpose()?,
            boxes: t.boxes.as_ref().map(|f| read_tensor(dir, f)).transpose()?,
        };
        let rows = align(&raw, &t.layout, &aux).map_err(|e| CliError::from(e).at(dir.join(&t.data.file)))?;
        records.extend(rows);
    }
    Ok(records)
}

pub fn run(cfg: &RunConfig) -> Result<serde_json::Value> {
    let dump = cfg.paths.dump.as_ref().expect("validated");
    let records = load_dump(dump)?;
    let table = cfg.paths.store.clone().unwrap_or_else(|| cfg.out_dir.join("table"));
    let schema = write_table(
        &records,
        &table,
        WriteOptions {
            dtype: cfg.ingest.dtype,
            row_group_rows: cfg.ingest.row_group_rows,
        },
    )?;
    Ok(json!({
        "rows": schema.row_count,
        "access_points": schema.access_points.iter().map(|e| json!({
            "point_name": e.spec.point_name,
            "layer_index": e.spec.layer_index,
            "dimension": e.dimension,
            "rows": e.row_count,
        })).collect::<Vec<_>>(),
    }))
}
