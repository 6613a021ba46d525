//! Parquet persistence for feature records.
//!
//! A table is a directory holding one Parquet part per access point plus a
//! `schema.json` sidecar. Parts are written to temporary files and renamed
//! into place; the sidecar is renamed last and acts as the commit marker, so
//! a reader either sees the previous complete table or the new one.

use std::collections::{HashMap, VecDeque};
use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use arrow_array::builder::{Float32Builder, StringBuilder, UInt16Builder, UInt32Builder};
use arrow_array::cast::AsArray;
use arrow_array::types::{Float32Type, Float64Type, UInt16Type, UInt32Type};
use arrow_array::{Array, ArrayRef, FixedSizeListArray, Float32Array, Float64Array, RecordBatch};
use arrow_schema::{DataType, Field, Schema, SchemaRef};
use parquet::arrow::arrow_reader::ParquetRecordBatchReaderBuilder;
use parquet::arrow::ArrowWriter;
use parquet::file::properties::WriterProperties;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tracing::warn;

use super::error::{Result, StoreError};
use super::types::{AccessPointEntry, AccessPointSpec, Aux, Dtype, FeatureRecord, FeatureTableSchema};

pub const SCHEMA_FILE: &str = "schema.json";
pub const DEFAULT_ROW_GROUP_ROWS: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WriteOptions {
    pub dtype: Dtype,
    /// Rows per Parquet row group. Also the shuffle block size on read.
    pub row_group_rows: usize,
}

impl Default for WriteOptions {
    fn default() -> Self {
        Self {
            dtype: Dtype::F32,
            row_group_rows: DEFAULT_ROW_GROUP_ROWS,
        }
    }
}

fn arrow_schema(dim: usize, dtype: Dtype) -> SchemaRef {
    let item = match dtype {
        Dtype::F32 => DataType::Float32,
        Dtype::F64 => DataType::Float64,
    };
    Arc::new(Schema::new(vec![
        Field::new("model_id", DataType::Utf8, false),
        Field::new("point_name", DataType::Utf8, false),
        Field::new("layer_index", DataType::UInt16, false),
        Field::new("sample_id", DataType::Utf8, false),
        Field::new("token_index", DataType::UInt32, false),
        Field::new(
            "vector",
            DataType::FixedSizeList(Arc::new(Field::new("item", item, false)), dim as i32),
            false,
        ),
        Field::new("aux_objectness", DataType::Float32, true),
        Field::new(
            "aux_box",
            DataType::FixedSizeList(Arc::new(Field::new("item", DataType::Float32, false)), 4),
            true,
        ),
    ]))
}

fn to_batch(schema: &SchemaRef, records: &[&FeatureRecord], dim: usize, dtype: Dtype) -> Result<RecordBatch> {
    let n = records.len();
    let mut model_id = StringBuilder::new();
    let mut point_name = StringBuilder::new();
    let mut layer = UInt16Builder::with_capacity(n);
    let mut sample_id = StringBuilder::new();
    let mut token = UInt32Builder::with_capacity(n);
    let mut objectness = Float32Builder::with_capacity(n);
    let mut box_values = Vec::with_capacity(n * 4);
    let mut box_valid = Vec::with_capacity(n);
    for r in records {
        model_id.append_value(&r.access_point.model_id);
        point_name.append_value(&r.access_point.point_name);
        layer.append_value(r.access_point.layer_index);
        sample_id.append_value(&r.sample_id);
        token.append_value(r.token_index);
        objectness.append_option(r.aux.objectness);
        box_values.extend_from_slice(&r.aux.bbox.unwrap_or([0.0; 4]));
        box_valid.push(r.aux.bbox.is_some());
    }

    let values: ArrayRef = match dtype {
        Dtype::F32 => Arc::new(Float32Array::from_iter_values(
            records.iter().flat_map(|r| r.vector.iter().map(|&v| v as f32)),
        )),
        Dtype::F64 => Arc::new(Float64Array::from_iter_values(
            records.iter().flat_map(|r| r.vector.iter().copied()),
        )),
    };
    let vector_field = match schema.field(5).data_type() {
        DataType::FixedSizeList(f, _) => f.clone(),
        _ => unreachable!("vector column is a fixed-size list"),
    };
    let vector = FixedSizeListArray::try_new(vector_field, dim as i32, values, None)?;

    let box_field = Arc::new(Field::new("item", DataType::Float32, false));
    let aux_box = FixedSizeListArray::try_new(
        box_field,
        4,
        Arc::new(Float32Array::from(box_values)),
        Some(box_valid.into()),
    )?;

    let columns: Vec<ArrayRef> = vec![
        Arc::new(model_id.finish()),
        Arc::new(point_name.finish()),
        Arc::new(layer.finish()),
        Arc::new(sample_id.finish()),
        Arc::new(token.finish()),
        Arc::new(vector),
        Arc::new(objectness.finish()),
        Arc::new(aux_box),
    ];
    Ok(RecordBatch::try_new(schema.clone(), columns)?)
}

fn part_name(index: usize) -> String {
    format!("part-{index:04}.parquet")
}

/// Group records by access point in order of first appearance, validating
/// dimensions, layer indices, finiteness and storage precision.
fn group_records<'a>(
    records: &'a [FeatureRecord],
    dtype: Dtype,
) -> Result<Vec<(AccessPointSpec, usize, Vec<&'a FeatureRecord>)>> {
    let mut groups: Vec<(AccessPointSpec, usize, Vec<&FeatureRecord>)> = Vec::new();
    let mut index: HashMap<(String, String), usize> = HashMap::new();
    for r in records {
        let key = (r.access_point.model_id.clone(), r.access_point.point_name.clone());
        let slot = *index.entry(key).or_insert_with(|| {
            groups.push((r.access_point.clone(), r.dim(), Vec::new()));
            groups.len() - 1
        });
        let (spec, dim, members) = &mut groups[slot];
        if r.dim() != *dim || *dim == 0 {
            return Err(StoreError::DimensionMismatch {
                point_name: spec.point_name.clone(),
                expected: *dim,
                found: r.dim(),
            });
        }
        if r.access_point.layer_index != spec.layer_index {
            return Err(StoreError::LayerMismatch {
                point_name: spec.point_name.clone(),
                expected: spec.layer_index,
                found: r.access_point.layer_index,
            });
        }
        for (channel, &v) in r.vector.iter().enumerate() {
            if !v.is_finite() {
                return Err(StoreError::NonFinite {
                    sample_id: r.sample_id.clone(),
                    token_index: r.token_index,
                    channel,
                });
            }
            if dtype.quantize(v) != v {
                return Err(StoreError::Precision {
                    sample_id: r.sample_id.clone(),
                    token_index: r.token_index,
                });
            }
        }
        members.push(r);
    }
    Ok(groups)
}

fn persist_atomically(dir: &Path, name: &str, write: impl FnOnce(&mut File) -> Result<()>) -> Result<()> {
    let mut tmp = tempfile::Builder::new()
        .prefix(&format!(".{name}."))
        .tempfile_in(dir)
        .map_err(|e| StoreError::io(dir, e))?;
    write(tmp.as_file_mut())?;
    tmp.as_file().sync_all().map_err(|e| StoreError::io(tmp.path(), e))?;
    let target = dir.join(name);
    tmp.persist(&target).map_err(|e| StoreError::io(&target, e.error))?;
    Ok(())
}

/// Persist records into the table directory at `dir`.
///
/// Records are grouped by access point; within a point their order is kept.
/// A table may mix access points of different dimensions.
pub fn write_table(records: &[FeatureRecord], dir: impl AsRef<Path>, opts: WriteOptions) -> Result<FeatureTableSchema> {
    let dir = dir.as_ref();
    if records.is_empty() {
        return Err(StoreError::Empty);
    }
    let row_group_rows = opts.row_group_rows.max(1);
    let groups = group_records(records, opts.dtype)?;
    fs::create_dir_all(dir).map_err(|e| StoreError::io(dir, e))?;

    let mut entries = Vec::with_capacity(groups.len());
    for (i, (spec, dim, members)) in groups.iter().enumerate() {
        let schema = arrow_schema(*dim, opts.dtype);
        let name = part_name(i);
        persist_atomically(dir, &name, |file| {
            let props = WriterProperties::builder()
                .set_max_row_group_row_count(Some(row_group_rows))
                .set_created_by("strata".to_string())
                .build();
            let mut writer = ArrowWriter::try_new(file.try_clone().map_err(|e| StoreError::io(dir, e))?, schema.clone(), Some(props))
                .map_err(|e| StoreError::parquet(dir.join(&name), e))?;
            for chunk in members.chunks(row_group_rows) {
                let batch = to_batch(&schema, chunk, *dim, opts.dtype)?;
                writer.write(&batch).map_err(|e| StoreError::parquet(dir.join(&name), e))?;
                writer.flush().map_err(|e| StoreError::parquet(dir.join(&name), e))?;
            }
            writer.close().map_err(|e| StoreError::parquet(dir.join(&name), e))?;
            Ok(())
        })?;
        entries.push(AccessPointEntry {
            spec: spec.clone(),
            dimension: *dim,
            row_count: members.len() as u64,
            file: name,
        });
    }

    let first_dim = entries[0].dimension;
    let schema = FeatureTableSchema {
        format: FeatureTableSchema::FORMAT.to_string(),
        dtype: opts.dtype,
        row_count: records.len() as u64,
        dimension: entries.iter().all(|e| e.dimension == first_dim).then_some(first_dim),
        access_points: entries,
    };
    let json = serde_json::to_vec_pretty(&schema).expect("schema serializes");
    persist_atomically(dir, SCHEMA_FILE, |file| {
        file.write_all(&json).map_err(|e| StoreError::io(dir.join(SCHEMA_FILE), e))
    })?;

    // Parts left over from an earlier, larger table.
    let mut stale = groups.len();
    while dir.join(part_name(stale)).exists() {
        let _ = fs::remove_file(dir.join(part_name(stale)));
        stale += 1;
    }
    Ok(schema)
}

/// Which access points a stream covers.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum PointFilter {
    #[default]
    All,
    Points(Vec<String>),
}

impl PointFilter {
    pub fn one(point_name: impl Into<String>) -> Self {
        PointFilter::Points(vec![point_name.into()])
    }

    fn matches(&self, point_name: &str) -> bool {
        match self {
            PointFilter::All => true,
            PointFilter::Points(names) => names.iter().any(|n| n == point_name),
        }
    }
}

/// Non-fatal conditions noticed while opening a stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StreamWarning {
    /// The filter names access points absent from the table.
    UnknownAccessPoints(Vec<String>),
}

/// Read handle on a persisted table. Cheap to clone and shareable across
/// threads; every stream opens its own file handles.
#[derive(Debug, Clone)]
pub struct FeatureDataset {
    dir: PathBuf,
    schema: FeatureTableSchema,
    /// Row count of every row group, per access point entry.
    row_groups: Vec<Vec<usize>>,
}

impl FeatureDataset {
    pub fn open(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref().to_path_buf();
        let schema_path = dir.join(SCHEMA_FILE);
        let raw = fs::read(&schema_path).map_err(|e| StoreError::io(&schema_path, e))?;
        let schema: FeatureTableSchema = serde_json::from_slice(&raw)
            .map_err(|e| StoreError::corrupt(&schema_path, e.to_string()))?;
        if schema.format != FeatureTableSchema::FORMAT {
            return Err(StoreError::corrupt(&schema_path, format!("unknown format tag {:?}", schema.format)));
        }

        let mut row_groups = Vec::with_capacity(schema.access_points.len());
        let mut total = 0u64;
        for entry in &schema.access_points {
            let path = dir.join(&entry.file);
            let file = File::open(&path).map_err(|e| StoreError::io(&path, e))?;
            let builder = ParquetRecordBatchReaderBuilder::try_new(file).map_err(|e| StoreError::parquet(&path, e))?;
            let expected = arrow_schema(entry.dimension, schema.dtype);
            if builder.schema().fields() != expected.fields() {
                return Err(StoreError::corrupt(&path, "column layout does not match schema.json"));
            }
            let groups: Vec<usize> = builder
                .metadata()
                .row_groups()
                .iter()
                .map(|rg| rg.num_rows() as usize)
                .collect();
            let rows: u64 = groups.iter().map(|&n| n as u64).sum();
            if rows != entry.row_count {
                return Err(StoreError::corrupt(
                    &path,
                    format!("{rows} rows on disk, schema.json declares {}", entry.row_count),
                ));
            }
            total += rows;
            row_groups.push(groups);
        }
        if total != schema.row_count {
            return Err(StoreError::corrupt(&schema_path, "row_count disagrees with access point totals"));
        }
        Ok(Self { dir, schema, row_groups })
    }

    pub fn schema(&self) -> &FeatureTableSchema {
        &self.schema
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Stream one epoch of records in batches.
    ///
    /// Without a seed, records come out in storage order. With a seed, row
    /// groups are visited in a seeded random order and rows are permuted
    /// within each group; memory stays bounded by one row group plus one
    /// batch.
    pub fn batches(&self, filter: &PointFilter, batch_size: usize, shuffle_seed: Option<u64>) -> Result<BatchStream> {
        if batch_size == 0 {
            return Err(StoreError::BatchSize);
        }
        let mut warning = None;
        if let PointFilter::Points(names) = filter {
            let unknown: Vec<String> = names
                .iter()
                .filter(|n| self.schema.entry(n).is_none())
                .cloned()
                .collect();
            if !unknown.is_empty() {
                warn!(points = ?unknown, "filter names access points missing from table");
                warning = Some(StreamWarning::UnknownAccessPoints(unknown));
            }
        }

        let mut units = Vec::new();
        for (ei, entry) in self.schema.access_points.iter().enumerate() {
            if filter.matches(&entry.spec.point_name) {
                units.extend((0..self.row_groups[ei].len()).map(|rg| (ei, rg)));
            }
        }
        let rng = shuffle_seed.map(ChaCha8Rng::seed_from_u64);
        let mut stream = BatchStream {
            dataset: self.clone(),
            units: units.into(),
            batch_size,
            rng,
            current: None,
            carry: VecDeque::new(),
            warning,
            failed: false,
        };
        if let Some(rng) = stream.rng.as_mut() {
            stream.units.make_contiguous().shuffle(rng);
        }
        Ok(stream)
    }

    /// Read every matching record in storage order.
    pub fn read_all(&self, filter: &PointFilter) -> Result<Vec<FeatureRecord>> {
        let mut out = Vec::new();
        for batch in self.batches(filter, DEFAULT_ROW_GROUP_ROWS, None)? {
            out.extend(batch?);
        }
        Ok(out)
    }

    fn open_unit(&self, entry: usize, row_group: usize, read_batch: usize) -> Result<parquet::arrow::arrow_reader::ParquetRecordBatchReader> {
        let path = self.dir.join(&self.schema.access_points[entry].file);
        let file = File::open(&path).map_err(|e| StoreError::io(&path, e))?;
        ParquetRecordBatchReaderBuilder::try_new(file)
            .and_then(|b| b.with_row_groups(vec![row_group]).with_batch_size(read_batch).build())
            .map_err(|e| StoreError::parquet(&path, e))
    }

    fn decode(&self, entry: usize, batch: &RecordBatch) -> Result<Vec<FeatureRecord>> {
        let e = &self.schema.access_points[entry];
        let path = self.dir.join(&e.file);
        let bad = |what: &str| StoreError::corrupt(&path, format!("column {what} has unexpected type"));
        let sample_id = batch.column(3).as_string_opt::<i32>().ok_or_else(|| bad("sample_id"))?;
        let token = batch.column(4).as_primitive_opt::<UInt32Type>().ok_or_else(|| bad("token_index"))?;
        let layer = batch.column(2).as_primitive_opt::<UInt16Type>().ok_or_else(|| bad("layer_index"))?;
        let vector = batch.column(5).as_fixed_size_list_opt().ok_or_else(|| bad("vector"))?;
        let objectness = batch.column(6).as_primitive_opt::<Float32Type>().ok_or_else(|| bad("aux_objectness"))?;
        let aux_box = batch.column(7).as_fixed_size_list_opt().ok_or_else(|| bad("aux_box"))?;
        let box_values = aux_box.values().as_primitive_opt::<Float32Type>().ok_or_else(|| bad("aux_box"))?;

        let d = e.dimension;
        let flat: Vec<f64> = match self.schema.dtype {
            Dtype::F32 => vector
                .values()
                .as_primitive_opt::<Float32Type>()
                .ok_or_else(|| bad("vector"))?
                .values()
                .iter()
                .map(|&v| v as f64)
                .collect(),
            Dtype::F64 => vector
                .values()
                .as_primitive_opt::<Float64Type>()
                .ok_or_else(|| bad("vector"))?
                .values()
                .to_vec(),
        };
        let offset = vector.offset() * d;
        let box_offset = aux_box.offset() * 4;

        let mut out = Vec::with_capacity(batch.num_rows());
        for row in 0..batch.num_rows() {
            if layer.value(row) != e.spec.layer_index {
                return Err(StoreError::corrupt(&path, "layer_index differs from schema.json"));
            }
            let start = offset + row * d;
            let bbox = aux_box.is_valid(row).then(|| {
                let s = box_offset + row * 4;
                let v = box_values.values();
                [v[s], v[s + 1], v[s + 2], v[s + 3]]
            });
            out.push(FeatureRecord {
                access_point: e.spec.clone(),
                sample_id: sample_id.value(row).to_string(),
                token_index: token.value(row),
                vector: flat[start..start + d].to_vec(),
                aux: Aux {
                    objectness: objectness.is_valid(row).then(|| objectness.value(row)),
                    bbox,
                },
            });
        }
        Ok(out)
    }
}

/// One epoch over a table. Yields owned batches that can be sent between
/// threads.
pub struct BatchStream {
    dataset: FeatureDataset,
    units: VecDeque<(usize, usize)>,
    batch_size: usize,
    rng: Option<ChaCha8Rng>,
    current: Option<(usize, parquet::arrow::arrow_reader::ParquetRecordBatchReader)>,
    carry: VecDeque<FeatureRecord>,
    warning: Option<StreamWarning>,
    failed: bool,
}

impl BatchStream {
    pub fn warning(&self) -> Option<&StreamWarning> {
        self.warning.as_ref()
    }

    /// Pull the next decoded chunk into `carry`. Returns false when exhausted.
    fn fill(&mut self) -> Result<bool> {
        loop {
            if let Some((entry, reader)) = self.current.as_mut() {
                match reader.next() {
                    Some(batch) => {
                        let path = self.dataset.dir.join(&self.dataset.schema.access_points[*entry].file);
                        let batch = batch.map_err(|e| StoreError::corrupt(path, e.to_string()))?;
                        let mut records = self.dataset.decode(*entry, &batch)?;
                        if let Some(rng) = self.rng.as_mut() {
                            records.shuffle(rng);
                        }
                        self.carry.extend(records);
                        return Ok(true);
                    }
                    None => self.current = None,
                }
            }
            let Some((entry, rg)) = self.units.pop_front() else {
                return Ok(false);
            };
            // A shuffled unit is read as one chunk so its rows can be permuted.
            let read_batch = if self.rng.is_some() {
                self.dataset.row_groups[entry][rg].max(1)
            } else {
                self.batch_size
            };
            let reader = self.dataset.open_unit(entry, rg, read_batch)?;
            self.current = Some((entry, reader));
        }
    }
}

impl Iterator for BatchStream {
    type Item = Result<Vec<FeatureRecord>>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        while self.carry.len() < self.batch_size {
            match self.fill() {
                Ok(true) => {}
                Ok(false) => break,
                Err(e) => {
                    self.failed = true;
                    return Some(Err(e));
                }
            }
        }
        if self.carry.is_empty() {
            return None;
        }
        let n = self.batch_size.min(self.carry.len());
        Some(Ok(self.carry.drain(..n).collect()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::types::ArtifactKind;

    fn records(n: usize, point: &str, layer: u16, dim: usize) -> Vec<FeatureRecord> {
        (0..n)
            .map(|i| FeatureRecord {
                access_point: AccessPointSpec::new("toy", point, layer, ArtifactKind::Activation),
                sample_id: format!("img{:03}", i / 2),
                token_index: (i % 2) as u32,
                vector: (0..dim).map(|c| (i * dim + c) as f64 * 0.5).collect(),
                aux: Aux {
                    objectness: (i % 3 == 0).then_some(0.25),
                    bbox: (i % 2 == 0).then_some([0.5, 0.5, 0.25, 0.125]),
                },
            })
            .collect()
    }

    #[test]
    fn write_reports_schema() {
        let dir = tempfile::tempdir().unwrap();
        let schema = write_table(&records(6, "p", 0, 4), dir.path(), WriteOptions::default()).unwrap();
        assert_eq!(schema.row_count, 6);
        assert_eq!(schema.dimension, Some(4));
        assert!(dir.path().join(SCHEMA_FILE).exists());
        let reread = FeatureDataset::open(dir.path()).unwrap();
        assert_eq!(reread.schema(), &schema);
    }

    #[test]
    fn roundtrip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let recs = records(9, "p", 2, 3);
        write_table(&recs, dir.path(), WriteOptions::default()).unwrap();
        let back = FeatureDataset::open(dir.path()).unwrap().read_all(&PointFilter::All).unwrap();
        assert_eq!(back, recs);
    }

    #[test]
    fn mixed_dimensions_get_separate_parts() {
        let dir = tempfile::tempdir().unwrap();
        let mut recs = records(4, "small", 0, 4);
        recs.extend(records(3, "wide", 1, 8));
        let schema = write_table(&recs, dir.path(), WriteOptions::default()).unwrap();
        assert_eq!(schema.dimension, None);
        assert_eq!(schema.dimension_of("small"), Some(4));
        assert_eq!(schema.dimension_of("wide"), Some(8));
        let ds = FeatureDataset::open(dir.path()).unwrap();
        assert_eq!(ds.read_all(&PointFilter::one("wide")).unwrap(), recs[4..].to_vec());
    }

    #[test]
    fn dimension_mismatch_within_point_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let mut recs = records(2, "p", 0, 4);
        recs[1].vector.push(1.0);
        let err = write_table(&recs, dir.path(), WriteOptions::default()).unwrap_err();
        assert!(matches!(err, StoreError::DimensionMismatch { expected: 4, found: 5, .. }));
    }

    #[test]
    fn f32_table_rejects_lossy_values() {
        let dir = tempfile::tempdir().unwrap();
        let mut recs = records(1, "p", 0, 2);
        recs[0].vector[0] = 0.1;
        assert!(matches!(
            write_table(&recs, dir.path(), WriteOptions::default()),
            Err(StoreError::Precision { .. })
        ));
        let opts = WriteOptions {
            dtype: Dtype::F64,
            ..Default::default()
        };
        write_table(&recs, dir.path(), opts).unwrap();
    }

    #[test]
    fn empty_input_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(write_table(&[], dir.path(), WriteOptions::default()), Err(StoreError::Empty)));
    }

    #[test]
    fn batch_sizes_follow_arithmetic() {
        let dir = tempfile::tempdir().unwrap();
        write_table(&records(10, "p", 0, 2), dir.path(), WriteOptions::default()).unwrap();
        let ds = FeatureDataset::open(dir.path()).unwrap();
        let sizes: Vec<usize> = ds
            .batches(&PointFilter::All, 4, None)
            .unwrap()
            .map(|b| b.unwrap().len())
            .collect();
        assert_eq!(sizes, vec![4, 4, 2]);
    }

    #[test]
    fn seeded_shuffle_is_deterministic_and_complete() {
        let dir = tempfile::tempdir().unwrap();
        let opts = WriteOptions {
            row_group_rows: 7,
            ..Default::default()
        };
        let recs = records(40, "p", 0, 2);
        write_table(&recs, dir.path(), opts).unwrap();
        let ds = FeatureDataset::open(dir.path()).unwrap();
        let epoch = |seed| -> Vec<Vec<FeatureRecord>> {
            ds.batches(&PointFilter::All, 6, seed).unwrap().map(Result::unwrap).collect()
        };
        let a = epoch(Some(3));
        assert_eq!(a, epoch(Some(3)));
        assert_ne!(a, epoch(Some(4)));
        let mut flat: Vec<_> = a.into_iter().flatten().map(|r| r.slot()).collect();
        let mut plain: Vec<_> = recs.iter().map(|r| r.slot()).collect();
        assert_ne!(flat, plain);
        flat.sort();
        plain.sort();
        assert_eq!(flat, plain);
    }

    #[test]
    fn unknown_point_warns_with_empty_stream() {
        let dir = tempfile::tempdir().unwrap();
        write_table(&records(3, "p", 0, 2), dir.path(), WriteOptions::default()).unwrap();
        let ds = FeatureDataset::open(dir.path()).unwrap();
        let mut stream = ds.batches(&PointFilter::one("nope"), 2, None).unwrap();
        assert_eq!(
            stream.warning(),
            Some(&StreamWarning::UnknownAccessPoints(vec!["nope".into()]))
        );
        assert!(stream.next().is_none());
    }

    #[test]
    fn zero_batch_size_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        write_table(&records(3, "p", 0, 2), dir.path(), WriteOptions::default()).unwrap();
        let ds = FeatureDataset::open(dir.path()).unwrap();
        assert!(matches!(ds.batches(&PointFilter::All, 0, None), Err(StoreError::BatchSize)));
    }

    #[test]
    fn corrupt_part_is_detected() {
        let dir = tempfile::tempdir().unwrap();
        write_table(&records(3, "p", 0, 2), dir.path(), WriteOptions::default()).unwrap();
        fs::write(dir.path().join(part_name(0)), b"not parquet").unwrap();
        assert!(matches!(FeatureDataset::open(dir.path()), Err(StoreError::Parquet { .. })));
    }

    #[test]
    fn rewrite_is_byte_identical() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let recs = records(12, "p", 0, 3);
        write_table(&recs, a.path(), WriteOptions::default()).unwrap();
        write_table(&recs, b.path(), WriteOptions::default()).unwrap();
        for name in [part_name(0), SCHEMA_FILE.to_string()] {
            assert_eq!(fs::read(a.path().join(&name)).unwrap(), fs::read(b.path().join(&name)).unwrap());
        }
    }
}
