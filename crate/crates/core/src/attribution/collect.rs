use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap, HashMap};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::error::{AttributionError, Result};
use crate::sae::{NormStats, SaeModel};
use crate::store::{FeatureDataset, FeatureRecord, PointFilter};

pub const DEFAULT_TOP_N: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionEntry {
    pub latent_index: usize,
    pub sample_id: String,
    pub token_index: u32,
    /// Post-sparsify code value; always positive.
    pub activation: f64,
    /// Predicted box `(cx, cy, w, h)` normalized, when the record has one.
    #[serde(rename = "box")]
    pub bbox: Option<[f64; 4]>,
    pub image: Option<String>,
}

impl AttributionEntry {
    /// Rank order: activation descending, then `(sample_id, token_index)`.
    pub fn rank_cmp(&self, other: &Self) -> Ordering {
        other
            .activation
            .total_cmp(&self.activation)
            .then_with(|| self.sample_id.cmp(&other.sample_id))
            .then_with(|| self.token_index.cmp(&other.token_index))
    }
}

/// Heap element ordered so that the worst-ranked entry is the maximum.
#[derive(Debug, Clone)]
struct Worst(AttributionEntry);

impl PartialEq for Worst {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Worst {}

impl PartialOrd for Worst {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Worst {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.rank_cmp(&other.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coverage {
    pub latents: usize,
    pub active_latents: usize,
    pub dead_latents: usize,
    /// Fraction of latents with at least one activation.
    pub fraction_active: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CooccurrenceRow {
    pub latent_index: usize,
    pub class: String,
    pub count: u64,
}

/// Top-n activating records per latent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionReport {
    pub n: usize,
    pub latent_dim: usize,
    pub rows_seen: u64,
    pub coverage: Coverage,
    /// Every latent, in index order; dead latents map to an empty list.
    pub latents: BTreeMap<usize, Vec<AttributionEntry>>,
    /// Latent by predicted-class activation counts, sorted by latent then class.
    pub cooccurrence: Vec<CooccurrenceRow>,
}

/// Side information attached to records during a pass.
#[derive(Debug, Clone, Default)]
pub struct RecordContext {
    /// `(sample_id, token_index)` to predicted class name.
    pub classes: HashMap<(String, u32), String>,
    /// `sample_id` to image path.
    pub images: HashMap<String, String>,
}

/// Streaming accumulator. Memory is `O(m·n)` plus the co-occurrence table,
/// independent of how many records pass through.
#[derive(Debug, Clone)]
pub struct Attributor {
    n: usize,
    heaps: Vec<BinaryHeap<Worst>>,
    fired: Vec<u64>,
    rows: u64,
    cooccurrence: BTreeMap<(usize, String), u64>,
}

impl Attributor {
    pub fn new(latent_dim: usize, n: usize) -> Self {
        Self {
            n,
            heaps: (0..latent_dim).map(|_| BinaryHeap::with_capacity(n + 1)).collect(),
            fired: vec![0; latent_dim],
            rows: 0,
            cooccurrence: BTreeMap::new(),
        }
    }

    pub fn latent_dim(&self) -> usize {
        self.heaps.len()
    }

    fn offer(&mut self, entry: AttributionEntry) {
        if self.n == 0 {
            return;
        }
        let heap = &mut self.heaps[entry.latent_index];
        if heap.len() < self.n {
            heap.push(Worst(entry));
        } else if let Some(worst) = heap.peek() {
            if entry.rank_cmp(&worst.0) == Ordering::Less {
                heap.pop();
                heap.push(Worst(entry));
            }
        }
    }

    /// Feed one batch of records with their sparse codes (`rows × m`).
    pub fn observe(&mut self, records: &[FeatureRecord], codes: &Array2<f64>, ctx: &RecordContext) {
        debug_assert_eq!(records.len(), codes.nrows());
        for (rec, row) in records.iter().zip(codes.rows()) {
            self.rows += 1;
            let class = ctx.classes.get(&(rec.sample_id.clone(), rec.token_index));
            for (i, &a) in row.iter().enumerate() {
                if a <= 0.0 {
                    continue;
                }
                self.fired[i] += 1;
                if let Some(c) = class {
                    *self.cooccurrence.entry((i, c.clone())).or_default() += 1;
                }
                self.offer(AttributionEntry {
                    latent_index: i,
                    sample_id: rec.sample_id.clone(),
                    token_index: rec.token_index,
                    activation: a,
                    bbox: rec.aux.bbox.map(|b| b.map(f64::from)),
                    image: ctx.images.get(&rec.sample_id).cloned(),
                });
            }
        }
    }

    /// Combine a partial result from a disjoint shard. The outcome does not
    /// depend on merge order.
    pub fn merge(&mut self, other: Attributor) -> Result<()> {
        if self.n != other.n || self.latent_dim() != other.latent_dim() {
            return Err(AttributionError::Incompatible {
                left: self.n,
                right: other.n,
                left_m: self.latent_dim(),
                right_m: other.latent_dim(),
            });
        }
        self.rows += other.rows;
        for (a, b) in self.fired.iter_mut().zip(other.fired) {
            *a += b;
        }
        for (k, v) in other.cooccurrence {
            *self.cooccurrence.entry(k).or_default() += v;
        }
        for heap in other.heaps {
            for Worst(e) in heap {
                self.offer(e);
            }
        }
        Ok(())
    }

    pub fn finish(self) -> AttributionReport {
        let m = self.latent_dim();
        let active = self.fired.iter().filter(|&&f| f > 0).count();
        let latents = self
            .heaps
            .into_iter()
            .enumerate()
            .map(|(i, heap)| {
                let mut v: Vec<AttributionEntry> = heap.into_iter().map(|w| w.0).collect();
                v.sort_by(|a, b| a.rank_cmp(b));
                (i, v)
            })
            .collect();
        AttributionReport {
            n: self.n,
            latent_dim: m,
            rows_seen: self.rows,
            coverage: Coverage {
                latents: m,
                active_latents: active,
                dead_latents: m - active,
                fraction_active: if m == 0 { 0.0 } else { active as f64 / m as f64 },
            },
            latents,
            cooccurrence: self
                .cooccurrence
                .into_iter()
                .map(|((latent_index, class), count)| CooccurrenceRow { latent_index, class, count })
                .collect(),
        }
    }
}

/// Sparse codes of a record batch, normalizing inputs first when stats are given.
pub fn batch_codes(sae: &SaeModel, records: &[FeatureRecord], norm: Option<&NormStats>) -> Result<Array2<f64>> {
    let d = sae.input_dim();
    let mut x = Array2::zeros((records.len(), d));
    for (mut row, rec) in x.rows_mut().into_iter().zip(records) {
        if rec.vector.len() != d {
            return Err(AttributionError::Dimension {
                expected: d,
                found: rec.vector.len(),
            });
        }
        let v = match norm {
            Some(s) => s.apply(&rec.vector),
            None => rec.vector.clone(),
        };
        row.assign(&ndarray::ArrayView1::from(&v));
    }
    Ok(sae.codes(x.view())?.codes)
}

#[derive(Debug, Clone)]
pub struct AttributeOptions {
    pub n: usize,
    pub batch_size: usize,
}

impl Default for AttributeOptions {
    fn default() -> Self {
        Self {
            n: DEFAULT_TOP_N,
            batch_size: 1024,
        }
    }
}

/// One streaming pass over `point` in `dataset`.
pub fn attribute(
    sae: &SaeModel,
    dataset: &FeatureDataset,
    point: &str,
    norm: Option<&NormStats>,
    ctx: &RecordContext,
    opts: &AttributeOptions,
) -> Result<AttributionReport> {
    match dataset.schema().dimension_of(point) {
        None => return Err(AttributionError::Empty(point.to_string())),
        Some(d) if d != sae.input_dim() => {
            return Err(AttributionError::Dimension {
                expected: sae.input_dim(),
                found: d,
            })
        }
        Some(_) => {}
    }
    let mut acc = Attributor::new(sae.latent_dim(), opts.n);
    for batch in dataset.batches(&PointFilter::one(point), opts.batch_size, None)? {
        let batch = batch?;
        let codes = batch_codes(sae, &batch, norm)?;
        acc.observe(&batch, &codes, ctx);
    }
    if acc.rows == 0 {
        return Err(AttributionError::Empty(point.to_string()));
    }
    Ok(acc.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::{AccessPointSpec, Aux};

    fn rec(sample: &str, token: u32) -> FeatureRecord {
        FeatureRecord {
            access_point: AccessPointSpec::activation("m", "p", 0),
            sample_id: sample.to_string(),
            token_index: token,
            vector: vec![0.0],
            aux: Aux::default(),
        }
    }

    #[test]
    fn single_record_lands_in_its_latent() {
        let mut acc = Attributor::new(5, 1);
        let mut codes = Array2::zeros((1, 5));
        codes[[0, 3]] = 2.5;
        acc.observe(&[rec("s", 0)], &codes, &RecordContext::default());
        let r = acc.finish();
        assert_eq!(r.latents[&3].len(), 1);
        assert_eq!(r.latents[&3][0].activation, 2.5);
        assert!(r.latents.iter().filter(|(&i, _)| i != 3).all(|(_, v)| v.is_empty()));
        assert_eq!(r.coverage.active_latents, 1);
        assert_eq!(r.coverage.dead_latents, 4);
    }

    #[test]
    fn ties_break_by_sample_then_token() {
        let mut acc = Attributor::new(1, 2);
        let codes = Array2::from_elem((3, 1), 1.0);
        acc.observe(&[rec("b", 0), rec("a", 7), rec("a", 2)], &codes, &RecordContext::default());
        let r = acc.finish();
        let keys: Vec<(&str, u32)> = r.latents[&0].iter().map(|e| (e.sample_id.as_str(), e.token_index)).collect();
        assert_eq!(keys, vec![("a", 2), ("a", 7)]);
    }

    #[test]
    fn cooccurrence_counts_predicted_classes() {
        let mut ctx = RecordContext::default();
        ctx.classes.insert(("a".into(), 0), "knife".into());
        ctx.classes.insert(("b".into(), 0), "hand".into());
        let mut acc = Attributor::new(2, 4);
        let codes = ndarray::array![[1.0, 0.0], [1.0, 2.0]];
        acc.observe(&[rec("a", 0), rec("b", 0)], &codes, &ctx);
        let r = acc.finish();
        assert_eq!(
            r.cooccurrence,
            vec![
                CooccurrenceRow { latent_index: 0, class: "hand".into(), count: 1 },
                CooccurrenceRow { latent_index: 0, class: "knife".into(), count: 1 },
                CooccurrenceRow { latent_index: 1, class: "hand".into(), count: 1 },
            ]
        );
    }

    #[test]
    fn merge_rejects_mismatched_shapes() {
        let mut a = Attributor::new(2, 4);
        assert!(a.merge(Attributor::new(3, 4)).is_err());
    }
}
