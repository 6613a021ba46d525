use ndarray::Array2;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::store::{AccessPointSpec, Aux, FeatureRecord};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DictionarySpec {
    pub d: usize,
    pub m: usize,
    pub k: usize,
    pub samples: usize,
    /// Coefficients are drawn uniformly from this range.
    pub coef_range: (f64, f64),
    pub seed: u64,
}

impl Default for DictionarySpec {
    fn default() -> Self {
        Self {
            d: 16,
            m: 32,
            k: 4,
            samples: 50_000,
            coef_range: (0.5, 2.0),
            seed: 0,
        }
    }
}

/// Data generated as `x = Σ_{i∈S} a_i · D_i` with `|S| = k` atoms per sample.
#[derive(Debug, Clone)]
pub struct PlantedDictionary {
    /// Unit-norm atoms as columns, `d × m`.
    pub dictionary: Array2<f64>,
    /// `samples × m`, exactly `k` nonzeros per row.
    pub codes: Array2<f64>,
    /// `samples × d`.
    pub data: Array2<f64>,
}

pub fn planted_dictionary(spec: &DictionarySpec) -> PlantedDictionary {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut dictionary = Array2::from_shape_fn((spec.d, spec.m), |_| -> f64 { StandardNormal.sample(&mut rng) });
    for mut col in dictionary.columns_mut() {
        let n = col.dot(&col).sqrt();
        col.mapv_inplace(|v| v / n);
    }
    let mut codes = Array2::zeros((spec.samples, spec.m));
    for mut row in codes.rows_mut() {
        for i in sample(&mut rng, spec.m, spec.k) {
            row[i] = rng.random_range(spec.coef_range.0..spec.coef_range.1);
        }
    }
    let data = codes.dot(&dictionary.t());
    PlantedDictionary { dictionary, codes, data }
}

/// Rows of `data` as records `s{row:06}`, token 0.
pub fn rows_to_records(data: &Array2<f64>, point: &AccessPointSpec) -> Vec<FeatureRecord> {
    data.rows()
        .into_iter()
        .enumerate()
        .map(|(i, r)| FeatureRecord {
            access_point: point.clone(),
            sample_id: format!("s{i:06}"),
            token_index: 0,
            vector: r.to_vec(),
            aux: Aux::default(),
        })
        .collect()
}
