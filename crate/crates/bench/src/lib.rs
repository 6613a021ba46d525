//! Inputs shared by the benchmarks.

use ndarray::Array2;
use strata::sae::{SaeConfig, SaeModel, SaeVariant};
use strata::store::{AccessPointSpec, FeatureRecord};
use strata::synth::{planted_dictionary, rows_to_records, DictionarySpec};

/// Planted-dictionary rows with their records, `samples` long.
pub fn dictionary_rows(samples: usize) -> (Array2<f64>, Vec<FeatureRecord>) {
    let planted = planted_dictionary(&DictionarySpec {
        samples,
        ..Default::default()
    });
    let records = rows_to_records(&planted.data, &AccessPointSpec::activation("planted", "resid", 0));
    (planted.data, records)
}

pub fn topk_sae(input_dim: usize, expansion: usize, k: usize) -> SaeModel {
    SaeModel::init(SaeConfig::new(input_dim, expansion, SaeVariant::TopK, k)).expect("valid config")
}
