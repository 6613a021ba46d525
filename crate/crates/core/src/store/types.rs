use serde::{Deserialize, Serialize};

/// What a capture location produces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArtifactKind {
    Activation,
    Prediction,
    Objectness,
    Box,
}

/// A named capture location inside a model.
///
/// `(model_id, point_name)` identifies the location; `layer_index` must agree
/// for every record that shares the same pair.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AccessPointSpec {
    pub model_id: String,
    pub point_name: String,
    pub layer_index: u16,
    pub artifact_kind: ArtifactKind,
}

impl AccessPointSpec {
    pub fn new(
        model_id: impl Into<String>,
        point_name: impl Into<String>,
        layer_index: u16,
        artifact_kind: ArtifactKind,
    ) -> Self {
        Self {
            model_id: model_id.into(),
            point_name: point_name.into(),
            layer_index,
            artifact_kind,
        }
    }

    pub fn activation(model_id: &str, point_name: &str, layer_index: u16) -> Self {
        Self::new(model_id, point_name, layer_index, ArtifactKind::Activation)
    }

    /// The `(model_id, point_name)` key.
    pub fn key(&self) -> (&str, &str) {
        (&self.model_id, &self.point_name)
    }
}

/// Scalar side information carried next to a vector.
///
/// `bbox` is `(cx, cy, w, h)` normalized to `[0, 1]`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Aux {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objectness: Option<f32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bbox: Option<[f32; 4]>,
}

impl Aux {
    pub fn is_empty(&self) -> bool {
        self.objectness.is_none() && self.bbox.is_none()
    }
}

/// One aligned activation vector with its provenance.
///
/// Vectors are held as `f64` in memory; tables declared as `f32` only accept
/// values that are exactly representable in single precision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRecord {
    pub access_point: AccessPointSpec,
    pub sample_id: String,
    /// Token, query or proposal slot within the sample.
    pub token_index: u32,
    pub vector: Vec<f64>,
    #[serde(default, skip_serializing_if = "Aux::is_empty")]
    pub aux: Aux,
}

impl FeatureRecord {
    pub fn dim(&self) -> usize {
        self.vector.len()
    }

    /// `(sample_id, token_index)` pairing key used by transcoders and probes.
    pub fn slot(&self) -> (String, u32) {
        (self.sample_id.clone(), self.token_index)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dtype {
    #[default]
    F32,
    F64,
}

impl Dtype {
    /// Round a value through the storage precision.
    pub fn quantize(self, v: f64) -> f64 {
        match self {
            Dtype::F32 => v as f32 as f64,
            Dtype::F64 => v,
        }
    }
}

/// Per access point entry of the table sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccessPointEntry {
    #[serde(flatten)]
    pub spec: AccessPointSpec,
    pub dimension: usize,
    pub row_count: u64,
    /// Parquet part file holding this access point, relative to the table directory.
    pub file: String,
}

/// Contents of `schema.json`, written next to the Parquet parts of a table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureTableSchema {
    pub format: String,
    pub dtype: Dtype,
    pub row_count: u64,
    /// Common vector dimension when every access point agrees on it.
    pub dimension: Option<usize>,
    pub access_points: Vec<AccessPointEntry>,
}

impl FeatureTableSchema {
    pub const FORMAT: &'static str = "strata.features/1";

    pub fn entry(&self, point_name: &str) -> Option<&AccessPointEntry> {
        self.access_points.iter().find(|e| e.spec.point_name == point_name)
    }

    pub fn dimension_of(&self, point_name: &str) -> Option<usize> {
        self.entry(point_name).map(|e| e.dimension)
    }
}
