use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::probe::{LayerData, ProbeTarget, TargetSource};
use crate::store::{AccessPointSpec, Aux, FeatureRecord};

/// A stack of layer features sharing one set of per-token targets. Each
/// layer holds the class and box signal scaled by its strength, plus noise;
/// strength near zero removes the signal from that layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PhaseStackSpec {
    pub d: usize,
    pub classes: usize,
    pub samples: usize,
    pub tokens: usize,
    pub noise: f64,
    /// Scale of the class mean vectors.
    pub class_scale: f64,
    /// Scale of the linear box embedding.
    pub box_scale: f64,
    /// Signal strength per layer.
    pub strengths: Vec<f64>,
    pub seed: u64,
}

impl Default for PhaseStackSpec {
    fn default() -> Self {
        Self {
            d: 32,
            classes: 8,
            samples: 600,
            tokens: 4,
            noise: 1.0,
            class_scale: 1.0,
            box_scale: 10.0,
            // bottleneck at layer 4: layers 0-3 lose signal, 5-7 restore it
            strengths: vec![1.0, 0.8, 0.6, 0.4, 0.02, 0.5, 0.8, 1.0],
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PhaseStack {
    pub layers: Vec<LayerData>,
    pub slots: Vec<(String, u32)>,
    pub targets: Vec<ProbeTarget>,
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

pub fn phase_stack(spec: &PhaseStackSpec) -> PhaseStack {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.samples * spec.tokens;
    let class_means = Array2::from_shape_fn((spec.classes, spec.d), |_| spec.class_scale * normal(&mut rng));
    // box coordinates enter through a fixed random linear embedding
    let box_embed = Array2::from_shape_fn((4, spec.d), |_| spec.box_scale * normal(&mut rng));

    let mut slots = Vec::with_capacity(n);
    let mut targets = Vec::with_capacity(n);
    for s in 0..spec.samples {
        for t in 0..spec.tokens {
            slots.push((format!("img{s:05}"), t as u32));
            let w = rng.random_range(0.1..0.3);
            let h = rng.random_range(0.1..0.3);
            targets.push(ProbeTarget {
                source: TargetSource::GroundTruth,
                y_class: rng.random_range(0..spec.classes),
                y_bbox: [rng.random_range(0.2..0.8), rng.random_range(0.2..0.8), w, h],
            });
        }
    }
    let mut signal = Array2::zeros((n, spec.d));
    for (mut row, t) in signal.rows_mut().into_iter().zip(&targets) {
        row += &class_means.row(t.y_class);
        for c in 0..4 {
            row.scaled_add(t.y_bbox[c] - 0.5, &box_embed.row(c));
        }
    }
    let layers = spec
        .strengths
        .iter()
        .enumerate()
        .map(|(l, &a)| {
            let noise = Array2::from_shape_fn((n, spec.d), |_| spec.noise * normal(&mut rng));
            LayerData {
                layer_index: l as u16,
                features: &signal * a + noise,
            }
        })
        .collect();
    PhaseStack { layers, slots, targets }
}

impl PhaseStack {
    /// Records for every layer under `model_id`, one access point per layer
    /// named `layer{l}`.
    pub fn to_records(&self, model_id: &str) -> Vec<FeatureRecord> {
        let mut out = Vec::new();
        for layer in &self.layers {
            let point = AccessPointSpec::activation(model_id, &format!("layer{}", layer.layer_index), layer.layer_index);
            for (row, (sample, token)) in layer.features.rows().into_iter().zip(&self.slots) {
                out.push(FeatureRecord {
                    access_point: point.clone(),
                    sample_id: sample.clone(),
                    token_index: *token,
                    vector: row.to_vec(),
                    aux: Aux::default(),
                });
            }
        }
        out
    }
}

/// Two Gaussian clusters in `d` dimensions, separated along the first axis
/// by `gap` standard deviations. Labels alternate 0, 1.
pub fn separable_clusters(n: usize, d: usize, gap: f64, seed: u64) -> (Array2<f64>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels: Vec<usize> = (0..n).map(|i| i % 2).collect();
    let x = Array2::from_shape_fn((n, d), |(i, j)| {
        let z = normal(&mut rng);
        if j == 0 {
            z + if labels[i] == 0 { -gap / 2.0 } else { gap / 2.0 }
        } else {
            z
        }
    });
    (x, labels)
}

/// Features and boxes with `box = A·x + c` exactly; `A` is small so boxes
/// stay inside the unit square for `x` in `[-1, 1]^d`.
pub fn planted_linear_boxes(n: usize, d: usize, seed: u64) -> (Array2<f64>, Vec<[f64; 4]>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = 0.1 / d as f64;
    let a = Array2::from_shape_fn((4, d), |_| rng.random_range(-scale..scale));
    let c = [0.5, 0.5, 0.3, 0.3];
    let x = Array2::from_shape_fn((n, d), |_| rng.random_range(-1.0..1.0));
    let boxes = x
        .rows()
        .into_iter()
        .map(|r| {
            let y = a.dot(&r);
            [y[0] + c[0], y[1] + c[1], y[2] + c[2], y[3] + c[3]]
        })
        .collect();
    (x, boxes)
}
