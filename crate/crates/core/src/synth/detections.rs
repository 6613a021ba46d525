use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::eval::{GroundTruth, RawDetection};

/// Image grid: ground-truth boxes sit in the left half of a 200×100 image,
/// false positives in the right half, so the two never overlap.
const IMAGE_W: f64 = 200.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectionSpec {
    pub classes: Vec<String>,
    pub images: usize,
    pub objects_per_image: usize,
    /// Ungrounded detections per image, worded like the default negatives.
    pub ungrounded_per_image: usize,
    /// Class-named false positives per image for the objectness fixture.
    pub false_positives_per_image: usize,
    pub seed: u64,
}

impl Default for DetectionSpec {
    fn default() -> Self {
        Self {
            classes: ["person", "car", "dog", "bicycle", "chair"].map(String::from).to_vec(),
            images: 40,
            objects_per_image: 3,
            ungrounded_per_image: 2,
            false_positives_per_image: 3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionFixture {
    pub classes: Vec<String>,
    pub ground_truth: Vec<GroundTruth>,
    pub detections: Vec<RawDetection>,
}

fn random_box(rng: &mut ChaCha8Rng, x_lo: f64) -> [f64; 4] {
    let x = rng.random_range(x_lo..x_lo + 70.0);
    let y = rng.random_range(0.0..70.0);
    [x, y, x + rng.random_range(10.0..30.0), y + rng.random_range(10.0..30.0)]
}

fn jitter(rng: &mut ChaCha8Rng, b: [f64; 4]) -> [f64; 4] {
    let dx = rng.random_range(-1.0..1.0);
    let dy = rng.random_range(-1.0..1.0);
    [b[0] + dx, b[1] + dy, b[2] + dx, b[3] + dy]
}

fn ground_truth(spec: &DetectionSpec, rng: &mut ChaCha8Rng) -> Vec<GroundTruth> {
    let mut gt = Vec::new();
    for img in 0..spec.images {
        for _ in 0..spec.objects_per_image {
            gt.push(GroundTruth {
                sample_id: format!("{img}"),
                bbox: random_box(rng, 0.0),
                label: spec.classes[rng.random_range(0..spec.classes.len())].clone(),
            });
        }
    }
    gt
}

/// Correct detections with confidence in [0.5, 0.9], plus ungrounded texts
/// ("an object", "a thing") on empty regions with confidence in [0.9, 1.0].
/// Left unfiltered, the ungrounded texts land on some class and outrank its
/// true positives.
pub fn ungrounded_fixture(spec: &DetectionSpec) -> DetectionFixture {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let ground_truth = ground_truth(spec, &mut rng);
    let mut detections = Vec::new();
    for g in &ground_truth {
        detections.push(RawDetection {
            sample_id: g.sample_id.clone(),
            bbox: jitter(&mut rng, g.bbox),
            text: g.label.clone(),
            confidence: Some(rng.random_range(0.5..0.9)),
            objectness: None,
        });
    }
    let phrases = ["an object", "a thing"];
    for img in 0..spec.images {
        for j in 0..spec.ungrounded_per_image {
            detections.push(RawDetection {
                sample_id: format!("{img}"),
                bbox: random_box(&mut rng, IMAGE_W / 2.0),
                text: phrases[j % phrases.len()].to_string(),
                confidence: Some(rng.random_range(0.9..1.0)),
                objectness: None,
            });
        }
    }
    DetectionFixture {
        classes: spec.classes.clone(),
        ground_truth,
        detections,
    }
}

/// True and false positives with uninformative confidence in [0.5, 1.0];
/// objectness is high (≥ 0.8) on true positives and low (≤ 0.2) on false
/// ones, so only the objectness product ranks them correctly.
pub fn noisy_confidence_fixture(spec: &DetectionSpec) -> DetectionFixture {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed.wrapping_add(1));
    let ground_truth = ground_truth(spec, &mut rng);
    let mut detections = Vec::new();
    for g in &ground_truth {
        detections.push(RawDetection {
            sample_id: g.sample_id.clone(),
            bbox: jitter(&mut rng, g.bbox),
            text: g.label.clone(),
            confidence: Some(rng.random_range(0.5..1.0)),
            objectness: Some(rng.random_range(0.8..1.0)),
        });
    }
    for img in 0..spec.images {
        for _ in 0..spec.false_positives_per_image {
            detections.push(RawDetection {
                sample_id: format!("{img}"),
                bbox: random_box(&mut rng, IMAGE_W / 2.0),
                text: spec.classes[rng.random_range(0..spec.classes.len())].clone(),
                confidence: Some(rng.random_range(0.5..1.0)),
                objectness: Some(rng.random_range(0.0..0.2)),
            });
        }
    }
    DetectionFixture {
        classes: spec.classes.clone(),
        ground_truth,
        detections,
    }
}
