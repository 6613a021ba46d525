//! Seeded synthetic fixtures with planted structure.

mod detections;
mod dictionary;
mod layers;

pub use detections::{noisy_confidence_fixture, ungrounded_fixture, DetectionFixture, DetectionSpec};
pub use dictionary::{planted_dictionary, rows_to_records, DictionarySpec, PlantedDictionary};
pub use layers::{phase_stack, planted_linear_boxes, separable_clusters, PhaseStack, PhaseStackSpec};
