//! Sparse autoencoders: ReLU, TopK, BatchTopK and Matryoshka variants,
//! dead-latent auxiliary loss, transcoders and checkpoints.

mod checkpoint;
mod config;
mod error;
mod fit;
mod model;
mod normalize;
pub mod sparsify;
mod train;
mod transcoder;

pub use checkpoint::{Checkpoint, FORMAT_TAG as CHECKPOINT_FORMAT};
pub use config::{SaeConfig, SaeVariant};
pub use error::{Result, SaeError};
pub use fit::{fit_dataset, fit_task, FitOptions};
pub use model::SaeModel;
pub use normalize::{normalize_input, NormStats};
pub use sparsify::{sparsify, Selection};
pub use train::{loss_and_grad, reconstruction_fvu, train_step, Gradients, LossBreakdown, OptimizerState, Pass, SaeTrainReport, SaeTrainer, StepReport};
pub use transcoder::{make_transcoder, TranscoderTask};
