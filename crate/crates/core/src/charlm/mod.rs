//! Character-level LSTM language model trained from scratch.
//!
//! Characters are bytes, fed as one-hot vectors. Training is plain SGD over
//! fixed-size windows with per-tensor gradient clipping; everything is
//! `f64` and deterministic given the seed.

mod checkpoint;
mod lstm;
mod params;
mod train;
mod vocab;

pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, MAGIC, VERSION};
pub use lstm::{forward, grad, loss, loss_and_grad, RecurrentState};
pub use params::{LayerWeights, ModelParams, ModelShape, Tensor, Weights, INIT_RANGE};
pub use train::{evaluate_loss, train, train_with_progress, Checkpoint, EpochReport, Optimizer, TrainConfig, DEFAULT_LEARNING_RATE};
pub use vocab::Vocab;

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("character {0:#04x} is not in the vocabulary")]
    UnknownChar(u8),
    #[error("training diverged at epoch {epoch}")]
    Divergence { epoch: usize },
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
