//! The hybrid classifier: VGG-style 1-D conv encoder, bidirectional GRU
//! (or LSTM), additive attention and a sigmoid head.

pub mod checkpoint;
pub mod check;
mod config;
mod network;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
pub use config::{ConvArch, HybridConfig, RnnKind};
pub use network::{predict_label, ForwardTrace, HybridModel, RunningStats};

use crate::autodiff::AutodiffError;

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("invalid model config: {0}")]
    Config(String),
    #[error("input shape {actual:?} does not match expected {expected:?}")]
    Input { expected: Vec<usize>, actual: Vec<usize> },
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error("checkpoint {path}: {reason}")]
    Checkpoint { path: String, reason: String },
}
