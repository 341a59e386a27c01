//! Minimal reverse-mode automatic differentiation.
//!
//! A [`Tape`] records operations on [`Var`] handles; [`Tape::backward`]
//! replays them in reverse. Only the operations the EEG classifier needs are
//! provided. Everything is `f64`.

mod gemm;
pub mod gradcheck;
pub mod optim;
pub mod rnn;
mod tape;
mod tensor;

pub use optim::{OptimizerKind, OptimizerState};
pub use rnn::{gru_cell, gru_step, lstm_cell, lstm_step, GruVars, LstmVars};
pub use tape::{Activation, Gradients, NormStats, Tape, Var};
pub use tensor::{DiffTensor, ParamSet, Tensor};

/// Clamp applied to predictions before taking logarithms in the BCE loss.
pub const BCE_EPS: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AutodiffError {
    #[error("{op}: {dim} mismatch (expected {expected}, got {actual})")]
    ShapeMismatch {
        op: &'static str,
        dim: String,
        expected: usize,
        actual: usize,
    },
    #[error("{op}: expected rank {expected}, got shape {shape:?}")]
    RankMismatch {
        op: &'static str,
        expected: usize,
        shape: Vec<usize>,
    },
    #[error("invalid shape {shape:?}: {reason}")]
    InvalidShape { shape: Vec<usize>, reason: String },
    #[error("{op}: {reason}")]
    InvalidArgument { op: &'static str, reason: String },
    #[error("empty batch")]
    EmptyBatch,
    #[error("backward needs a scalar loss, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),
    #[error("tape was already differentiated; higher-order gradients are not supported")]
    TapeConsumed,
    #[error("parameter `{0}` has no gradient")]
    MissingGradient(String),
}
