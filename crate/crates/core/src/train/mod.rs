//! Fold construction, the training loop, cross-validation, random search,
//! the architecture ablation ladder and evaluation metrics.

mod ablation;
mod crossval;
mod folds;
mod metrics;
pub mod report;
mod search;
mod trainer;

pub use ablation::{ablation_ladder, run_ablation, AblationRow};
pub use crossval::{evaluate, fold_seed, run_crossval, select_best_fold_model, CrossvalResult, FoldResult};
pub use folds::{check_hygiene, make_kfold, make_loocv, Fold, FoldPlan, Strategy};
pub use metrics::{subject_votes, ConfusionMatrix, EvaluationReport, Level, Metrics, SubjectVerdict};
pub use search::{random_search, HyperparamSpace, SearchOutcome, Trial};
pub use trainer::{train_fold, EpochRecord, TrainConfig, TrainOutcome};

use crate::model::ModelError;

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("invalid fold plan: {0}")]
    Plan(String),
    #[error("split hygiene violated: {0}")]
    Hygiene(String),
    #[error("{0}")]
    Config(String),
    #[error("training diverged at epoch {epoch}, batch {batch} (loss {loss}; non-finite loss or weights)")]
    Diverged { epoch: usize, batch: usize, loss: f64 },
    #[error("fold {fold}: {source}")]
    Fold {
        fold: usize,
        #[source]
        source: Box<TrainError>,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
}

impl TrainError {
    /// True when the failure is numerical rather than a bad input.
    pub fn is_numerical(&self) -> bool {
        match self {
            TrainError::Diverged { .. } => true,
            TrainError::Fold { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}
