use rayon::prelude::*;

use super::metrics::FoldMetrics;
use super::{check_hygiene, train_fold, EvaluationReport, Fold, FoldPlan, Level, Strategy, TrainConfig, TrainError, TrainOutcome};
use crate::model::{HybridConfig, HybridModel};
use crate::signal::SegmentBatch;

/// Independent seed for fold `fold` of a run seeded with `master` (SplitMix64).
pub fn fold_seed(master: u64, fold: usize) -> u64 {
    let mut z = master ^ (fold as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Clone, Debug)]
pub struct FoldResult {
    pub fold: usize,
    pub outcome: TrainOutcome,
    pub test_indices: Vec<usize>,
    pub test_probs: Vec<f64>,
    /// Segment-level test metrics of this fold.
    pub report: EvaluationReport,
}

#[derive(Clone, Debug)]
pub struct CrossvalResult {
    pub strategy: Strategy,
    pub folds: Vec<FoldResult>,
    /// Pooled test probability of every segment, by segment index.
    pub pooled_probs: Vec<Option<f64>>,
    /// Pooled segment-level report with per-fold detail.
    pub segment: EvaluationReport,
    /// Pooled subject-level (majority vote) report.
    pub subject: EvaluationReport,
}

fn labels_u8(batch: &SegmentBatch) -> Vec<u8> {
    batch.labels.iter().map(|l| u8::from(l.is_positive())).collect()
}

/// Score a frozen model on `batch`.
pub fn evaluate(model: &HybridModel, batch: &SegmentBatch, level: Level, threshold: f64, chunk: usize) -> Result<EvaluationReport, TrainError> {
    if batch.is_empty() {
        return Err(TrainError::Config("cannot evaluate an empty batch".into()));
    }
    let probs = model.predict_proba(&batch.data, batch.len(), chunk)?;
    Ok(EvaluationReport::from_predictions(level, threshold, &batch.subject_ids, &labels_u8(batch), &probs))
}

fn run_fold(model_cfg: &HybridConfig, train_cfg: &TrainConfig, fold: &Fold, batch: &SegmentBatch) -> Result<FoldResult, TrainError> {
    let cfg = TrainConfig {
        seed: fold_seed(train_cfg.seed, fold.index),
        ..train_cfg.clone()
    };
    let outcome = train_fold(model_cfg, &cfg, &batch.select(&fold.train), &batch.select(&fold.val))?;
    let test = batch.select(&fold.test);
    let test_probs = outcome.model.predict_proba(&test.data, test.len(), cfg.eval_chunk)?;
    let report = EvaluationReport::from_predictions(Level::Segment, model_cfg.threshold, &test.subject_ids, &labels_u8(&test), &test_probs);
    Ok(FoldResult {
        fold: fold.index,
        outcome,
        test_indices: fold.test.clone(),
        test_probs,
        report,
    })
}

/// Train every listed fold, `jobs` at a time. Results come back in fold
/// order; the first failing fold (by position) is reported.
pub(crate) fn train_folds(
    model_cfg: &HybridConfig,
    train_cfg: &TrainConfig,
    folds: &[Fold],
    batch: &SegmentBatch,
    jobs: usize,
) -> Result<Vec<FoldResult>, TrainError> {
    let work = |f: &Fold| {
        log::info!("fold {} ({} train / {} val / {} test)", f.index, f.train.len(), f.val.len(), f.test.len());
        run_fold(model_cfg, train_cfg, f, batch).map_err(|e| TrainError::Fold {
            fold: f.index,
            source: Box::new(e),
        })
    };
    let results: Vec<Result<FoldResult, TrainError>> = if jobs <= 1 {
        // stop at the first failure
        let mut v = Vec::new();
        for f in folds {
            let r = work(f);
            let failed = r.is_err();
            v.push(r);
            if failed {
                break;
            }
        }
        v
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| TrainError::Config(format!("thread pool: {e}")))?;
        pool.install(|| folds.par_iter().map(work).collect())
    };
    results.into_iter().collect()
}

/// Train and test every fold, then pool test predictions.
pub fn run_crossval(
    model_cfg: &HybridConfig,
    train_cfg: &TrainConfig,
    plan: &FoldPlan,
    batch: &SegmentBatch,
    jobs: usize,
) -> Result<CrossvalResult, TrainError> {
    check_hygiene(plan, batch)?;
    let folds = train_folds(model_cfg, train_cfg, &plan.folds, batch, jobs)?;

    let mut pooled_probs = vec![None; batch.len()];
    for f in &folds {
        for (&i, &p) in f.test_indices.iter().zip(&f.test_probs) {
            pooled_probs[i] = Some(p);
        }
    }
    // hygiene guarantees full coverage
    let idx: Vec<usize> = (0..batch.len()).filter(|&i| pooled_probs[i].is_some()).collect();
    let probs: Vec<f64> = idx.iter().map(|&i| pooled_probs[i].unwrap()).collect();
    let truth: Vec<u8> = idx.iter().map(|&i| u8::from(batch.labels[i].is_positive())).collect();
    let subjects: Vec<String> = idx.iter().map(|&i| batch.subject_ids[i].clone()).collect();

    let mut segment = EvaluationReport::from_predictions(Level::Segment, model_cfg.threshold, &subjects, &truth, &probs);
    segment.per_fold = folds
        .iter()
        .map(|f| FoldMetrics {
            fold: f.fold,
            confusion: f.report.confusion,
            metrics: f.report.metrics,
            best_epoch: f.outcome.best_epoch,
            val_loss: f.outcome.best_val_loss,
            val_accuracy: f.outcome.best_val_accuracy,
            curve: f.outcome.curve.clone(),
        })
        .collect();
    let subject = EvaluationReport::from_predictions(Level::Subject, model_cfg.threshold, &subjects, &truth, &probs);
    Ok(CrossvalResult {
        strategy: plan.strategy,
        folds,
        pooled_probs,
        segment,
        subject,
    })
}

/// Fold with the highest validation accuracy; ties go to the lower
/// validation loss, then the lower fold index.
pub fn select_best_fold_model(folds: &[FoldResult]) -> Option<&FoldResult> {
    folds.iter().min_by(|a, b| {
        b.outcome
            .best_val_accuracy
            .total_cmp(&a.outcome.best_val_accuracy)
            .then(a.outcome.best_val_loss.total_cmp(&b.outcome.best_val_loss))
            .then(a.fold.cmp(&b.fold))
    })
}
