use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::TrainError;
use crate::autodiff::{OptimizerKind, OptimizerState, Tape, Tensor, BCE_EPS};
use crate::model::{predict_label, HybridConfig, HybridModel};
use crate::signal::SegmentBatch;

/// Optimisation settings. Defaults follow the tuned optimum for learning
/// rate and batch size; the epoch budget and patience are local choices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without a validation-loss improvement before stopping.
    pub early_stop_patience: usize,
    pub seed: u64,
    pub optimizer: OptimizerKind,
    /// Segments per inference chunk when scoring.
    pub eval_chunk: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-4,
            batch_size: 16,
            max_epochs: 100,
            early_stop_patience: 10,
            seed: 0,
            optimizer: OptimizerKind::Adam,
            eval_chunk: 64,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(TrainError::Config(format!("learning_rate {} must be positive", self.learning_rate)));
        }
        if self.batch_size == 0 || self.max_epochs == 0 || self.eval_chunk == 0 {
            return Err(TrainError::Config("batch_size, max_epochs and eval_chunk must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Parameters from the epoch with the lowest validation loss.
    pub model: HybridModel,
    pub curve: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub best_val_accuracy: f64,
}

/// Mean BCE with the same clamp as the training loss.
pub(crate) fn mean_bce(probs: &[f64], targets: &[f64]) -> f64 {
    let s: f64 = probs
        .iter()
        .zip(targets)
        .map(|(&p, &y)| {
            let p = p.clamp(BCE_EPS, 1.0 - BCE_EPS);
            -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
        })
        .sum();
    s / probs.len() as f64
}

pub(crate) fn accuracy(probs: &[f64], targets: &[f64], threshold: f64) -> f64 {
    let pred = predict_label(probs, threshold);
    let hits = pred.iter().zip(targets).filter(|(&p, &y)| f64::from(p) == y).count();
    100.0 * hits as f64 / targets.len() as f64
}

/// Mini-batch training with early stopping on validation loss.
///
/// `train_cfg.seed` fixes the initialisation, the per-epoch shuffles and the
/// dropout masks. Training stops once `early_stop_patience` epochs pass
/// without a new best, so patience 0 runs a single epoch.
pub fn train_fold(
    model_cfg: &HybridConfig,
    train_cfg: &TrainConfig,
    train: &SegmentBatch,
    val: &SegmentBatch,
) -> Result<TrainOutcome, TrainError> {
    train_cfg.validate()?;
    if train.is_empty() || val.is_empty() {
        return Err(TrainError::Config("train and validation sets must be non-empty".into()));
    }
    if train.channels != model_cfg.input_channels || train.samples != model_cfg.input_samples {
        return Err(TrainError::Config(format!(
            "segments are {}x{}, model expects {}x{}",
            train.channels, train.samples, model_cfg.input_channels, model_cfg.input_samples
        )));
    }
    let mut model = HybridModel::new(model_cfg.clone(), train_cfg.seed)?;
    let mut opt = OptimizerState::new(train_cfg.optimizer, train_cfg.learning_rate);
    let mut rng = ChaCha8Rng::seed_from_u64(train_cfg.seed.wrapping_add(0x5eed));
    let targets = train.targets();
    let val_targets = val.targets();
    let (c, l) = (train.channels, train.samples);
    let seg = c * l;

    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut curve = Vec::new();
    let mut best: Option<(HybridModel, usize, f64, f64)> = None;
    let mut since_best = 0;
    for epoch in 1..=train_cfg.max_epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for (bi, chunk) in order.chunks(train_cfg.batch_size).enumerate() {
            let m = chunk.len();
            let mut x = Vec::with_capacity(m * seg);
            for &i in chunk {
                x.extend_from_slice(train.segment(i));
            }
            let y: Vec<f64> = chunk.iter().map(|&i| targets[i]).collect();
            let mut tape = Tape::new();
            let vars = model.bind(&mut tape);
            let xv = tape.constant(Tensor::new(vec![m, c, l], x).map_err(crate::model::ModelError::from)?);
            let tr = model.forward(&mut tape, &vars, xv, true, &mut rng)?;
            let loss = tape.bce_loss(tr.probs, &y, BCE_EPS).map_err(crate::model::ModelError::from)?;
            let value = tape.value(loss).item();
            if !value.is_finite() {
                return Err(TrainError::Diverged { epoch, batch: bi, loss: value });
            }
            let grads = tape.backward(loss).map_err(crate::model::ModelError::from)?;
            grads.accumulate_into(&mut model.params);
            opt.step(&mut model.params).map_err(crate::model::ModelError::from)?;
            // the clamped loss can stay finite while the weights overflow
            if !model.params.tensors().iter().all(|p| p.value.all_finite()) {
                return Err(TrainError::Diverged { epoch, batch: bi, loss: f64::NAN });
            }
            model.update_running_stats(&tr.bn_batch_stats, m);
            total += value * m as f64;
        }
        let train_loss = total / train.len() as f64;
        let probs = model.predict_proba(&val.data, val.len(), train_cfg.eval_chunk)?;
        let val_loss = mean_bce(&probs, &val_targets);
        if !val_loss.is_finite() {
            return Err(TrainError::Diverged {
                epoch,
                batch: usize::MAX,
                loss: val_loss,
            });
        }
        let val_accuracy = accuracy(&probs, &val_targets, model_cfg.threshold);
        log::debug!("epoch {epoch}: train {train_loss:.5} val {val_loss:.5} acc {val_accuracy:.2}");
        curve.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
            val_accuracy,
        });
        if best.as_ref().is_none_or(|b| val_loss < b.2) {
            best = Some((model.clone(), epoch, val_loss, val_accuracy));
            since_best = 0;
        } else {
            since_best += 1;
        }
        if since_best >= train_cfg.early_stop_patience {
            break;
        }
    }
    let (mut model, best_epoch, best_val_loss, best_val_accuracy) = best.expect("at least one epoch");
    model.params.zero_grad();
    Ok(TrainOutcome {
        model,
        curve,
        best_epoch,
        best_val_loss,
        best_val_accuracy,
    })
}
