use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::crossval::train_folds;
use super::{FoldPlan, TrainConfig, TrainError};
use crate::model::{ConvArch, HybridConfig};
use crate::signal::SegmentBatch;

/// Search intervals. Integer ranges are inclusive; the learning rate is
/// drawn log-uniformly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HyperparamSpace {
    pub conv_arch: Vec<ConvArch>,
    pub rnn_layers: (usize, usize),
    pub rnn_units: (usize, usize),
    pub attention_nodes: (usize, usize),
    pub fc_layers: (usize, usize),
    pub fc_nodes: (usize, usize),
    pub learning_rate: (f64, f64),
    pub batch_size: Vec<usize>,
    pub dropout: Vec<f64>,
}

impl Default for HyperparamSpace {
    fn default() -> Self {
        HyperparamSpace {
            conv_arch: vec![ConvArch::Vgg13, ConvArch::Vgg16],
            rnn_layers: (1, 3),
            rnn_units: (16, 512),
            attention_nodes: (64, 512),
            fc_layers: (1, 3),
            fc_nodes: (128, 1024),
            learning_rate: (1e-5, 1e-2),
            batch_size: vec![16, 32],
            dropout: vec![0.3, 0.4, 0.5],
        }
    }
}

fn within(v: usize, r: (usize, usize)) -> bool {
    r.0 <= v && v <= r.1
}

impl HyperparamSpace {
    /// The space collapsed onto a single configuration.
    pub fn point(m: &HybridConfig, t: &TrainConfig) -> Self {
        HyperparamSpace {
            conv_arch: vec![m.conv_arch],
            rnn_layers: (m.rnn_layers, m.rnn_layers),
            rnn_units: (m.rnn_units, m.rnn_units),
            attention_nodes: (m.attention_nodes, m.attention_nodes),
            fc_layers: (m.fc_layers, m.fc_layers),
            fc_nodes: (m.fc_nodes, m.fc_nodes),
            learning_rate: (t.learning_rate, t.learning_rate),
            batch_size: vec![t.batch_size],
            dropout: vec![m.dropout_p],
        }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let ok = !self.conv_arch.is_empty()
            && !self.batch_size.is_empty()
            && !self.dropout.is_empty()
            && [self.rnn_layers, self.rnn_units, self.attention_nodes, self.fc_layers, self.fc_nodes]
                .iter()
                .all(|r| r.0 <= r.1)
            && self.learning_rate.0 > 0.0
            && self.learning_rate.0 <= self.learning_rate.1;
        if ok {
            Ok(())
        } else {
            Err(TrainError::Config("empty or inverted search interval".into()))
        }
    }

    /// One draw; fields outside the space are taken from the bases.
    pub fn sample<R: Rng>(&self, rng: &mut R, base_model: &HybridConfig, base_train: &TrainConfig) -> (HybridConfig, TrainConfig) {
        let (lo, hi) = (self.learning_rate.0.ln(), self.learning_rate.1.ln());
        let lr = if lo == hi { self.learning_rate.0 } else { rng.random_range(lo..hi).exp() };
        let m = HybridConfig {
            conv_arch: *self.conv_arch.choose(rng).unwrap(),
            rnn_layers: rng.random_range(self.rnn_layers.0..=self.rnn_layers.1),
            rnn_units: rng.random_range(self.rnn_units.0..=self.rnn_units.1),
            attention_nodes: rng.random_range(self.attention_nodes.0..=self.attention_nodes.1),
            fc_layers: rng.random_range(self.fc_layers.0..=self.fc_layers.1),
            fc_nodes: rng.random_range(self.fc_nodes.0..=self.fc_nodes.1),
            dropout_p: *self.dropout.choose(rng).unwrap(),
            ..base_model.clone()
        };
        let t = TrainConfig {
            learning_rate: lr,
            batch_size: *self.batch_size.choose(rng).unwrap(),
            ..base_train.clone()
        };
        (m, t)
    }

    pub fn contains(&self, m: &HybridConfig, t: &TrainConfig) -> bool {
        self.conv_arch.contains(&m.conv_arch)
            && within(m.rnn_layers, self.rnn_layers)
            && within(m.rnn_units, self.rnn_units)
            && within(m.attention_nodes, self.attention_nodes)
            && within(m.fc_layers, self.fc_layers)
            && within(m.fc_nodes, self.fc_nodes)
            && self.dropout.contains(&m.dropout_p)
            && self.batch_size.contains(&t.batch_size)
            && self.learning_rate.0 <= t.learning_rate
            && t.learning_rate <= self.learning_rate.1
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub index: usize,
    pub model: HybridConfig,
    pub train: TrainConfig,
    pub mean_val_accuracy: f64,
    pub mean_val_loss: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub trials: Vec<Trial>,
    pub best: usize,
}

impl SearchOutcome {
    pub fn best_trial(&self) -> &Trial {
        &self.trials[self.best]
    }
}

/// `budget` seeded draws, each trained on every fold of `plan`; scored by
/// mean best-epoch validation accuracy (ties: lower mean validation loss,
/// then earlier trial). Test sets are never looked at.
#[allow(clippy::too_many_arguments)]
pub fn random_search(
    space: &HyperparamSpace,
    budget: usize,
    base_model: &HybridConfig,
    base_train: &TrainConfig,
    plan: &FoldPlan,
    batch: &SegmentBatch,
    seed: u64,
    jobs: usize,
) -> Result<SearchOutcome, TrainError> {
    if budget == 0 {
        return Err(TrainError::Config("search budget must be at least 1".into()));
    }
    space.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut trials = Vec::with_capacity(budget);
    for index in 0..budget {
        let (m, t) = space.sample(&mut rng, base_model, base_train);
        log::info!("trial {index}: {} lr {:.3e} batch {}", m.arch_name(), t.learning_rate, t.batch_size);
        let folds = train_folds(&m, &t, &plan.folds, batch, jobs)?;
        let k = folds.len() as f64;
        trials.push(Trial {
            index,
            mean_val_accuracy: folds.iter().map(|f| f.outcome.best_val_accuracy).sum::<f64>() / k,
            mean_val_loss: folds.iter().map(|f| f.outcome.best_val_loss).sum::<f64>() / k,
            model: m,
            train: t,
        });
    }
    let best = trials
        .iter()
        .min_by(|a, b| {
            b.mean_val_accuracy
                .total_cmp(&a.mean_val_accuracy)
                .then(a.mean_val_loss.total_cmp(&b.mean_val_loss))
                .then(a.index.cmp(&b.index))
        })
        .unwrap()
        .index;
    Ok(SearchOutcome { trials, best })
}
