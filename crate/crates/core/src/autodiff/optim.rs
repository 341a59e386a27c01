use serde::{Deserialize, Serialize};

use super::{AutodiffError, ParamSet};

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    #[default]
    Adam,
    Sgd,
}

/// Optimizer hyperparameters plus per-parameter moment buffers.
#[derive(Clone, Debug)]
pub struct OptimizerState {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    first_moment: Vec<Vec<f64>>,
    second_moment: Vec<Vec<f64>>,
    step: u64,
}

impl OptimizerState {
    pub fn adam(learning_rate: f64) -> Self {
        Self::new(OptimizerKind::Adam, learning_rate)
    }

    pub fn sgd(learning_rate: f64) -> Self {
        Self::new(OptimizerKind::Sgd, learning_rate)
    }

    pub fn new(kind: OptimizerKind, learning_rate: f64) -> Self {
        assert!(learning_rate > 0.0, "learning rate must be positive");
        OptimizerState {
            kind,
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            first_moment: Vec::new(),
            second_moment: Vec::new(),
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Apply one update from the populated gradients, then clear them.
    ///
    /// Fails without touching any parameter if a trainable tensor has no gradient.
    pub fn step(&mut self, params: &mut ParamSet) -> Result<(), AutodiffError> {
        for (name, p) in params.iter() {
            if p.requires_grad && p.grad.is_none() {
                return Err(AutodiffError::MissingGradient(name.to_string()));
            }
        }
        if self.first_moment.is_empty() {
            self.first_moment = params.tensors().iter().map(|p| vec![0.0; p.value.len()]).collect();
            self.second_moment = self.first_moment.clone();
        }
        assert_eq!(self.first_moment.len(), params.len(), "optimizer bound to a different parameter set");
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        for (idx, p) in params.tensors_mut().iter_mut().enumerate() {
            if !p.requires_grad {
                continue;
            }
            let grad = p.grad.take().expect("checked above");
            let w = p.value.data_mut();
            match self.kind {
                OptimizerKind::Sgd => {
                    for (wi, gi) in w.iter_mut().zip(&grad) {
                        *wi -= self.learning_rate * gi;
                    }
                }
                OptimizerKind::Adam => {
                    let m = &mut self.first_moment[idx];
                    let v = &mut self.second_moment[idx];
                    assert_eq!(m.len(), w.len(), "moment buffer shape mismatch");
                    for j in 0..w.len() {
                        let g = grad[j];
                        m[j] = self.beta1 * m[j] + (1.0 - self.beta1) * g;
                        v[j] = self.beta2 * v[j] + (1.0 - self.beta2) * g * g;
                        let mhat = m[j] / bc1;
                        let vhat = v[j] / bc2;
                        w[j] -= self.learning_rate * mhat / (vhat.sqrt() + self.epsilon);
                    }
                }
            }
        }
        Ok(())
    }
}
