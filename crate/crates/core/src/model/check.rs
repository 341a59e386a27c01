//! Finite-difference check of the whole network's BCE loss.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{HybridModel, ModelError};
use crate::autodiff::gradcheck::{GradCheckConfig, GradCheckReport};
use crate::autodiff::{Tape, Tensor, BCE_EPS};

/// Which of the four stages a parameter belongs to.
pub fn stage_of(name: &str) -> &'static str {
    if name.starts_with("conv") || name.starts_with("bn") {
        "encoder"
    } else if name.starts_with("rnn") {
        "recurrent"
    } else if name.starts_with("attn") {
        "attention"
    } else {
        "head"
    }
}

fn loss(model: &HybridModel, x: &Tensor, y: &[f64], dropout_seed: u64, bind_grad: bool) -> Result<(f64, Vec<Vec<f64>>), ModelError> {
    let mut m = model.clone();
    let mut tape = Tape::new();
    let vars = if bind_grad { m.bind(&mut tape) } else { m.bind_constants(&mut tape) };
    let xv = tape.constant(x.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(dropout_seed);
    let tr = m.forward(&mut tape, &vars, xv, true, &mut rng)?;
    let l = tape.bce_loss(tr.probs, y, BCE_EPS)?;
    let value = tape.value(l).item();
    if !bind_grad {
        return Ok((value, Vec::new()));
    }
    let g = tape.backward(l)?;
    let grads = vars
        .iter()
        .zip(m.params.tensors())
        .map(|(v, t)| g.get(*v).map_or_else(|| vec![0.0; t.value.len()], <[f64]>::to_vec))
        .collect();
    Ok((value, grads))
}

/// Compare analytic and central-difference gradients of the training loss
/// (batch statistics, fixed dropout mask) for `n_params` randomly chosen
/// scalars, spread evenly across the four stages.
pub fn model_gradcheck(
    model: &HybridModel,
    batch: usize,
    n_params: usize,
    seed: u64,
    cfg: &GradCheckConfig,
) -> Result<(GradCheckReport, Vec<(String, usize)>), ModelError> {
    let c = &model.config;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = Tensor::from_fn(&[batch, c.input_channels, c.input_samples], |_| rng.random_range(-1.0..1.0));
    let y: Vec<f64> = (0..batch).map(|i| (i % 2) as f64).collect();
    let dropout_seed = rng.random();

    let (_, grads) = loss(model, &x, &y, dropout_seed, true)?;

    // round-robin over stages so every stage is sampled
    let stages = ["encoder", "recurrent", "attention", "head"];
    let mut pools: Vec<Vec<usize>> = stages
        .iter()
        .map(|s| (0..model.params.len()).filter(|&i| stage_of(model.params.name(i)) == *s).collect())
        .collect();
    pools.retain(|p| !p.is_empty());
    let mut picks = Vec::with_capacity(n_params);
    for k in 0..n_params {
        let pool = &pools[k % pools.len()];
        let &pi = pool.choose(&mut rng).unwrap();
        let ei = rng.random_range(0..model.params.get(pi).value.len());
        picks.push((pi, ei));
    }

    let mut report = GradCheckReport::default();
    let mut work = model.clone();
    for &(pi, ei) in &picks {
        let orig = work.params.get(pi).value.data()[ei];
        work.params.get_mut(pi).value.data_mut()[ei] = orig + cfg.step;
        let (plus, _) = loss(&work, &x, &y, dropout_seed, false)?;
        work.params.get_mut(pi).value.data_mut()[ei] = orig - cfg.step;
        let (minus, _) = loss(&work, &x, &y, dropout_seed, false)?;
        work.params.get_mut(pi).value.data_mut()[ei] = orig;
        report.record(cfg, pi, ei, grads[pi][ei], (plus - minus) / (2.0 * cfg.step));
    }
    let named = picks.iter().map(|&(pi, ei)| (model.params.name(pi).to_string(), ei)).collect();
    Ok((report, named))
}
