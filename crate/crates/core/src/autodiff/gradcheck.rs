//! Central finite-difference checks of tape gradients.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{gru_cell, lstm_cell, AutodiffError, GruVars, LstmVars, NormStats, Tape, Tensor, Var};

#[derive(Copy, Clone, Debug)]
pub struct GradCheckConfig {
    pub step: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig {
            step: 1e-5,
            rel_tol: 1e-4,
            abs_tol: 1e-6,
        }
    }
}

#[derive(Clone, Debug)]
pub struct GradMismatch {
    pub input: usize,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

#[derive(Clone, Debug, Default)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_abs_error: f64,
    pub max_rel_error: f64,
    pub failures: Vec<GradMismatch>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty() && self.checked > 0
    }

    /// Record one comparison; returns whether it was within tolerance.
    pub fn record(&mut self, cfg: &GradCheckConfig, input: usize, index: usize, analytic: f64, numeric: f64) -> bool {
        self.checked += 1;
        let err = (analytic - numeric).abs();
        let scale = analytic.abs().max(numeric.abs());
        self.max_abs_error = self.max_abs_error.max(err);
        if scale > 0.0 {
            self.max_rel_error = self.max_rel_error.max(err / scale);
        }
        let ok = err <= (cfg.rel_tol * scale).max(cfg.abs_tol);
        if !ok {
            self.failures.push(GradMismatch {
                input,
                index,
                analytic,
                numeric,
            });
        }
        ok
    }
}

/// Compare the tape gradient of `f(inputs)` with central differences.
///
/// `f` must build a scalar. When `positions` is `None` every element of every
/// input is checked; otherwise only the listed `(input, element)` pairs.
pub fn check<F>(
    inputs: &[Tensor],
    f: F,
    cfg: &GradCheckConfig,
    positions: Option<&[(usize, usize)]>,
) -> Result<GradCheckReport, AutodiffError>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var, AutodiffError>,
{
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.leaf(t.clone())).collect();
    let loss = f(&mut tape, &vars)?;
    let grads = tape.backward(loss)?;

    let eval = |perturbed: &[Tensor]| -> Result<f64, AutodiffError> {
        let mut t = Tape::new();
        let vs: Vec<Var> = perturbed.iter().map(|x| t.constant(x.clone())).collect();
        let out = f(&mut t, &vs)?;
        Ok(t.value(out).item())
    };

    let all: Vec<(usize, usize)>;
    let positions = match positions {
        Some(p) => p,
        None => {
            all = inputs
                .iter()
                .enumerate()
                .flat_map(|(i, t)| (0..t.len()).map(move |j| (i, j)))
                .collect();
            &all
        }
    };

    let mut report = GradCheckReport::default();
    let mut work: Vec<Tensor> = inputs.to_vec();
    for &(i, j) in positions {
        let orig = work[i].data()[j];
        work[i].data_mut()[j] = orig + cfg.step;
        let plus = eval(&work)?;
        work[i].data_mut()[j] = orig - cfg.step;
        let minus = eval(&work)?;
        work[i].data_mut()[j] = orig;
        let numeric = (plus - minus) / (2.0 * cfg.step);
        let analytic = grads.get(vars[i]).map_or(0.0, |g| g[j]);
        report.record(cfg, i, j, analytic, numeric);
    }
    Ok(report)
}

fn random_tensor(rng: &mut ChaCha8Rng, shape: &[usize], scale: f64) -> Tensor {
    Tensor::from_fn(shape, |_| rng.random_range(-scale..scale))
}

/// Reduce `v` to a scalar with fixed pseudo-random weights so every output
/// element carries a distinct upstream gradient.
pub fn probe_sum(tape: &mut Tape, v: Var, seed: u64) -> Result<Var, AutodiffError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let probe = random_tensor(&mut rng, tape.shape(v), 1.0);
    let c = tape.constant(probe);
    let prod = tape.mul(v, c)?;
    Ok(tape.sum(prod))
}

type Case = (&'static str, Vec<Tensor>, Box<dyn Fn(&mut Tape, &[Var]) -> Result<Var, AutodiffError>>);

/// Finite-difference checks for every tape operation. Returns one report per op.
pub fn op_suite(seed: u64) -> Result<Vec<(&'static str, GradCheckReport)>, AutodiffError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = GradCheckConfig::default();
    let mut cases: Vec<Case> = Vec::new();

    cases.push((
        "conv1d",
        vec![
            random_tensor(&mut rng, &[2, 3, 9], 1.0),
            random_tensor(&mut rng, &[4, 3, 3], 1.0),
            random_tensor(&mut rng, &[4], 1.0),
        ],
        Box::new(|t, v| {
            let y = t.conv1d(v[0], v[1], v[2], 2, 1)?;
            probe_sum(t, y, 1)
        }),
    ));
    // distinct values keep every window's argmax well separated
    let mut pool_vals: Vec<f64> = (0..2 * 3 * 8).map(|i| i as f64 * 0.1).collect();
    for i in (1..pool_vals.len()).rev() {
        pool_vals.swap(i, rng.random_range(0..=i));
    }
    cases.push((
        "maxpool1d",
        vec![Tensor::new(vec![2, 3, 8], pool_vals)?],
        Box::new(|t, v| {
            let y = t.maxpool1d(v[0], 2, 2)?;
            probe_sum(t, y, 2)
        }),
    ));
    cases.push((
        "linear",
        vec![
            random_tensor(&mut rng, &[3, 2, 5], 1.0),
            random_tensor(&mut rng, &[4, 5], 1.0),
            random_tensor(&mut rng, &[4], 1.0),
        ],
        Box::new(|t, v| {
            let y = t.linear(v[0], v[1], Some(v[2]))?;
            probe_sum(t, y, 3)
        }),
    ));
    // keep relu inputs away from the kink
    let relu_in = Tensor::from_fn(&[4, 6], |i| {
        let s = if i % 2 == 0 { 1.0 } else { -1.0 };
        s * (0.1 + (i as f64 * 0.37).sin().abs())
    });
    cases.push((
        "relu",
        vec![relu_in],
        Box::new(|t, v| {
            let y = t.relu(v[0]);
            probe_sum(t, y, 4)
        }),
    ));
    cases.push((
        "tanh",
        vec![random_tensor(&mut rng, &[4, 6], 3.0)],
        Box::new(|t, v| {
            let y = t.tanh(v[0]);
            probe_sum(t, y, 5)
        }),
    ));
    cases.push((
        "sigmoid",
        vec![random_tensor(&mut rng, &[4, 6], 3.0)],
        Box::new(|t, v| {
            let y = t.sigmoid(v[0]);
            probe_sum(t, y, 6)
        }),
    ));
    cases.push((
        "softmax",
        vec![random_tensor(&mut rng, &[3, 7], 2.0)],
        Box::new(|t, v| {
            let y = t.softmax(v[0]);
            probe_sum(t, y, 7)
        }),
    ));
    cases.push((
        "dropout",
        vec![random_tensor(&mut rng, &[5, 8], 1.0)],
        Box::new(|t, v| {
            let mut r = ChaCha8Rng::seed_from_u64(99);
            let y = t.dropout(v[0], 0.5, true, &mut r)?;
            probe_sum(t, y, 8)
        }),
    ));
    cases.push((
        "batch_norm",
        vec![
            random_tensor(&mut rng, &[3, 2, 5], 1.0),
            random_tensor(&mut rng, &[2], 1.0),
            random_tensor(&mut rng, &[2], 1.0),
        ],
        Box::new(|t, v| {
            let (y, _) = t.batch_norm(v[0], v[1], v[2], NormStats::Batch, 1e-5)?;
            probe_sum(t, y, 9)
        }),
    ));
    cases.push((
        "batch_norm_running",
        vec![
            random_tensor(&mut rng, &[3, 2, 5], 1.0),
            random_tensor(&mut rng, &[2], 1.0),
            random_tensor(&mut rng, &[2], 1.0),
        ],
        Box::new(|t, v| {
            let stats = NormStats::Running {
                mean: &[0.2, -0.1],
                var: &[1.5, 0.7],
            };
            let (y, _) = t.batch_norm(v[0], v[1], v[2], stats, 1e-5)?;
            probe_sum(t, y, 10)
        }),
    ));
    cases.push((
        "sequence_plumbing",
        vec![random_tensor(&mut rng, &[2, 3, 4], 1.0)],
        Box::new(|t, v| {
            let sw = t.swap_last2(v[0])?; // [2,4,3]
            let a = t.select_axis1(sw, 1)?; // [2,3]
            let b = t.select_axis1(sw, 3)?;
            let st = t.stack_axis1(&[b, a, b])?; // [2,3,3]
            let sl = t.slice_last(st, 1, 2)?; // [2,3,2]
            let cat = t.concat_last(sl, st)?; // [2,3,5]
            let m = t.mean_last(cat)?; // [2,3]
            let r = t.reshape(m, &[6])?;
            let s = t.scale(r, 1.7);
            probe_sum(t, s, 11)
        }),
    ));
    cases.push((
        "weighted_sum_axis1",
        vec![random_tensor(&mut rng, &[2, 4], 1.0), random_tensor(&mut rng, &[2, 4, 3], 1.0)],
        Box::new(|t, v| {
            let y = t.weighted_sum_axis1(v[0], v[1])?;
            probe_sum(t, y, 12)
        }),
    ));
    cases.push((
        "elementwise",
        vec![random_tensor(&mut rng, &[3, 4], 1.0), random_tensor(&mut rng, &[3, 4], 1.0)],
        Box::new(|t, v| {
            let a = t.add(v[0], v[1])?;
            let b = t.sub(a, v[1])?;
            let c = t.mul(b, v[1])?;
            let m = t.mean(c);
            let s = probe_sum(t, c, 13)?;
            t.add(m, s)
        }),
    ));
    let (din, h) = (4, 3);
    cases.push((
        "gru_cell",
        vec![
            random_tensor(&mut rng, &[2, din], 1.0),
            random_tensor(&mut rng, &[2, h], 1.0),
            random_tensor(&mut rng, &[3 * h, din], 0.8),
            random_tensor(&mut rng, &[3 * h, h], 0.8),
            random_tensor(&mut rng, &[3 * h], 0.5),
        ],
        Box::new(|t, v| {
            let p = GruVars {
                w_input: v[2],
                w_hidden: v[3],
                bias: v[4],
            };
            let h1 = gru_cell(t, v[0], v[1], &p)?;
            let h2 = gru_cell(t, v[0], h1, &p)?;
            probe_sum(t, h2, 14)
        }),
    ));
    cases.push((
        "lstm_cell",
        vec![
            random_tensor(&mut rng, &[2, din], 1.0),
            random_tensor(&mut rng, &[2, h], 1.0),
            random_tensor(&mut rng, &[2, h], 1.0),
            random_tensor(&mut rng, &[4 * h, din], 0.8),
            random_tensor(&mut rng, &[4 * h, h], 0.8),
            random_tensor(&mut rng, &[4 * h], 0.5),
        ],
        Box::new(|t, v| {
            let p = LstmVars {
                w_input: v[3],
                w_hidden: v[4],
                bias: v[5],
            };
            let (h1, c1) = lstm_cell(t, v[0], v[1], v[2], &p)?;
            let (h2, c2) = lstm_cell(t, v[0], h1, c1, &p)?;
            let a = probe_sum(t, h2, 15)?;
            let b = probe_sum(t, c2, 16)?;
            t.add(a, b)
        }),
    ));
    let preds = Tensor::from_fn(&[6], |_| rng.random_range(0.05..0.95));
    cases.push((
        "bce_loss",
        vec![preds],
        Box::new(|t, v| t.bce_loss(v[0], &[1.0, 0.0, 1.0, 1.0, 0.0, 0.0], super::BCE_EPS)),
    ));

    cases
        .into_iter()
        .map(|(name, inputs, f)| Ok((name, check(&inputs, f, &cfg, None)?)))
        .collect()
}
