use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{HybridConfig, ModelError, RnnKind};
use crate::autodiff::{gru_step, lstm_step, NormStats, ParamSet, Tape, Tensor, Var};

type Result<T> = std::result::Result<T, ModelError>;

pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;

/// Running mean/variance of one batch-norm layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunningStats {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

#[derive(Clone, Debug)]
struct ConvIdx {
    weight: usize,
    bias: usize,
    norm: Option<(usize, usize)>,
}

#[derive(Clone, Debug)]
struct RnnIdx {
    w_input: usize,
    w_hidden: usize,
    bias: usize,
}

#[derive(Clone, Debug)]
struct Layout {
    conv: Vec<ConvIdx>,
    /// `[layer][direction]`
    rnn: Vec<Vec<RnnIdx>>,
    attn: Option<(usize, usize, usize)>,
    fc: Vec<(usize, usize)>,
    out: (usize, usize),
}

/// Parameters, batch-norm state and architecture of one classifier.
#[derive(Clone, Debug)]
pub struct HybridModel {
    pub config: HybridConfig,
    pub params: ParamSet,
    pub running: Vec<RunningStats>,
    layout: Layout,
}

/// Intermediate handles from one forward pass.
#[derive(Clone, Debug)]
pub struct ForwardTrace {
    /// `[B]` probabilities.
    pub probs: Var,
    /// `[B, F, T]` encoder output.
    pub encoded: Var,
    /// `[B, T, R]` recurrent states, when an RNN is present.
    pub states: Option<Var>,
    /// `[B, T]` attention weights, when attention is enabled.
    pub attention: Option<Var>,
    /// `[B, W]` head input.
    pub context: Var,
    /// Batch statistics of every batch-norm layer (training mode only).
    pub bn_batch_stats: Vec<(Vec<f64>, Vec<f64>)>,
}

fn uniform(rng: &mut ChaCha8Rng, shape: &[usize], bound: f64) -> Tensor {
    Tensor::from_fn(shape, |_| rng.random_range(-bound..bound))
}

/// Square orthogonal matrix from the QR decomposition of a Gaussian draw.
fn orthogonal(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| StandardNormal.sample(rng));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    // sign fix makes the draw uniform over the orthogonal group
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

impl HybridModel {
    /// Fresh model with seeded initialisation.
    ///
    /// Conv and hidden FC weights: Kaiming-uniform for ReLU (`±√(6/fan_in)`).
    /// Recurrent input, attention and output weights: `±√(3/fan_in)`.
    /// Recurrent hidden weights: orthogonal per gate block. Biases zero,
    /// batch-norm scale one.
    pub fn new(config: HybridConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = ParamSet::new();
        let mut running = Vec::new();

        let mut conv = Vec::new();
        let depths = config.conv_arch.stage_depths();
        let mut layer_iter = config.conv_layers().into_iter();
        for (s, &d) in depths.iter().enumerate() {
            for l in 0..d {
                let (cin, cout) = layer_iter.next().unwrap();
                let fan_in = (cin * 3) as f64;
                let weight = p.push(format!("conv{}_{}.weight", s + 1, l + 1), uniform(&mut rng, &[cout, cin, 3], (6.0 / fan_in).sqrt()));
                let bias = p.push(format!("conv{}_{}.bias", s + 1, l + 1), Tensor::zeros(&[cout]));
                let norm = config.batch_norm.then(|| {
                    running.push(RunningStats {
                        mean: vec![0.0; cout],
                        var: vec![1.0; cout],
                    });
                    (
                        p.push(format!("bn{}_{}.gamma", s + 1, l + 1), Tensor::full(&[cout], 1.0)),
                        p.push(format!("bn{}_{}.beta", s + 1, l + 1), Tensor::zeros(&[cout])),
                    )
                });
                conv.push(ConvIdx { weight, bias, norm });
            }
        }

        let mut rnn = Vec::new();
        if config.rnn_kind != RnnKind::None {
            let h = config.rnn_units;
            let g = config.rnn_kind.gates();
            let mut din = config.encoder_shape().0;
            for layer in 0..config.rnn_layers {
                let mut dirs = Vec::new();
                for dir in 0..config.directions() {
                    let tag = format!("rnn{}.{}", layer + 1, if dir == 0 { "fwd" } else { "bwd" });
                    let w_input = p.push(format!("{tag}.w_input"), uniform(&mut rng, &[g * h, din], (3.0 / din as f64).sqrt()));
                    let mut wh = Vec::with_capacity(g * h * h);
                    for _ in 0..g {
                        let q = orthogonal(&mut rng, h);
                        for i in 0..h {
                            for j in 0..h {
                                wh.push(q[(i, j)]);
                            }
                        }
                    }
                    let w_hidden = p.push(format!("{tag}.w_hidden"), Tensor::new(vec![g * h, h], wh)?);
                    let bias = p.push(format!("{tag}.bias"), Tensor::zeros(&[g * h]));
                    dirs.push(RnnIdx { w_input, w_hidden, bias });
                }
                rnn.push(dirs);
                din = config.rnn_output_width();
            }
        }

        let attn = config.uses_attention().then(|| {
            let (a, r) = (config.attention_nodes, config.rnn_output_width());
            let w1 = p.push("attn.w1", uniform(&mut rng, &[a, r], (3.0 / r as f64).sqrt()));
            let b1 = p.push("attn.b1", Tensor::zeros(&[a]));
            let w2 = p.push("attn.w2", uniform(&mut rng, &[1, a], (3.0 / a as f64).sqrt()));
            (w1, b1, w2)
        });

        let mut fc = Vec::new();
        let mut width = config.head_input_width();
        if !config.direct_head {
            for i in 0..config.fc_layers {
                let n = config.fc_nodes;
                let w = p.push(format!("head.fc{}.weight", i + 1), uniform(&mut rng, &[n, width], (6.0 / width as f64).sqrt()));
                let b = p.push(format!("head.fc{}.bias", i + 1), Tensor::zeros(&[n]));
                fc.push((w, b));
                width = n;
            }
        }
        let ow = p.push("head.out.weight", uniform(&mut rng, &[1, width], (3.0 / width as f64).sqrt()));
        let ob = p.push("head.out.bias", Tensor::zeros(&[1]));

        Ok(HybridModel {
            config,
            params: p,
            running,
            layout: Layout {
                conv,
                rnn,
                attn,
                fc,
                out: (ow, ob),
            },
        })
    }

    /// Total number of learnable scalars.
    pub fn parameter_count(&self) -> usize {
        self.params.numel()
    }

    /// Record every parameter on `tape` as a gradient-receiving leaf.
    pub fn bind(&mut self, tape: &mut Tape) -> Vec<Var> {
        tape.watch_all(&mut self.params)
    }

    /// Record every parameter as a constant (inference only).
    pub fn bind_constants(&self, tape: &mut Tape) -> Vec<Var> {
        self.params.tensors().iter().map(|t| tape.constant(t.value.clone())).collect()
    }

    fn check_input(&self, tape: &Tape, x: Var) -> Result<()> {
        let s = tape.shape(x);
        let c = &self.config;
        if s.len() != 3 || s[1] != c.input_channels || s[2] != c.input_samples {
            return Err(ModelError::Input {
                expected: vec![s.first().copied().unwrap_or(0), c.input_channels, c.input_samples],
                actual: s.to_vec(),
            });
        }
        Ok(())
    }

    /// Conv stages: `[B, C, L] → [B, F, L/32]`.
    pub fn encode(&self, tape: &mut Tape, vars: &[Var], x: Var, train: bool) -> Result<(Var, Vec<(Vec<f64>, Vec<f64>)>)> {
        self.check_input(tape, x)?;
        let mut h = x;
        let mut stats = Vec::new();
        let mut k = 0;
        let mut bn = 0;
        for &d in self.config.conv_arch.stage_depths().iter() {
            for _ in 0..d {
                let ci = &self.layout.conv[k];
                h = tape.conv1d(h, vars[ci.weight], vars[ci.bias], 1, 1)?;
                if let Some((g, b)) = ci.norm {
                    let mode = if train {
                        NormStats::Batch
                    } else {
                        NormStats::Running {
                            mean: &self.running[bn].mean,
                            var: &self.running[bn].var,
                        }
                    };
                    let (y, st) = tape.batch_norm(h, vars[g], vars[b], mode, BN_EPS)?;
                    h = y;
                    if let Some(st) = st {
                        stats.push(st);
                    }
                    bn += 1;
                }
                h = tape.relu(h);
                k += 1;
            }
            h = tape.maxpool1d(h, 2, 2)?;
        }
        Ok((h, stats))
    }

    /// One recurrent direction over `[B, T, D]`; returns `[B, T, H]` in input time order.
    fn run_direction(&self, tape: &mut Tape, vars: &[Var], seq: Var, idx: &RnnIdx, reverse: bool) -> Result<Var> {
        let (b, t) = (tape.shape(seq)[0], tape.shape(seq)[1]);
        let h_units = self.config.rnn_units;
        let gx = tape.linear(seq, vars[idx.w_input], Some(vars[idx.bias]))?;
        let mut h = tape.constant(Tensor::zeros(&[b, h_units]));
        let mut c = tape.constant(Tensor::zeros(&[b, h_units]));
        let mut out = vec![h; t];
        let order: Vec<usize> = if reverse { (0..t).rev().collect() } else { (0..t).collect() };
        for step in order {
            let g = tape.select_axis1(gx, step)?;
            match self.config.rnn_kind {
                RnnKind::Gru => h = gru_step(tape, g, h, vars[idx.w_hidden])?,
                RnnKind::Lstm => {
                    let (hn, cn) = lstm_step(tape, g, h, c, vars[idx.w_hidden])?;
                    h = hn;
                    c = cn;
                }
                RnnKind::None => unreachable!(),
            }
            out[step] = h;
        }
        Ok(tape.stack_axis1(&out)?)
    }

    /// Stacked (bi)directional recurrence: `[B, T, D] → [B, T, R]`.
    ///
    /// Also returns the final state of each direction of the last layer
    /// (forward at `T−1`, backward at `0`), concatenated.
    pub fn recurrent(&self, tape: &mut Tape, vars: &[Var], seq: Var) -> Result<(Var, Var)> {
        let mut input = seq;
        let mut last = None;
        for layer in &self.layout.rnn {
            let fwd = self.run_direction(tape, vars, input, &layer[0], false)?;
            let t = tape.shape(fwd)[1];
            let (states, fin) = if let Some(bidx) = layer.get(1) {
                let bwd = self.run_direction(tape, vars, input, bidx, true)?;
                let f_last = tape.select_axis1(fwd, t - 1)?;
                let b_first = tape.select_axis1(bwd, 0)?;
                (tape.concat_last(fwd, bwd)?, tape.concat_last(f_last, b_first)?)
            } else {
                (fwd, tape.select_axis1(fwd, t - 1)?)
            };
            input = states;
            last = Some(fin);
        }
        Ok((input, last.expect("at least one recurrent layer")))
    }

    /// `score_t = w₂ᵀ tanh(W₁ h_t + b₁)`, softmax over time, weighted sum of states.
    pub fn attention(&self, tape: &mut Tape, vars: &[Var], states: Var) -> Result<(Var, Var)> {
        let (w1, b1, w2) = self
            .layout
            .attn
            .ok_or_else(|| ModelError::Config("attention is disabled".into()))?;
        let (b, t) = (tape.shape(states)[0], tape.shape(states)[1]);
        let u = tape.linear(states, vars[w1], Some(vars[b1]))?;
        let u = tape.tanh(u);
        let s = tape.linear(u, vars[w2], None)?;
        let s = tape.reshape(s, &[b, t])?;
        let weights = tape.softmax(s);
        let context = tape.weighted_sum_axis1(weights, states)?;
        Ok((context, weights))
    }

    /// Dropout, hidden FC layers with ReLU, one output unit, sigmoid: `[B, W] → [B]`.
    pub fn head<R: Rng + ?Sized>(&self, tape: &mut Tape, vars: &[Var], context: Var, train: bool, rng: &mut R) -> Result<Var> {
        let b = tape.shape(context)[0];
        let mut h = tape.dropout(context, self.config.dropout_p, train, rng)?;
        for &(w, bias) in &self.layout.fc {
            h = tape.linear(h, vars[w], Some(vars[bias]))?;
            h = tape.relu(h);
        }
        let (ow, ob) = self.layout.out;
        let z = tape.linear(h, vars[ow], Some(vars[ob]))?;
        let z = tape.reshape(z, &[b])?;
        Ok(tape.sigmoid(z))
    }

    /// Full forward pass. `train` selects batch statistics and active dropout.
    pub fn forward<R: Rng + ?Sized>(&self, tape: &mut Tape, vars: &[Var], x: Var, train: bool, rng: &mut R) -> Result<ForwardTrace> {
        if vars.len() != self.params.len() {
            return Err(ModelError::Config(format!(
                "{} bound variables for {} parameters",
                vars.len(),
                self.params.len()
            )));
        }
        let (encoded, bn_batch_stats) = self.encode(tape, vars, x, train)?;
        let (states, attention, context) = if self.config.rnn_kind == RnnKind::None {
            (None, None, tape.mean_last(encoded)?)
        } else {
            let seq = tape.swap_last2(encoded)?;
            let (states, last) = self.recurrent(tape, vars, seq)?;
            if self.config.uses_attention() {
                let (ctx, w) = self.attention(tape, vars, states)?;
                (Some(states), Some(w), ctx)
            } else {
                (Some(states), None, last)
            }
        };
        let probs = self.head(tape, vars, context, train, rng)?;
        Ok(ForwardTrace {
            probs,
            encoded,
            states,
            attention,
            context,
            bn_batch_stats,
        })
    }

    /// Fold batch statistics from a training step into the running estimates.
    ///
    /// `batch_size` is the number of segments; each layer's element count is
    /// `batch_size` times its time length, which halves after every stage.
    pub fn update_running_stats(&mut self, batch_stats: &[(Vec<f64>, Vec<f64>)], batch_size: usize) {
        let mut counts = Vec::new();
        for (s, &d) in self.config.conv_arch.stage_depths().iter().enumerate() {
            counts.extend(std::iter::repeat_n(batch_size * (self.config.input_samples >> s), d));
        }
        for ((r, (m, v)), &n) in self.running.iter_mut().zip(batch_stats).zip(&counts) {
            let unbias = if n > 1 { n as f64 / (n - 1) as f64 } else { 1.0 };
            for i in 0..r.mean.len() {
                r.mean[i] = (1.0 - BN_MOMENTUM) * r.mean[i] + BN_MOMENTUM * m[i];
                r.var[i] = (1.0 - BN_MOMENTUM) * r.var[i] + BN_MOMENTUM * v[i] * unbias;
            }
        }
    }

    /// Eval-mode probabilities for `n` flat `[C, L]` segments, in chunks.
    pub fn predict_proba(&self, data: &[f64], n: usize, chunk: usize) -> Result<Vec<f64>> {
        let (c, l) = (self.config.input_channels, self.config.input_samples);
        if data.len() != n * c * l {
            return Err(ModelError::Input {
                expected: vec![n, c, l],
                actual: vec![data.len()],
            });
        }
        let mut out = Vec::with_capacity(n);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for start in (0..n).step_by(chunk.max(1)) {
            let m = chunk.max(1).min(n - start);
            let mut tape = Tape::new();
            let vars = self.bind_constants(&mut tape);
            let x = tape.constant(Tensor::new(vec![m, c, l], data[start * c * l..(start + m) * c * l].to_vec())?);
            let tr = self.forward(&mut tape, &vars, x, false, &mut rng)?;
            out.extend_from_slice(tape.value(tr.probs).data());
        }
        Ok(out)
    }

    /// Names and shapes of every parameter, in storage order.
    pub fn shapes(&self) -> Vec<(String, Vec<usize>)> {
        self.params.iter().map(|(n, t)| (n.to_string(), t.shape().to_vec())).collect()
    }
}

/// `1` when `p ≥ threshold`.
pub fn predict_label(probs: &[f64], threshold: f64) -> Vec<u8> {
    probs.iter().map(|&p| u8::from(p >= threshold)).collect()
}
