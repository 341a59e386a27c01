// Wengert-list tape for reverse-mode differentiation.
//
// Every op pushes a node holding its output value and whatever the backward
// rule needs. Nodes only reference earlier nodes, so walking the list in
// reverse is a valid topological order and visits each node once.

use rand::Rng;

use super::gemm::gemm;
use super::tensor::{DiffTensor, ParamSet, Tensor};
use super::AutodiffError;

type Result<T> = std::result::Result<T, AutodiffError>;

/// Handle to a node on a [`Tape`].
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(pub(crate) usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
    Sigmoid,
}

/// Statistics mode for batch normalisation.
#[derive(Clone, Debug)]
pub enum NormStats<'a> {
    /// Normalise with the batch's own mean and (biased) variance.
    Batch,
    /// Normalise with fixed running statistics.
    Running { mean: &'a [f64], var: &'a [f64] },
}

#[derive(Debug)]
enum Op {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Sum(Var),
    Mean(Var),
    Activation(Var, Activation),
    Softmax(Var),
    Dropout { input: Var, mask: Vec<f64> },
    Reshape(Var),
    Linear {
        input: Var,
        weight: Var,
        bias: Option<Var>,
    },
    Conv1d {
        input: Var,
        weight: Var,
        bias: Var,
        stride: usize,
        padding: usize,
    },
    MaxPool1d { input: Var, argmax: Vec<usize> },
    BatchNorm {
        input: Var,
        gamma: Var,
        beta: Var,
        xhat: Vec<f64>,
        inv_std: Vec<f64>,
        batch_stats: bool,
    },
    SwapLast2(Var),
    SelectAxis1 { input: Var, index: usize },
    StackAxis1(Vec<Var>),
    SliceLast { input: Var, start: usize },
    ConcatLast(Var, Var),
    MeanLast(Var),
    WeightedSumAxis1 { weights: Var, states: Var },
    Bce { pred: Var, target: Vec<f64>, eps: f64 },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    needs_grad: bool,
}

/// Gradients produced by [`Tape::backward`], indexed by [`Var`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&[f64]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }

    /// Accumulate into every parameter bound to the tape that produced these gradients.
    pub fn accumulate_into(&self, params: &mut ParamSet) {
        for p in params.tensors_mut() {
            accumulate_param(self, p);
        }
    }
}

pub(crate) fn accumulate_param(grads: &Gradients, p: &mut DiffTensor) {
    if !p.requires_grad {
        return;
    }
    let Some(id) = p.tape_id else { return };
    let g = match grads.get(id) {
        Some(g) => g.to_vec(),
        None => vec![0.0; p.value.len()],
    };
    match &mut p.grad {
        Some(acc) => acc.iter_mut().zip(&g).for_each(|(a, b)| *a += b),
        None => p.grad = Some(g),
    }
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    consumed: bool,
}

fn mismatch(op: &'static str, dim: impl Into<String>, expected: usize, actual: usize) -> AutodiffError {
    AutodiffError::ShapeMismatch {
        op,
        dim: dim.into(),
        expected,
        actual,
    }
}

fn rank_check(op: &'static str, t: &Tensor, rank: usize) -> Result<()> {
    if t.rank() != rank {
        return Err(AutodiffError::RankMismatch {
            op,
            expected: rank,
            shape: t.shape().to_vec(),
        });
    }
    Ok(())
}

// Largest f64 below one. Saturated outputs are pinned here so sigmoid and
// tanh stay strictly inside their open ranges.
const BELOW_ONE: f64 = 1.0 - f64::EPSILON / 2.0;

fn sigmoid(x: f64) -> f64 {
    let y = if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    };
    y.clamp(f64::MIN_POSITIVE, BELOW_ONE)
}

fn tanh(x: f64) -> f64 {
    x.tanh().clamp(-BELOW_ONE, BELOW_ONE)
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    /// A value that gradients never flow into.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push_raw(value, Op::Leaf, false)
    }

    /// A leaf that receives a gradient.
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push_raw(value, Op::Leaf, true)
    }

    /// Record `p` on this tape and remember the handle inside it.
    pub fn watch(&mut self, p: &mut DiffTensor) -> Var {
        let v = self.push_raw(p.value.clone(), Op::Leaf, p.requires_grad);
        p.tape_id = Some(v);
        v
    }

    /// Watch every parameter of a set, returning handles in set order.
    pub fn watch_all(&mut self, params: &mut ParamSet) -> Vec<Var> {
        params.tensors_mut().iter_mut().map(|p| self.watch(p)).collect()
    }

    fn push_raw(&mut self, value: Tensor, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn push(&mut self, value: Tensor, op: Op, inputs: &[Var]) -> Var {
        let needs_grad = inputs.iter().any(|v| self.nodes[v.0].needs_grad);
        self.push_raw(value, op, needs_grad)
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb {
            return Err(AutodiffError::InvalidArgument {
                op,
                reason: format!("operand shapes differ: {sa:?} vs {sb:?}"),
            });
        }
        Ok(())
    }

    fn zip_map(&mut self, op: &'static str, a: Var, b: Var, f: impl Fn(f64, f64) -> f64, node: Op) -> Result<Var> {
        self.same_shape(op, a, b)?;
        let va = self.value(a);
        let vb = self.value(b);
        let data = va.data().iter().zip(vb.data()).map(|(&x, &y)| f(x, y)).collect();
        let value = Tensor::new(va.shape().to_vec(), data)?;
        Ok(self.push(value, node, &[a, b]))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_map("add", a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_map("sub", a, b, |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_map("mul", a, b, |x, y| x * y, Op::Mul(a, b))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let v = self.value(a);
        let value = Tensor::new(v.shape().to_vec(), v.data().iter().map(|x| x * c).collect())
            .expect("shape preserved");
        self.push(value, Op::Scale(a, c), &[a])
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).data().iter().sum();
        self.push(Tensor::scalar(s), Op::Sum(a), &[a])
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let v = self.value(a);
        let s = v.data().iter().sum::<f64>() / v.len() as f64;
        self.push(Tensor::scalar(s), Op::Mean(a), &[a])
    }

    pub fn activation(&mut self, a: Var, kind: Activation) -> Var {
        let v = self.value(a);
        let f: fn(f64) -> f64 = match kind {
            Activation::Relu => |x| x.max(0.0),
            Activation::Tanh => tanh,
            Activation::Sigmoid => sigmoid,
        };
        let value = Tensor::new(v.shape().to_vec(), v.data().iter().map(|&x| f(x)).collect())
            .expect("shape preserved");
        self.push(value, Op::Activation(a, kind), &[a])
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.activation(a, Activation::Relu)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.activation(a, Activation::Tanh)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.activation(a, Activation::Sigmoid)
    }

    /// Softmax over the trailing axis, computed with max subtraction.
    pub fn softmax(&mut self, a: Var) -> Var {
        let v = self.value(a);
        let t = *v.shape().last().unwrap();
        let mut out = v.data().to_vec();
        for row in out.chunks_mut(t) {
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut total = 0.0;
            for x in row.iter_mut() {
                *x = (*x - max).exp();
                total += *x;
            }
            row.iter_mut().for_each(|x| *x /= total);
        }
        let value = Tensor::new(v.shape().to_vec(), out).expect("shape preserved");
        self.push(value, Op::Softmax(a), &[a])
    }

    /// Inverted dropout: survivors are scaled by `1/(1-p)`; eval mode is the identity.
    pub fn dropout<R: Rng + ?Sized>(&mut self, a: Var, p: f64, training: bool, rng: &mut R) -> Result<Var> {
        if !(0.0..1.0).contains(&p) {
            return Err(AutodiffError::InvalidArgument {
                op: "dropout",
                reason: format!("probability {p} outside [0, 1)"),
            });
        }
        if !training || p == 0.0 {
            return Ok(a);
        }
        let keep = 1.0 / (1.0 - p);
        let v = self.value(a);
        let mask: Vec<f64> = (0..v.len())
            .map(|_| if rng.random::<f64>() < p { 0.0 } else { keep })
            .collect();
        let data = v.data().iter().zip(&mask).map(|(x, m)| x * m).collect();
        let value = Tensor::new(v.shape().to_vec(), data)?;
        Ok(self.push(value, Op::Dropout { input: a, mask }, &[a]))
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        let value = self.value(a).clone().reshape(shape)?;
        Ok(self.push(value, Op::Reshape(a), &[a]))
    }

    /// Affine map over the trailing axis: `y = x·Wᵀ + b`, with `W` shaped `[out, in]`.
    pub fn linear(&mut self, x: Var, weight: Var, bias: Option<Var>) -> Result<Var> {
        let xv = self.value(x);
        let wv = self.value(weight);
        rank_check("linear", wv, 2)?;
        let (dout, din) = (wv.shape()[0], wv.shape()[1]);
        let last = *xv.shape().last().unwrap();
        if last != din {
            return Err(mismatch("linear", "input features", din, last));
        }
        if let Some(b) = bias {
            let bv = self.value(b);
            if bv.shape() != [dout] {
                return Err(mismatch("linear", "bias length", dout, bv.len()));
            }
        }
        let rows = xv.len() / din;
        let mut out = vec![0.0; rows * dout];
        if let Some(b) = bias {
            let bv = self.value(b).data();
            for row in out.chunks_mut(dout) {
                row.copy_from_slice(bv);
            }
        }
        gemm(rows, din, dout, xv.data(), false, wv.data(), true, &mut out, if bias.is_some() { 1.0 } else { 0.0 });
        let mut shape = xv.shape().to_vec();
        *shape.last_mut().unwrap() = dout;
        let value = Tensor::new(shape, out)?;
        let mut inputs = vec![x, weight];
        inputs.extend(bias);
        Ok(self.push(value, Op::Linear { input: x, weight, bias }, &inputs))
    }

    /// 1-D cross-correlation. `x: [B, Cin, L]`, `weight: [Cout, Cin, K]`, `bias: [Cout]`.
    pub fn conv1d(&mut self, x: Var, weight: Var, bias: Var, stride: usize, padding: usize) -> Result<Var> {
        let xv = self.value(x);
        let wv = self.value(weight);
        let bv = self.value(bias);
        rank_check("conv1d", xv, 3)?;
        rank_check("conv1d", wv, 3)?;
        let (b, cin, l) = (xv.shape()[0], xv.shape()[1], xv.shape()[2]);
        let (cout, wcin, k) = (wv.shape()[0], wv.shape()[1], wv.shape()[2]);
        if wcin != cin {
            return Err(mismatch("conv1d", "input channels", wcin, cin));
        }
        if bv.shape() != [cout] {
            return Err(mismatch("conv1d", "bias length", cout, bv.len()));
        }
        if stride == 0 {
            return Err(AutodiffError::InvalidArgument {
                op: "conv1d",
                reason: "stride must be at least 1".into(),
            });
        }
        if k > l + 2 * padding {
            return Err(mismatch("conv1d", "kernel width", l + 2 * padding, k));
        }
        let lout = (l + 2 * padding - k) / stride + 1;
        let ck = cin * k;
        let mut out = vec![0.0; b * cout * lout];
        let mut cols = vec![0.0; ck * lout];
        for bi in 0..b {
            im2col(&xv.data()[bi * cin * l..(bi + 1) * cin * l], cin, l, k, stride, padding, lout, &mut cols);
            let o = &mut out[bi * cout * lout..(bi + 1) * cout * lout];
            for (co, row) in o.chunks_mut(lout).enumerate() {
                row.fill(bv.data()[co]);
            }
            gemm(cout, ck, lout, wv.data(), false, &cols, false, o, 1.0);
        }
        let value = Tensor::new(vec![b, cout, lout], out)?;
        Ok(self.push(
            value,
            Op::Conv1d {
                input: x,
                weight,
                bias,
                stride,
                padding,
            },
            &[x, weight, bias],
        ))
    }

    /// Max pooling over the trailing axis of `[B, C, L]`; ties resolve to the lowest index.
    pub fn maxpool1d(&mut self, x: Var, window: usize, stride: usize) -> Result<Var> {
        let xv = self.value(x);
        rank_check("maxpool1d", xv, 3)?;
        if window == 0 || stride == 0 {
            return Err(AutodiffError::InvalidArgument {
                op: "maxpool1d",
                reason: "window and stride must be at least 1".into(),
            });
        }
        let (b, c, l) = (xv.shape()[0], xv.shape()[1], xv.shape()[2]);
        if l < window {
            return Err(mismatch("maxpool1d", "length", window, l));
        }
        let lout = (l - window) / stride + 1;
        let mut out = Vec::with_capacity(b * c * lout);
        let mut argmax = Vec::with_capacity(b * c * lout);
        for (row_idx, row) in xv.data().chunks(l).enumerate() {
            for o in 0..lout {
                let start = o * stride;
                let mut best = start;
                for i in start + 1..start + window {
                    if row[i] > row[best] {
                        best = i;
                    }
                }
                out.push(row[best]);
                argmax.push(row_idx * l + best);
            }
        }
        let value = Tensor::new(vec![b, c, lout], out)?;
        Ok(self.push(value, Op::MaxPool1d { input: x, argmax }, &[x]))
    }

    /// Per-channel normalisation of `[B, C, L]` followed by `gamma·x̂ + beta`.
    ///
    /// Returns the output and, for batch statistics, the `(mean, biased variance)`
    /// used, so callers can maintain running estimates.
    pub fn batch_norm(
        &mut self,
        x: Var,
        gamma: Var,
        beta: Var,
        stats: NormStats<'_>,
        eps: f64,
    ) -> Result<(Var, Option<(Vec<f64>, Vec<f64>)>)> {
        let xv = self.value(x);
        rank_check("batch_norm", xv, 3)?;
        let (b, c, l) = (xv.shape()[0], xv.shape()[1], xv.shape()[2]);
        for (name, v) in [("gamma length", gamma), ("beta length", beta)] {
            let n = self.value(v).len();
            if n != c {
                return Err(mismatch("batch_norm", name, c, n));
            }
        }
        let (mean, var, batch_stats) = match stats {
            NormStats::Batch => {
                let n = (b * l) as f64;
                let mut mean = vec![0.0; c];
                let mut var = vec![0.0; c];
                for bi in 0..b {
                    for ci in 0..c {
                        let row = &xv.data()[(bi * c + ci) * l..(bi * c + ci + 1) * l];
                        mean[ci] += row.iter().sum::<f64>();
                    }
                }
                mean.iter_mut().for_each(|m| *m /= n);
                for bi in 0..b {
                    for ci in 0..c {
                        let row = &xv.data()[(bi * c + ci) * l..(bi * c + ci + 1) * l];
                        var[ci] += row.iter().map(|v| (v - mean[ci]).powi(2)).sum::<f64>();
                    }
                }
                var.iter_mut().for_each(|v| *v /= n);
                (mean, var, true)
            }
            NormStats::Running { mean, var } => {
                if mean.len() != c || var.len() != c {
                    return Err(mismatch("batch_norm", "running statistics", c, mean.len()));
                }
                (mean.to_vec(), var.to_vec(), false)
            }
        };
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + eps).sqrt()).collect();
        let g = self.value(gamma).data();
        let be = self.value(beta).data();
        let mut xhat = vec![0.0; xv.len()];
        let mut out = vec![0.0; xv.len()];
        for bi in 0..b {
            for ci in 0..c {
                let off = (bi * c + ci) * l;
                for i in off..off + l {
                    let h = (xv.data()[i] - mean[ci]) * inv_std[ci];
                    xhat[i] = h;
                    out[i] = g[ci] * h + be[ci];
                }
            }
        }
        let value = Tensor::new(vec![b, c, l], out)?;
        let var_out = self.push(
            value,
            Op::BatchNorm {
                input: x,
                gamma,
                beta,
                xhat,
                inv_std,
                batch_stats,
            },
            &[x, gamma, beta],
        );
        Ok((var_out, batch_stats.then_some((mean, var))))
    }

    /// `[A, B, C] -> [A, C, B]`.
    pub fn swap_last2(&mut self, x: Var) -> Result<Var> {
        let xv = self.value(x);
        rank_check("swap_last2", xv, 3)?;
        let (a, b, c) = (xv.shape()[0], xv.shape()[1], xv.shape()[2]);
        let mut out = vec![0.0; xv.len()];
        for ai in 0..a {
            let src = &xv.data()[ai * b * c..(ai + 1) * b * c];
            let dst = &mut out[ai * b * c..(ai + 1) * b * c];
            for bi in 0..b {
                for ci in 0..c {
                    dst[ci * b + bi] = src[bi * c + ci];
                }
            }
        }
        let value = Tensor::new(vec![a, c, b], out)?;
        Ok(self.push(value, Op::SwapLast2(x), &[x]))
    }

    /// `[B, T, F] -> [B, F]` at time index `index`.
    pub fn select_axis1(&mut self, x: Var, index: usize) -> Result<Var> {
        let xv = self.value(x);
        rank_check("select_axis1", xv, 3)?;
        let (b, t, f) = (xv.shape()[0], xv.shape()[1], xv.shape()[2]);
        if index >= t {
            return Err(AutodiffError::InvalidArgument {
                op: "select_axis1",
                reason: format!("index {index} out of range for {t} steps"),
            });
        }
        let mut out = Vec::with_capacity(b * f);
        for bi in 0..b {
            out.extend_from_slice(&xv.data()[(bi * t + index) * f..(bi * t + index + 1) * f]);
        }
        let value = Tensor::new(vec![b, f], out)?;
        Ok(self.push(value, Op::SelectAxis1 { input: x, index }, &[x]))
    }

    /// Stack `T` tensors of shape `[B, F]` into `[B, T, F]`.
    pub fn stack_axis1(&mut self, parts: &[Var]) -> Result<Var> {
        let Some(&first) = parts.first() else {
            return Err(AutodiffError::InvalidArgument {
                op: "stack_axis1",
                reason: "nothing to stack".into(),
            });
        };
        let s0 = self.shape(first).to_vec();
        if s0.len() != 2 {
            return Err(AutodiffError::RankMismatch {
                op: "stack_axis1",
                expected: 2,
                shape: s0,
            });
        }
        for &p in parts {
            if self.shape(p) != s0.as_slice() {
                return Err(AutodiffError::InvalidArgument {
                    op: "stack_axis1",
                    reason: format!("part shape {:?} differs from {s0:?}", self.shape(p)),
                });
            }
        }
        let (b, f, t) = (s0[0], s0[1], parts.len());
        let mut out = vec![0.0; b * t * f];
        for (ti, &p) in parts.iter().enumerate() {
            let pv = self.value(p).data();
            for bi in 0..b {
                out[(bi * t + ti) * f..(bi * t + ti + 1) * f].copy_from_slice(&pv[bi * f..(bi + 1) * f]);
            }
        }
        let value = Tensor::new(vec![b, t, f], out)?;
        Ok(self.push(value, Op::StackAxis1(parts.to_vec()), parts))
    }

    /// Columns `start..start+len` of the trailing axis.
    pub fn slice_last(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let xv = self.value(x);
        let f = *xv.shape().last().unwrap();
        if len == 0 || start + len > f {
            return Err(AutodiffError::InvalidArgument {
                op: "slice_last",
                reason: format!("range {start}..{} outside trailing dim {f}", start + len),
            });
        }
        let out: Vec<f64> = xv.data().chunks(f).flat_map(|r| r[start..start + len].iter().copied()).collect();
        let mut shape = xv.shape().to_vec();
        *shape.last_mut().unwrap() = len;
        let value = Tensor::new(shape, out)?;
        Ok(self.push(value, Op::SliceLast { input: x, start }, &[x]))
    }

    /// Concatenate along the trailing axis; leading shapes must agree.
    pub fn concat_last(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        if sa.len() != sb.len() || sa[..sa.len() - 1] != sb[..sb.len() - 1] {
            return Err(AutodiffError::InvalidArgument {
                op: "concat_last",
                reason: format!("leading shapes differ: {sa:?} vs {sb:?}"),
            });
        }
        let (fa, fb) = (*sa.last().unwrap(), *sb.last().unwrap());
        let va = self.value(a).data();
        let vb = self.value(b).data();
        let mut out = Vec::with_capacity(va.len() + vb.len());
        for (ra, rb) in va.chunks(fa).zip(vb.chunks(fb)) {
            out.extend_from_slice(ra);
            out.extend_from_slice(rb);
        }
        let mut shape = sa;
        *shape.last_mut().unwrap() = fa + fb;
        let value = Tensor::new(shape, out)?;
        Ok(self.push(value, Op::ConcatLast(a, b), &[a, b]))
    }

    /// Mean over the trailing axis, dropping it: `[B, C, L] -> [B, C]`.
    pub fn mean_last(&mut self, x: Var) -> Result<Var> {
        let xv = self.value(x);
        if xv.rank() < 2 {
            return Err(AutodiffError::RankMismatch {
                op: "mean_last",
                expected: 2,
                shape: xv.shape().to_vec(),
            });
        }
        let l = *xv.shape().last().unwrap();
        let out = xv.data().chunks(l).map(|r| r.iter().sum::<f64>() / l as f64).collect();
        let shape = xv.shape()[..xv.rank() - 1].to_vec();
        let value = Tensor::new(shape, out)?;
        Ok(self.push(value, Op::MeanLast(x), &[x]))
    }

    /// `out[b] = Σ_t weights[b, t] · states[b, t, :]`.
    pub fn weighted_sum_axis1(&mut self, weights: Var, states: Var) -> Result<Var> {
        let wv = self.value(weights);
        let sv = self.value(states);
        rank_check("weighted_sum_axis1", wv, 2)?;
        rank_check("weighted_sum_axis1", sv, 3)?;
        let (b, t, f) = (sv.shape()[0], sv.shape()[1], sv.shape()[2]);
        if wv.shape() != [b, t] {
            return Err(mismatch("weighted_sum_axis1", "weight steps", t, wv.shape()[1]));
        }
        let mut out = vec![0.0; b * f];
        for bi in 0..b {
            let o = &mut out[bi * f..(bi + 1) * f];
            for ti in 0..t {
                let w = wv.data()[bi * t + ti];
                let row = &sv.data()[(bi * t + ti) * f..(bi * t + ti + 1) * f];
                o.iter_mut().zip(row).for_each(|(acc, s)| *acc += w * s);
            }
        }
        let value = Tensor::new(vec![b, f], out)?;
        Ok(self.push(value, Op::WeightedSumAxis1 { weights, states }, &[weights, states]))
    }

    /// Mean binary cross-entropy; predictions are clamped to `[eps, 1-eps]` before the log.
    pub fn bce_loss(&mut self, pred: Var, target: &[f64], eps: f64) -> Result<Var> {
        let pv = self.value(pred);
        if pv.len() == 0 || target.is_empty() {
            return Err(AutodiffError::EmptyBatch);
        }
        if pv.len() != target.len() {
            return Err(mismatch("bce_loss", "batch size", pv.len(), target.len()));
        }
        if let Some(bad) = target.iter().find(|y| !(0.0..=1.0).contains(*y)) {
            return Err(AutodiffError::InvalidArgument {
                op: "bce_loss",
                reason: format!("target {bad} outside [0, 1]"),
            });
        }
        let n = target.len() as f64;
        let total: f64 = pv
            .data()
            .iter()
            .zip(target)
            .map(|(&p, &y)| {
                let p = p.clamp(eps, 1.0 - eps);
                y * p.ln() + (1.0 - y) * (1.0 - p).ln()
            })
            .sum();
        let value = Tensor::scalar(-total / n);
        Ok(self.push(
            value,
            Op::Bce {
                pred,
                target: target.to_vec(),
                eps,
            },
            &[pred],
        ))
    }

    /// Reverse sweep from a scalar `loss`. A tape can be differentiated once.
    pub fn backward(&mut self, loss: Var) -> Result<Gradients> {
        if self.consumed {
            return Err(AutodiffError::TapeConsumed);
        }
        let lv = self.value(loss);
        if lv.len() != 1 {
            return Err(AutodiffError::NonScalarLoss(lv.shape().to_vec()));
        }
        self.consumed = true;
        let mut grads: Vec<Option<Vec<f64>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(vec![1.0]);
        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            if !node.needs_grad {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.backprop_node(i, &g, &mut grads);
            grads[i] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn backprop_node(&self, i: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let nodes = &self.nodes;
        let needs = |v: Var| nodes[v.0].needs_grad;
        let val = |v: Var| &nodes[v.0].value;
        let out = &nodes[i].value;
        let mut acc = |v: Var, f: &mut dyn FnMut(&mut [f64])| {
            if !nodes[v.0].needs_grad {
                return;
            }
            let slot = grads[v.0].get_or_insert_with(|| vec![0.0; nodes[v.0].value.len()]);
            f(slot);
        };
        match &nodes[i].op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                acc(*a, &mut |s| s.iter_mut().zip(g).for_each(|(x, d)| *x += d));
                acc(*b, &mut |s| s.iter_mut().zip(g).for_each(|(x, d)| *x += d));
            }
            Op::Sub(a, b) => {
                acc(*a, &mut |s| s.iter_mut().zip(g).for_each(|(x, d)| *x += d));
                acc(*b, &mut |s| s.iter_mut().zip(g).for_each(|(x, d)| *x -= d));
            }
            Op::Mul(a, b) => {
                let (va, vb) = (val(*a).data(), val(*b).data());
                acc(*a, &mut |s| {
                    for ((x, d), y) in s.iter_mut().zip(g).zip(vb) {
                        *x += d * y;
                    }
                });
                acc(*b, &mut |s| {
                    for ((x, d), y) in s.iter_mut().zip(g).zip(va) {
                        *x += d * y;
                    }
                });
            }
            Op::Scale(a, c) => acc(*a, &mut |s| s.iter_mut().zip(g).for_each(|(x, d)| *x += c * d)),
            Op::Sum(a) => acc(*a, &mut |s| s.iter_mut().for_each(|x| *x += g[0])),
            Op::Mean(a) => {
                let n = val(*a).len() as f64;
                acc(*a, &mut |s| s.iter_mut().for_each(|x| *x += g[0] / n));
            }
            Op::Activation(a, kind) => {
                let x = val(*a).data();
                let y = out.data();
                acc(*a, &mut |s| {
                    for j in 0..s.len() {
                        let d = match kind {
                            Activation::Relu => {
                                if x[j] > 0.0 {
                                    1.0
                                } else {
                                    0.0
                                }
                            }
                            Activation::Tanh => 1.0 - y[j] * y[j],
                            Activation::Sigmoid => y[j] * (1.0 - y[j]),
                        };
                        s[j] += g[j] * d;
                    }
                });
            }
            Op::Softmax(a) => {
                let y = out.data();
                let t = *out.shape().last().unwrap();
                acc(*a, &mut |s| {
                    for ((srow, yrow), grow) in s.chunks_mut(t).zip(y.chunks(t)).zip(g.chunks(t)) {
                        let dot: f64 = yrow.iter().zip(grow).map(|(a, b)| a * b).sum();
                        for j in 0..t {
                            srow[j] += yrow[j] * (grow[j] - dot);
                        }
                    }
                });
            }
            Op::Dropout { input, mask } => {
                acc(*input, &mut |s| {
                    for ((x, d), m) in s.iter_mut().zip(g).zip(mask) {
                        *x += d * m;
                    }
                });
            }
            Op::Reshape(a) => acc(*a, &mut |s| s.iter_mut().zip(g).for_each(|(x, d)| *x += d)),
            Op::Linear { input, weight, bias } => {
                let xv = val(*input);
                let wv = val(*weight);
                let (dout, din) = (wv.shape()[0], wv.shape()[1]);
                let rows = xv.len() / din;
                // dx = dy · W
                acc(*input, &mut |s| gemm(rows, dout, din, g, false, wv.data(), false, s, 1.0));
                // dW = dyᵀ · x
                acc(*weight, &mut |s| gemm(dout, rows, din, g, true, xv.data(), false, s, 1.0));
                if let Some(b) = bias {
                    acc(*b, &mut |s| {
                        for row in g.chunks(dout) {
                            s.iter_mut().zip(row).for_each(|(x, d)| *x += d);
                        }
                    });
                }
            }
            Op::Conv1d {
                input,
                weight,
                bias,
                stride,
                padding,
            } => {
                let xv = val(*input);
                let wv = val(*weight);
                let (b, cin, l) = (xv.shape()[0], xv.shape()[1], xv.shape()[2]);
                let (cout, k) = (wv.shape()[0], wv.shape()[2]);
                let lout = out.shape()[2];
                let ck = cin * k;
                acc(*bias, &mut |s| {
                    for (r, row) in g.chunks(lout).enumerate() {
                        s[r % cout] += row.iter().sum::<f64>();
                    }
                });
                let mut cols = vec![0.0; ck * lout];
                if needs(*weight) {
                    acc(*weight, &mut |s| {
                        for bi in 0..b {
                            im2col(&xv.data()[bi * cin * l..(bi + 1) * cin * l], cin, l, k, *stride, *padding, lout, &mut cols);
                            let gb = &g[bi * cout * lout..(bi + 1) * cout * lout];
                            gemm(cout, lout, ck, gb, false, &cols, true, s, 1.0);
                        }
                    });
                }
                if needs(*input) {
                    acc(*input, &mut |s| {
                        for bi in 0..b {
                            let gb = &g[bi * cout * lout..(bi + 1) * cout * lout];
                            gemm(ck, cout, lout, wv.data(), true, gb, false, &mut cols, 0.0);
                            col2im_add(&cols, cin, l, k, *stride, *padding, lout, &mut s[bi * cin * l..(bi + 1) * cin * l]);
                        }
                    });
                }
            }
            Op::MaxPool1d { input, argmax } => {
                acc(*input, &mut |s| {
                    for (&idx, d) in argmax.iter().zip(g) {
                        s[idx] += d;
                    }
                });
            }
            Op::BatchNorm {
                input,
                gamma,
                beta,
                xhat,
                inv_std,
                batch_stats,
            } => {
                let xs = val(*input).shape();
                let (b, c, l) = (xs[0], xs[1], xs[2]);
                let gam = val(*gamma).data();
                let mut sum_g = vec![0.0; c];
                let mut sum_gx = vec![0.0; c];
                for bi in 0..b {
                    for ci in 0..c {
                        let off = (bi * c + ci) * l;
                        for j in off..off + l {
                            sum_g[ci] += g[j];
                            sum_gx[ci] += g[j] * xhat[j];
                        }
                    }
                }
                acc(*gamma, &mut |s| s.iter_mut().zip(&sum_gx).for_each(|(x, d)| *x += d));
                acc(*beta, &mut |s| s.iter_mut().zip(&sum_g).for_each(|(x, d)| *x += d));
                acc(*input, &mut |s| {
                    let n = (b * l) as f64;
                    for bi in 0..b {
                        for ci in 0..c {
                            let off = (bi * c + ci) * l;
                            let scale = gam[ci] * inv_std[ci];
                            for j in off..off + l {
                                s[j] += if *batch_stats {
                                    scale * (g[j] - sum_g[ci] / n - xhat[j] * sum_gx[ci] / n)
                                } else {
                                    scale * g[j]
                                };
                            }
                        }
                    }
                });
            }
            Op::SwapLast2(a) => {
                let os = out.shape();
                let (a0, c, b) = (os[0], os[1], os[2]);
                acc(*a, &mut |s| {
                    for ai in 0..a0 {
                        let base = ai * b * c;
                        for bi in 0..b {
                            for ci in 0..c {
                                s[base + bi * c + ci] += g[base + ci * b + bi];
                            }
                        }
                    }
                });
            }
            Op::SelectAxis1 { input, index } => {
                let xs = val(*input).shape();
                let (b, t, f) = (xs[0], xs[1], xs[2]);
                acc(*input, &mut |s| {
                    for bi in 0..b {
                        let dst = &mut s[(bi * t + index) * f..(bi * t + index + 1) * f];
                        dst.iter_mut().zip(&g[bi * f..(bi + 1) * f]).for_each(|(x, d)| *x += d);
                    }
                });
            }
            Op::StackAxis1(parts) => {
                let os = out.shape();
                let (b, t, f) = (os[0], os[1], os[2]);
                for (ti, &p) in parts.iter().enumerate() {
                    acc(p, &mut |s| {
                        for bi in 0..b {
                            let src = &g[(bi * t + ti) * f..(bi * t + ti + 1) * f];
                            s[bi * f..(bi + 1) * f].iter_mut().zip(src).for_each(|(x, d)| *x += d);
                        }
                    });
                }
            }
            Op::SliceLast { input, start } => {
                let f = *val(*input).shape().last().unwrap();
                let len = *out.shape().last().unwrap();
                acc(*input, &mut |s| {
                    for (srow, grow) in s.chunks_mut(f).zip(g.chunks(len)) {
                        srow[*start..start + len].iter_mut().zip(grow).for_each(|(x, d)| *x += d);
                    }
                });
            }
            Op::ConcatLast(a, b) => {
                let fa = *val(*a).shape().last().unwrap();
                let fb = *val(*b).shape().last().unwrap();
                acc(*a, &mut |s| {
                    for (srow, grow) in s.chunks_mut(fa).zip(g.chunks(fa + fb)) {
                        srow.iter_mut().zip(&grow[..fa]).for_each(|(x, d)| *x += d);
                    }
                });
                acc(*b, &mut |s| {
                    for (srow, grow) in s.chunks_mut(fb).zip(g.chunks(fa + fb)) {
                        srow.iter_mut().zip(&grow[fa..]).for_each(|(x, d)| *x += d);
                    }
                });
            }
            Op::MeanLast(a) => {
                let l = *val(*a).shape().last().unwrap();
                acc(*a, &mut |s| {
                    for (srow, d) in s.chunks_mut(l).zip(g) {
                        srow.iter_mut().for_each(|x| *x += d / l as f64);
                    }
                });
            }
            Op::WeightedSumAxis1 { weights, states } => {
                let sv = val(*states);
                let wv = val(*weights);
                let (b, t, f) = (sv.shape()[0], sv.shape()[1], sv.shape()[2]);
                acc(*weights, &mut |s| {
                    for bi in 0..b {
                        let gb = &g[bi * f..(bi + 1) * f];
                        for ti in 0..t {
                            let row = &sv.data()[(bi * t + ti) * f..(bi * t + ti + 1) * f];
                            s[bi * t + ti] += row.iter().zip(gb).map(|(x, y)| x * y).sum::<f64>();
                        }
                    }
                });
                acc(*states, &mut |s| {
                    for bi in 0..b {
                        let gb = &g[bi * f..(bi + 1) * f];
                        for ti in 0..t {
                            let w = wv.data()[bi * t + ti];
                            let dst = &mut s[(bi * t + ti) * f..(bi * t + ti + 1) * f];
                            dst.iter_mut().zip(gb).for_each(|(x, d)| *x += w * d);
                        }
                    }
                });
            }
            Op::Bce { pred, target, eps } => {
                let p = val(*pred).data();
                let n = target.len() as f64;
                acc(*pred, &mut |s| {
                    for j in 0..s.len() {
                        let pj = p[j];
                        // clamp has zero slope outside [eps, 1-eps]
                        if pj < *eps || pj > 1.0 - eps {
                            continue;
                        }
                        let y = target[j];
                        s[j] += -g[0] / n * (y / pj - (1.0 - y) / (1.0 - pj));
                    }
                });
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn im2col(x: &[f64], cin: usize, l: usize, k: usize, stride: usize, padding: usize, lout: usize, cols: &mut [f64]) {
    for ci in 0..cin {
        let row = &x[ci * l..(ci + 1) * l];
        for kk in 0..k {
            let dst = &mut cols[(ci * k + kk) * lout..(ci * k + kk + 1) * lout];
            for (o, d) in dst.iter_mut().enumerate() {
                let pos = (o * stride + kk) as isize - padding as isize;
                *d = if pos >= 0 && (pos as usize) < l { row[pos as usize] } else { 0.0 };
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn col2im_add(cols: &[f64], cin: usize, l: usize, k: usize, stride: usize, padding: usize, lout: usize, dx: &mut [f64]) {
    for ci in 0..cin {
        let row = &mut dx[ci * l..(ci + 1) * l];
        for kk in 0..k {
            let src = &cols[(ci * k + kk) * lout..(ci * k + kk + 1) * lout];
            for (o, v) in src.iter().enumerate() {
                let pos = (o * stride + kk) as isize - padding as isize;
                if pos >= 0 && (pos as usize) < l {
                    row[pos as usize] += v;
                }
            }
        }
    }
}
