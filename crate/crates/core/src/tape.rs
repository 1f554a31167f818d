//! Reverse-mode gradient tape over [`Tensor`] values.
//!
//! A [`Tape`] records every operation of a forward pass as a node; calling
//! [`Tape::backward`] on a scalar loss replays the nodes once in reverse and
//! accumulates gradients for every recorded value. Parameters are ordinary
//! leaves; their gradients are looked up by [`Var`] after the pass.
//!
//! A tape and its vars are confined to one thread; distinct tapes are
//! independent and may run concurrently.

use crate::error::{Error, Result};
use crate::tensor::{self, Tensor};

/// Handle to a value recorded on a [`Tape`]. Only valid for the tape that
/// produced it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

enum Op {
    Leaf,
    Matmul {
        a: Var,
        b: Var,
    },
    Add {
        a: Var,
        b: Var,
    },
    Sub {
        a: Var,
        b: Var,
    },
    Mul {
        a: Var,
        b: Var,
    },
    Div {
        a: Var,
        b: Var,
    },
    Neg {
        x: Var,
    },
    Scale {
        x: Var,
        c: f32,
    },
    Sqrt {
        x: Var,
    },
    Sum {
        x: Var,
    },
    SumSquares {
        x: Var,
    },
    Relu {
        x: Var,
    },
    Conv1d {
        x: Var,
        kernels: Var,
        bias: Var,
    },
    MaxPool1d {
        x: Var,
        /// Flat input index of each window's maximum (lowest index on ties).
        argmax: Vec<usize>,
    },
    GlobalMaxPool {
        x: Var,
        argmax: Vec<usize>,
    },
    BatchNormTrain {
        x: Var,
        gamma: Var,
        beta: Var,
        eps: f32,
        mean: Vec<f32>,
        var: Vec<f32>,
    },
    BatchNormEval {
        x: Var,
        gamma: Var,
        beta: Var,
        eps: f32,
        mean: Vec<f32>,
        var: Vec<f32>,
    },
    ConcatCols {
        xs: Vec<Var>,
    },
    SliceCols {
        x: Var,
        start: usize,
    },
    StackMax {
        xs: Vec<Var>,
        /// Winning input index per coordinate (lowest index on ties).
        argmax: Vec<usize>,
    },
    StackMean {
        xs: Vec<Var>,
    },
}

struct Node {
    value: Tensor,
    op: Op,
}

/// Gradients produced by [`Tape::backward`], keyed by [`Var`].
///
/// A recorded value that does not influence the loss has an exactly-zero
/// gradient.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Tensor>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> &Tensor {
        &self.grads[v.0]
    }
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Value of a recorded var.
    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// Records an input or parameter.
    pub fn leaf(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf)
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    fn binary_same_shape(&mut self, op_name: &'static str, a: Var, b: Var) -> Result<()> {
        let (ta, tb) = (self.value(a), self.value(b));
        if !ta.same_shape(tb) {
            return Err(Error::ShapeMismatch {
                op: op_name,
                lhs: ta.shape().to_vec(),
                rhs: tb.shape().to_vec(),
            });
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary_same_shape("add", a, b)?;
        let data = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(x, y)| x + y)
            .collect();
        let t = Tensor::new(self.value(a).shape().to_vec(), data)?;
        Ok(self.push(t, Op::Add { a, b }))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary_same_shape("sub", a, b)?;
        let data = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(x, y)| x - y)
            .collect();
        let t = Tensor::new(self.value(a).shape().to_vec(), data)?;
        Ok(self.push(t, Op::Sub { a, b }))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary_same_shape("mul", a, b)?;
        let data = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(x, y)| x * y)
            .collect();
        let t = Tensor::new(self.value(a).shape().to_vec(), data)?;
        Ok(self.push(t, Op::Mul { a, b }))
    }

    pub fn div(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary_same_shape("div", a, b)?;
        let data = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(x, y)| x / y)
            .collect();
        let t = Tensor::new(self.value(a).shape().to_vec(), data)?;
        Ok(self.push(t, Op::Div { a, b }))
    }

    pub fn neg(&mut self, x: Var) -> Var {
        let data = self.value(x).data().iter().map(|v| -v).collect();
        let t = Tensor::new(self.value(x).shape().to_vec(), data).expect("same shape");
        self.push(t, Op::Neg { x })
    }

    pub fn scale(&mut self, x: Var, c: f32) -> Var {
        let data = self.value(x).data().iter().map(|v| v * c).collect();
        let t = Tensor::new(self.value(x).shape().to_vec(), data).expect("same shape");
        self.push(t, Op::Scale { x, c })
    }

    /// Elementwise square root. Inputs must be nonnegative.
    pub fn sqrt(&mut self, x: Var) -> Var {
        let data = self.value(x).data().iter().map(|v| v.sqrt()).collect();
        let t = Tensor::new(self.value(x).shape().to_vec(), data).expect("same shape");
        self.push(t, Op::Sqrt { x })
    }

    /// Sum of all elements, as a scalar.
    pub fn sum(&mut self, x: Var) -> Var {
        let s: f32 = self.value(x).data().iter().sum();
        self.push(Tensor::scalar(s), Op::Sum { x })
    }

    /// Sum of squared elements, as a scalar.
    pub fn sum_squares(&mut self, x: Var) -> Var {
        let s: f32 = self.value(x).data().iter().map(|v| v * v).sum();
        self.push(Tensor::scalar(s), Op::SumSquares { x })
    }

    /// Dot product of two same-shape tensors, as a scalar.
    pub fn dot(&mut self, a: Var, b: Var) -> Result<Var> {
        let p = self.mul(a, b)?;
        Ok(self.sum(p))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let data = self.value(x).data().iter().map(|v| v.max(0.0)).collect();
        let t = Tensor::new(self.value(x).shape().to_vec(), data).expect("same shape");
        self.push(t, Op::Relu { x })
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let t = tensor::matmul(self.value(a), self.value(b))?;
        Ok(self.push(t, Op::Matmul { a, b }))
    }

    /// Valid (no padding) 1-D cross-correlation.
    ///
    /// `x` is `[C_in, L]`, `kernels` is `[C_out, C_in, k]`, `bias` is
    /// `[C_out]`; the output is `[C_out, L - k + 1]`.
    pub fn conv1d(&mut self, x: Var, kernels: Var, bias: Var) -> Result<Var> {
        let (xt, kt, bt) = (self.value(x), self.value(kernels), self.value(bias));
        if xt.shape().len() != 2 || kt.shape().len() != 3 {
            return Err(Error::ShapeMismatch {
                op: "conv1d",
                lhs: xt.shape().to_vec(),
                rhs: kt.shape().to_vec(),
            });
        }
        let (c_in, l) = (xt.shape()[0], xt.shape()[1]);
        let (c_out, kc_in, k) = (kt.shape()[0], kt.shape()[1], kt.shape()[2]);
        if kc_in != c_in || bt.len() != c_out {
            return Err(Error::ShapeMismatch {
                op: "conv1d",
                lhs: xt.shape().to_vec(),
                rhs: kt.shape().to_vec(),
            });
        }
        if l < k {
            return Err(Error::SequenceTooShort {
                what: "conv1d input".into(),
                len: l,
                min: k,
            });
        }
        let l_out = l - k + 1;
        let mut out = vec![0.0f32; c_out * l_out];
        for o in 0..c_out {
            let orow = &mut out[o * l_out..(o + 1) * l_out];
            orow.fill(bt.data()[o]);
            for c in 0..c_in {
                let xrow = &xt.data()[c * l..(c + 1) * l];
                let krow = &kt.data()[(o * c_in + c) * k..(o * c_in + c + 1) * k];
                for (j, &kv) in krow.iter().enumerate() {
                    for i in 0..l_out {
                        orow[i] += kv * xrow[i + j];
                    }
                }
            }
        }
        let t = Tensor::new(vec![c_out, l_out], out)?;
        Ok(self.push(t, Op::Conv1d { x, kernels, bias }))
    }

    /// Windowed channelwise maximum over `[C, L]`; trailing positions that do
    /// not fill a window are dropped. Ties go to the lowest index.
    pub fn maxpool1d(&mut self, x: Var, size: usize, stride: usize) -> Result<Var> {
        let xt = self.value(x);
        if xt.shape().len() != 2 || size == 0 || stride == 0 {
            return Err(Error::Contract(format!(
                "maxpool1d: shape {:?}, size {}, stride {}",
                xt.shape(),
                size,
                stride
            )));
        }
        let (c, l) = (xt.shape()[0], xt.shape()[1]);
        if l < size {
            return Err(Error::SequenceTooShort {
                what: "maxpool1d input".into(),
                len: l,
                min: size,
            });
        }
        let w = (l - size) / stride + 1;
        let mut out = vec![0.0f32; c * w];
        let mut argmax = vec![0usize; c * w];
        for ch in 0..c {
            let row = &xt.data()[ch * l..(ch + 1) * l];
            for win in 0..w {
                let start = win * stride;
                let mut best = row[start];
                let mut best_i = start;
                for t in start + 1..start + size {
                    if row[t] > best {
                        best = row[t];
                        best_i = t;
                    }
                }
                out[ch * w + win] = best;
                argmax[ch * w + win] = ch * l + best_i;
            }
        }
        let t = Tensor::new(vec![c, w], out)?;
        Ok(self.push(t, Op::MaxPool1d { x, argmax }))
    }

    /// Per-channel maximum over all positions of `[C, L]`, yielding `[C]`.
    pub fn global_maxpool(&mut self, x: Var) -> Result<Var> {
        let xt = self.value(x);
        if xt.shape().len() != 2 {
            return Err(Error::Contract(format!(
                "global_maxpool: expected rank-2 input, got {:?}",
                xt.shape()
            )));
        }
        let (c, l) = (xt.shape()[0], xt.shape()[1]);
        let mut out = vec![0.0f32; c];
        let mut argmax = vec![0usize; c];
        for ch in 0..c {
            let row = &xt.data()[ch * l..(ch + 1) * l];
            let mut best = row[0];
            let mut best_i = 0usize;
            for (t, &v) in row.iter().enumerate().skip(1) {
                if v > best {
                    best = v;
                    best_i = t;
                }
            }
            out[ch] = best;
            argmax[ch] = ch * l + best_i;
        }
        let t = Tensor::new(vec![c], out)?;
        Ok(self.push(t, Op::GlobalMaxPool { x, argmax }))
    }

    /// Batch normalization over the positions of `[C, N]` using batch
    /// statistics (biased variance). Returns the output together with the
    /// per-channel batch mean and variance so the caller can update running
    /// statistics.
    pub fn batchnorm_train(
        &mut self,
        x: Var,
        gamma: Var,
        beta: Var,
        eps: f32,
    ) -> Result<(Var, Vec<f32>, Vec<f32>)> {
        let (xt, gt, bt) = (self.value(x), self.value(gamma), self.value(beta));
        let (c, n) = (xt.shape()[0], xt.shape()[1]);
        if gt.len() != c || bt.len() != c {
            return Err(Error::ShapeMismatch {
                op: "batchnorm",
                lhs: xt.shape().to_vec(),
                rhs: gt.shape().to_vec(),
            });
        }
        if n < 2 {
            return Err(Error::DegenerateBatch(n));
        }
        let mut mean = vec![0.0f32; c];
        let mut var = vec![0.0f32; c];
        for ch in 0..c {
            let row = &xt.data()[ch * n..(ch + 1) * n];
            let m: f32 = row.iter().sum::<f32>() / n as f32;
            let v: f32 = row.iter().map(|x| (x - m) * (x - m)).sum::<f32>() / n as f32;
            mean[ch] = m;
            var[ch] = v;
        }
        let mut out = vec![0.0f32; c * n];
        for ch in 0..c {
            let inv = 1.0 / (var[ch] + eps).sqrt();
            let (g, b) = (gt.data()[ch], bt.data()[ch]);
            let row = &xt.data()[ch * n..(ch + 1) * n];
            let orow = &mut out[ch * n..(ch + 1) * n];
            for i in 0..n {
                orow[i] = g * (row[i] - mean[ch]) * inv + b;
            }
        }
        let t = Tensor::new(vec![c, n], out)?;
        let v = self.push(
            t,
            Op::BatchNormTrain {
                x,
                gamma,
                beta,
                eps,
                mean: mean.clone(),
                var: var.clone(),
            },
        );
        Ok((v, mean, var))
    }

    /// Batch normalization of `[C, N]` using fixed (running) statistics.
    pub fn batchnorm_eval(
        &mut self,
        x: Var,
        gamma: Var,
        beta: Var,
        running_mean: &[f32],
        running_var: &[f32],
        eps: f32,
    ) -> Result<Var> {
        let (xt, gt, bt) = (self.value(x), self.value(gamma), self.value(beta));
        let (c, n) = (xt.shape()[0], xt.shape()[1]);
        if gt.len() != c || bt.len() != c || running_mean.len() != c || running_var.len() != c {
            return Err(Error::ShapeMismatch {
                op: "batchnorm",
                lhs: xt.shape().to_vec(),
                rhs: gt.shape().to_vec(),
            });
        }
        let mut out = vec![0.0f32; c * n];
        for ch in 0..c {
            let inv = 1.0 / (running_var[ch] + eps).sqrt();
            let (g, b) = (gt.data()[ch], bt.data()[ch]);
            let row = &xt.data()[ch * n..(ch + 1) * n];
            let orow = &mut out[ch * n..(ch + 1) * n];
            for i in 0..n {
                orow[i] = g * (row[i] - running_mean[ch]) * inv + b;
            }
        }
        let t = Tensor::new(vec![c, n], out)?;
        Ok(self.push(
            t,
            Op::BatchNormEval {
                x,
                gamma,
                beta,
                eps,
                mean: running_mean.to_vec(),
                var: running_var.to_vec(),
            },
        ))
    }

    /// Concatenates `[C, L_i]` tensors along positions into `[C, sum L_i]`.
    pub fn concat_cols(&mut self, xs: &[Var]) -> Result<Var> {
        if xs.is_empty() {
            return Err(Error::Contract("concat_cols: empty input list".into()));
        }
        let c = self.value(xs[0]).shape()[0];
        let mut total = 0usize;
        for &v in xs {
            let t = self.value(v);
            if t.shape().len() != 2 || t.shape()[0] != c {
                return Err(Error::ShapeMismatch {
                    op: "concat_cols",
                    lhs: self.value(xs[0]).shape().to_vec(),
                    rhs: t.shape().to_vec(),
                });
            }
            total += t.shape()[1];
        }
        let mut out = vec![0.0f32; c * total];
        let mut offset = 0usize;
        for &v in xs {
            let t = self.value(v);
            let l = t.shape()[1];
            for ch in 0..c {
                out[ch * total + offset..ch * total + offset + l]
                    .copy_from_slice(&t.data()[ch * l..(ch + 1) * l]);
            }
            offset += l;
        }
        let t = Tensor::new(vec![c, total], out)?;
        Ok(self.push(t, Op::ConcatCols { xs: xs.to_vec() }))
    }

    /// Takes columns `[start, start + len)` of a `[C, L]` tensor.
    pub fn slice_cols(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let xt = self.value(x);
        let (c, l) = (xt.shape()[0], xt.shape()[1]);
        if start + len > l || len == 0 {
            return Err(Error::Contract(format!(
                "slice_cols: [{start}, {}) out of range for length {l}",
                start + len
            )));
        }
        let mut out = vec![0.0f32; c * len];
        for ch in 0..c {
            out[ch * len..(ch + 1) * len]
                .copy_from_slice(&xt.data()[ch * l + start..ch * l + start + len]);
        }
        let t = Tensor::new(vec![c, len], out)?;
        Ok(self.push(t, Op::SliceCols { x, start }))
    }

    /// Coordinatewise maximum over equal-length rank-1 vars. Ties go to the
    /// lowest input index.
    pub fn stack_max(&mut self, xs: &[Var]) -> Result<Var> {
        self.check_stack(xs, "stack_max")?;
        let l = self.value(xs[0]).len();
        let mut out = self.value(xs[0]).data().to_vec();
        let mut argmax = vec![0usize; l];
        for (i, &v) in xs.iter().enumerate().skip(1) {
            let row = self.value(v).data();
            for k in 0..l {
                if row[k] > out[k] {
                    out[k] = row[k];
                    argmax[k] = i;
                }
            }
        }
        let t = Tensor::new(vec![l], out)?;
        Ok(self.push(
            t,
            Op::StackMax {
                xs: xs.to_vec(),
                argmax,
            },
        ))
    }

    /// Coordinatewise arithmetic mean over equal-length rank-1 vars; the
    /// divisor is the number of inputs.
    pub fn stack_mean(&mut self, xs: &[Var]) -> Result<Var> {
        self.check_stack(xs, "stack_mean")?;
        let l = self.value(xs[0]).len();
        let mut out = vec![0.0f32; l];
        for &v in xs {
            for (o, x) in out.iter_mut().zip(self.value(v).data()) {
                *o += x;
            }
        }
        let inv = 1.0 / xs.len() as f32;
        for o in &mut out {
            *o *= inv;
        }
        let t = Tensor::new(vec![l], out)?;
        Ok(self.push(t, Op::StackMean { xs: xs.to_vec() }))
    }

    fn check_stack(&self, xs: &[Var], op: &'static str) -> Result<()> {
        if xs.is_empty() {
            return Err(Error::Contract(format!("{op}: empty input list")));
        }
        let shape = self.value(xs[0]).shape();
        if shape.len() != 1 {
            return Err(Error::Contract(format!(
                "{op}: expected rank-1 inputs, got {shape:?}"
            )));
        }
        for &v in xs {
            if self.value(v).shape() != shape {
                return Err(Error::ShapeMismatch {
                    op,
                    lhs: shape.to_vec(),
                    rhs: self.value(v).shape().to_vec(),
                });
            }
        }
        Ok(())
    }

    /// Backpropagates from a scalar loss through every recorded node once,
    /// in reverse recording order.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if loss.0 >= self.nodes.len() {
            return Err(Error::Contract("backward: var not on this tape".into()));
        }
        if !self.nodes[loss.0].value.is_scalar() {
            return Err(Error::Contract(format!(
                "backward: loss must be scalar, got shape {:?}",
                self.nodes[loss.0].value.shape()
            )));
        }
        let mut grads: Vec<Vec<f32>> = self
            .nodes
            .iter()
            .map(|n| vec![0.0f32; n.value.len()])
            .collect();
        grads[loss.0][0] = 1.0;

        for idx in (0..=loss.0).rev() {
            let g = std::mem::take(&mut grads[idx]);
            self.backprop_node(idx, &g, &mut grads);
            grads[idx] = g;
        }

        let grads = grads
            .into_iter()
            .enumerate()
            .map(|(i, g)| {
                Tensor::new(self.nodes[i].value.shape().to_vec(), g).expect("grad shape")
            })
            .collect();
        Ok(Gradients { grads })
    }

    fn backprop_node(&self, idx: usize, g: &[f32], grads: &mut [Vec<f32>]) {
        let node = &self.nodes[idx];
        match &node.op {
            Op::Leaf => {}
            Op::Add { a, b } => {
                accumulate(&mut grads[a.0], g, 1.0);
                accumulate(&mut grads[b.0], g, 1.0);
            }
            Op::Sub { a, b } => {
                accumulate(&mut grads[a.0], g, 1.0);
                accumulate(&mut grads[b.0], g, -1.0);
            }
            Op::Mul { a, b } => {
                let (av, bv) = (self.value(*a).data(), self.value(*b).data());
                for i in 0..g.len() {
                    grads[a.0][i] += g[i] * bv[i];
                }
                for i in 0..g.len() {
                    grads[b.0][i] += g[i] * av[i];
                }
            }
            Op::Div { a, b } => {
                let (av, bv) = (self.value(*a).data(), self.value(*b).data());
                for i in 0..g.len() {
                    grads[a.0][i] += g[i] / bv[i];
                }
                for i in 0..g.len() {
                    grads[b.0][i] -= g[i] * av[i] / (bv[i] * bv[i]);
                }
            }
            Op::Neg { x } => accumulate(&mut grads[x.0], g, -1.0),
            Op::Scale { x, c } => accumulate(&mut grads[x.0], g, *c),
            Op::Sqrt { x } => {
                let out = node.value.data();
                for i in 0..g.len() {
                    grads[x.0][i] += g[i] / (2.0 * out[i]);
                }
            }
            Op::Sum { x } => {
                let gx = &mut grads[x.0];
                for v in gx.iter_mut() {
                    *v += g[0];
                }
            }
            Op::SumSquares { x } => {
                let xv = self.value(*x).data();
                let gx = &mut grads[x.0];
                for i in 0..gx.len() {
                    gx[i] += 2.0 * g[0] * xv[i];
                }
            }
            Op::Relu { x } => {
                let xv = self.value(*x).data();
                let gx = &mut grads[x.0];
                for i in 0..g.len() {
                    if xv[i] > 0.0 {
                        gx[i] += g[i];
                    }
                }
            }
            Op::Matmul { a, b } => {
                let (at, bt) = (self.value(*a), self.value(*b));
                let (m, k, n) = (at.rows(), at.cols(), bt.cols());
                // dA = G * B^T
                for i in 0..m {
                    for p in 0..k {
                        let mut s = 0.0f32;
                        for j in 0..n {
                            s += g[i * n + j] * bt.data()[p * n + j];
                        }
                        grads[a.0][i * k + p] += s;
                    }
                }
                // dB = A^T * G
                for p in 0..k {
                    for j in 0..n {
                        let mut s = 0.0f32;
                        for i in 0..m {
                            s += at.data()[i * k + p] * g[i * n + j];
                        }
                        grads[b.0][p * n + j] += s;
                    }
                }
            }
            Op::Conv1d { x, kernels, bias } => {
                let (xt, kt) = (self.value(*x), self.value(*kernels));
                let (c_in, l) = (xt.shape()[0], xt.shape()[1]);
                let (c_out, _, k) = (kt.shape()[0], kt.shape()[1], kt.shape()[2]);
                let l_out = l - k + 1;
                for o in 0..c_out {
                    let grow = &g[o * l_out..(o + 1) * l_out];
                    grads[bias.0][o] += grow.iter().sum::<f32>();
                    for c in 0..c_in {
                        let xrow = &xt.data()[c * l..(c + 1) * l];
                        let kbase = (o * c_in + c) * k;
                        for j in 0..k {
                            let mut s = 0.0f32;
                            for i in 0..l_out {
                                s += grow[i] * xrow[i + j];
                            }
                            grads[kernels.0][kbase + j] += s;
                        }
                    }
                }
                for o in 0..c_out {
                    let grow = &g[o * l_out..(o + 1) * l_out];
                    for c in 0..c_in {
                        let kbase = (o * c_in + c) * k;
                        let xg = &mut grads[x.0][c * l..(c + 1) * l];
                        for j in 0..k {
                            let kv = kt.data()[kbase + j];
                            for i in 0..l_out {
                                xg[i + j] += grow[i] * kv;
                            }
                        }
                    }
                }
            }
            Op::MaxPool1d { x, argmax } | Op::GlobalMaxPool { x, argmax } => {
                let gx = &mut grads[x.0];
                for (out_i, &in_i) in argmax.iter().enumerate() {
                    gx[in_i] += g[out_i];
                }
            }
            Op::BatchNormTrain {
                x,
                gamma,
                beta,
                eps,
                mean,
                var,
            } => {
                let xt = self.value(*x);
                let gt = self.value(*gamma);
                let (c, n) = (xt.shape()[0], xt.shape()[1]);
                let nf = n as f32;
                for ch in 0..c {
                    let inv = 1.0 / (var[ch] + eps).sqrt();
                    let row = &xt.data()[ch * n..(ch + 1) * n];
                    let grow = &g[ch * n..(ch + 1) * n];
                    let gm = gt.data()[ch];
                    // dxhat_i = g_i * gamma; accumulate the two reductions.
                    let mut s1 = 0.0f32; // sum dxhat
                    let mut s2 = 0.0f32; // sum dxhat * xhat
                    let mut dgamma = 0.0f32;
                    let mut dbeta = 0.0f32;
                    for i in 0..n {
                        let xhat = (row[i] - mean[ch]) * inv;
                        let dxhat = grow[i] * gm;
                        s1 += dxhat;
                        s2 += dxhat * xhat;
                        dgamma += grow[i] * xhat;
                        dbeta += grow[i];
                    }
                    grads[gamma.0][ch] += dgamma;
                    grads[beta.0][ch] += dbeta;
                    let gx = &mut grads[x.0][ch * n..(ch + 1) * n];
                    for i in 0..n {
                        let xhat = (row[i] - mean[ch]) * inv;
                        let dxhat = grow[i] * gm;
                        gx[i] += inv * (dxhat - s1 / nf - xhat * s2 / nf);
                    }
                }
            }
            Op::BatchNormEval {
                x,
                gamma,
                beta,
                eps,
                mean,
                var,
            } => {
                let xt = self.value(*x);
                let gt = self.value(*gamma);
                let (c, n) = (xt.shape()[0], xt.shape()[1]);
                for ch in 0..c {
                    let inv = 1.0 / (var[ch] + eps).sqrt();
                    let row = &xt.data()[ch * n..(ch + 1) * n];
                    let grow = &g[ch * n..(ch + 1) * n];
                    let gm = gt.data()[ch];
                    let mut dgamma = 0.0f32;
                    let mut dbeta = 0.0f32;
                    for i in 0..n {
                        dgamma += grow[i] * (row[i] - mean[ch]) * inv;
                        dbeta += grow[i];
                    }
                    grads[gamma.0][ch] += dgamma;
                    grads[beta.0][ch] += dbeta;
                    let gx = &mut grads[x.0][ch * n..(ch + 1) * n];
                    for i in 0..n {
                        gx[i] += grow[i] * gm * inv;
                    }
                }
            }
            Op::ConcatCols { xs } => {
                let c = node.value.shape()[0];
                let total = node.value.shape()[1];
                let mut offset = 0usize;
                for &v in xs {
                    let l = self.value(v).shape()[1];
                    let gx = &mut grads[v.0];
                    for ch in 0..c {
                        for i in 0..l {
                            gx[ch * l + i] += g[ch * total + offset + i];
                        }
                    }
                    offset += l;
                }
            }
            Op::SliceCols { x, start } => {
                let l = self.value(*x).shape()[1];
                let (c, len) = (node.value.shape()[0], node.value.shape()[1]);
                let gx = &mut grads[x.0];
                for ch in 0..c {
                    for i in 0..len {
                        gx[ch * l + start + i] += g[ch * len + i];
                    }
                }
            }
            Op::StackMax { xs, argmax } => {
                for (k, &winner) in argmax.iter().enumerate() {
                    grads[xs[winner].0][k] += g[k];
                }
            }
            Op::StackMean { xs } => {
                let inv = 1.0 / xs.len() as f32;
                for &v in xs {
                    let gx = &mut grads[v.0];
                    for (i, gv) in g.iter().enumerate() {
                        gx[i] += gv * inv;
                    }
                }
            }
        }
    }
}

fn accumulate(dst: &mut [f32], src: &[f32], scale: f32) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s * scale;
    }
}
