//! Reverse-mode differentiation over a flat list of recorded operations.

use super::kernels::{self, ConvGeom};
use super::Tensor;
use crate::error::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Conv {
        x: Var,
        w: Var,
        b: Var,
        geom: ConvGeom,
    },
    Linear {
        x: Var,
        w: Var,
        b: Var,
    },
    Relu(Var),
    Add(Var, Var),
    Sub(Var, Var),
    Scale(Var, f64),
    Sum(Var),
    Flatten(Var),
    /// Mean over every axis but the last (channels).
    GlobalAvgPool(Var),
    L2Norm(Var),
    Stack(Vec<Var>),
    /// Batch mean of `-ln sigmoid(pos - neg)`.
    Bpr {
        pos: Var,
        neg: Var,
    },
}

#[derive(Debug, Clone)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Records a forward computation so it can be differentiated.
///
/// `backward` may run once; a second call is rejected until `zero_grad`
/// clears the gradient buffers.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    grads: Vec<Option<Vec<f64>>>,
    backward_done: bool,
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

    /// Drops every node recorded after the first `len`, and all gradients.
    /// Lets one tape keep bound parameters while scoring many pairs.
    pub fn truncate(&mut self, len: usize) {
        self.nodes.truncate(len);
        self.zero_grad();
    }

    pub fn zero_grad(&mut self) {
        self.grads.clear();
        self.backward_done = false;
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn grad(&self, v: Var) -> Option<&[f64]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }

    /// A differentiable input (model parameter).
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// A non-differentiable input.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, false)
    }

    fn push(&mut self, mut value: Tensor, op: Op, requires_grad: bool) -> Var {
        value.grad = None;
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    /// "Same"-padded 2D convolution of `x: [h, w, c_in]` by `w: [kh, kw, c_in, c_out]`.
    pub fn conv2d(&mut self, x: Var, w: Var, b: Var, stride: usize) -> Result<Var> {
        let xs = self.value(x).shape().to_vec();
        let ws = self.value(w).shape().to_vec();
        self.value(x).expect_rank(3)?;
        self.value(w).expect_rank(4)?;
        check_axis("input channels", ws[2], xs[2])?;
        check_axis("bias length", ws[3], self.value(b).len())?;
        check_stride(stride)?;
        let geom = ConvGeom::new(xs[0], xs[1], xs[2], ws[0], ws[1], ws[3], stride, stride);
        self.conv(x, w, b, geom, vec![geom.oh, geom.ow, geom.c_out])
    }

    /// "Same"-padded 1D convolution of `x: [t, c_in]` by `w: [kw, c_in, c_out]`.
    pub fn conv1d(&mut self, x: Var, w: Var, b: Var, stride: usize) -> Result<Var> {
        let xs = self.value(x).shape().to_vec();
        let ws = self.value(w).shape().to_vec();
        self.value(x).expect_rank(2)?;
        self.value(w).expect_rank(3)?;
        check_axis("input channels", ws[1], xs[1])?;
        check_axis("bias length", ws[2], self.value(b).len())?;
        check_stride(stride)?;
        let geom = ConvGeom::new(1, xs[0], xs[1], 1, ws[0], ws[2], 1, stride);
        self.conv(x, w, b, geom, vec![geom.ow, geom.c_out])
    }

    fn conv(&mut self, x: Var, w: Var, b: Var, geom: ConvGeom, shape: Vec<usize>) -> Result<Var> {
        let out = kernels::conv_forward(
            &geom,
            self.value(x).data(),
            self.value(w).data(),
            self.value(b).data(),
        );
        let rg = self.needs(&[x, w, b]);
        Ok(self.push(Tensor::new(shape, out)?, Op::Conv { x, w, b, geom }, rg))
    }

    /// `W^T x + b` for `x: [n_in]`, `w: [n_in, n_out]`.
    pub fn linear(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let ws = self.value(w).shape().to_vec();
        self.value(w).expect_rank(2)?;
        check_axis("linear input", ws[0], self.value(x).len())?;
        check_axis("bias length", ws[1], self.value(b).len())?;
        let (n_in, n_out) = (ws[0], ws[1]);
        let xd = self.value(x).data();
        let wd = self.value(w).data();
        let mut out = self.value(b).data().to_vec();
        for i in 0..n_in {
            let xi = xd[i];
            for (o, &wv) in out.iter_mut().zip(&wd[i * n_out..][..n_out]) {
                *o += xi * wv;
            }
        }
        let rg = self.needs(&[x, w, b]);
        Ok(self.push(Tensor::new(vec![n_out], out)?, Op::Linear { x, w, b }, rg))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let t = self.value(x);
        let data = t.data().iter().map(|&v| if v > 0.0 { v } else { 0.0 }).collect();
        let out = Tensor::new(t.shape().to_vec(), data).expect("same shape");
        let rg = self.needs(&[x]);
        self.push(out, Op::Relu(x), rg)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.zip(a, b, |x, y| x + y)?;
        let rg = self.needs(&[a, b]);
        Ok(self.push(out, Op::Add(a, b), rg))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.zip(a, b, |x, y| x - y)?;
        let rg = self.needs(&[a, b]);
        Ok(self.push(out, Op::Sub(a, b), rg))
    }

    fn zip(&self, a: Var, b: Var, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(Error::Invalid(format!(
                "elementwise operands differ in shape: {:?} vs {:?}",
                ta.shape(),
                tb.shape()
            )));
        }
        let data = ta.data().iter().zip(tb.data()).map(|(&x, &y)| f(x, y)).collect();
        Tensor::new(ta.shape().to_vec(), data)
    }

    pub fn scale(&mut self, x: Var, factor: f64) -> Var {
        let t = self.value(x);
        let data = t.data().iter().map(|v| v * factor).collect();
        let out = Tensor::new(t.shape().to_vec(), data).expect("same shape");
        let rg = self.needs(&[x]);
        self.push(out, Op::Scale(x, factor), rg)
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).data().iter().sum();
        let rg = self.needs(&[x]);
        self.push(Tensor::scalar(s), Op::Sum(x), rg)
    }

    /// Views `x` as a rank-1 tensor.
    pub fn flatten(&mut self, x: Var) -> Var {
        let t = self.value(x);
        let out = Tensor::vector(t.data().to_vec());
        let rg = self.needs(&[x]);
        self.push(out, Op::Flatten(x), rg)
    }

    /// Averages over every axis except the trailing channel axis.
    pub fn global_avg_pool(&mut self, x: Var) -> Result<Var> {
        let t = self.value(x);
        if t.rank() < 2 {
            return Err(Error::Rank {
                expected: 2,
                got: t.shape().to_vec(),
            });
        }
        let c = *t.shape().last().expect("rank >= 2");
        let positions = t.len() / c;
        let mut out = vec![0.0; c];
        for chunk in t.data().chunks_exact(c) {
            for (o, v) in out.iter_mut().zip(chunk) {
                *o += v;
            }
        }
        let inv = 1.0 / positions as f64;
        out.iter_mut().for_each(|o| *o *= inv);
        let rg = self.needs(&[x]);
        Ok(self.push(Tensor::new(vec![c], out)?, Op::GlobalAvgPool(x), rg))
    }

    /// Euclidean norm of all entries; the gradient at the origin is taken as zero.
    pub fn l2_norm(&mut self, x: Var) -> Var {
        let n = self.value(x).data().iter().map(|v| v * v).sum::<f64>().sqrt();
        let rg = self.needs(&[x]);
        self.push(Tensor::scalar(n), Op::L2Norm(x), rg)
    }

    /// Collects one-element values into a vector.
    pub fn stack(&mut self, items: &[Var]) -> Result<Var> {
        if items.is_empty() {
            return Err(Error::Empty("stack"));
        }
        let mut data = Vec::with_capacity(items.len());
        for &v in items {
            data.push(self.value(v).item().ok_or_else(|| {
                Error::Invalid(format!("stack expects scalars, got {:?}", self.value(v).shape()))
            })?);
        }
        let rg = self.needs(items);
        Ok(self.push(Tensor::vector(data), Op::Stack(items.to_vec()), rg))
    }

    /// Mean over the batch of `-ln sigmoid(pos[i] - neg[i])`.
    pub fn bpr_loss(&mut self, pos: Var, neg: Var) -> Result<Var> {
        let (p, n) = (self.value(pos), self.value(neg));
        check_axis("negative scores", p.len(), n.len())?;
        let m = p.len() as f64;
        let loss = p
            .data()
            .iter()
            .zip(n.data())
            .map(|(a, b)| softplus(b - a))
            .sum::<f64>()
            / m;
        let rg = self.needs(&[pos, neg]);
        Ok(self.push(Tensor::scalar(loss), Op::Bpr { pos, neg }, rg))
    }

    /// Propagates d(loss)/d(node) to every node that requires a gradient.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.backward_done {
            return Err(Error::BackwardTwice);
        }
        let lt = self.value(loss);
        if lt.len() != 1 {
            return Err(Error::NonScalarLoss(lt.shape().to_vec()));
        }
        self.backward_done = true;
        self.grads = vec![None; self.nodes.len()];
        self.grads[loss.0] = Some(vec![1.0]);

        for i in (0..=loss.0).rev() {
            if !self.nodes[i].requires_grad {
                continue;
            }
            let Some(g) = self.grads[i].take() else {
                continue;
            };
            self.propagate(i, &g);
            self.grads[i] = Some(g);
        }
        Ok(())
    }

    fn grad_slot(&mut self, v: Var) -> Option<&mut Vec<f64>> {
        if !self.nodes[v.0].requires_grad {
            return None;
        }
        let n = self.nodes[v.0].value.len();
        Some(self.grads[v.0].get_or_insert_with(|| vec![0.0; n]))
    }

    fn propagate(&mut self, i: usize, g: &[f64]) {
        let op = self.nodes[i].op.clone();
        match op {
            Op::Leaf => {}
            Op::Conv { x, w, b, geom } => {
                let mut gw = self.grads[w.0].take().unwrap_or_else(|| vec![0.0; self.value(w).len()]);
                let mut gb = self.grads[b.0].take().unwrap_or_else(|| vec![0.0; self.value(b).len()]);
                let mut gx = self.nodes[x.0]
                    .requires_grad
                    .then(|| self.grads[x.0].take().unwrap_or_else(|| vec![0.0; self.value(x).len()]));
                kernels::conv_backward(
                    &geom,
                    self.value(x).data(),
                    self.value(w).data(),
                    g,
                    gx.as_deref_mut(),
                    &mut gw,
                    &mut gb,
                );
                self.grads[w.0] = Some(gw);
                self.grads[b.0] = Some(gb);
                if gx.is_some() {
                    self.grads[x.0] = gx;
                }
            }
            Op::Linear { x, w, b } => {
                let xd = self.value(x).data().to_vec();
                let wd = self.value(w).data().to_vec();
                let n_out = g.len();
                if let Some(gb) = self.grad_slot(b) {
                    for (a, d) in gb.iter_mut().zip(g) {
                        *a += d;
                    }
                }
                if let Some(gw) = self.grad_slot(w) {
                    for (i, &xi) in xd.iter().enumerate() {
                        for (a, d) in gw[i * n_out..][..n_out].iter_mut().zip(g) {
                            *a += xi * d;
                        }
                    }
                }
                if let Some(gx) = self.grad_slot(x) {
                    for (i, a) in gx.iter_mut().enumerate() {
                        *a += wd[i * n_out..][..n_out].iter().zip(g).map(|(w, d)| w * d).sum::<f64>();
                    }
                }
            }
            Op::Relu(x) => {
                let mask: Vec<bool> = self.value(x).data().iter().map(|&v| v > 0.0).collect();
                if let Some(gx) = self.grad_slot(x) {
                    for ((a, d), m) in gx.iter_mut().zip(g).zip(mask) {
                        if m {
                            *a += d;
                        }
                    }
                }
            }
            Op::Add(a, b) => {
                self.accumulate(a, g, 1.0);
                self.accumulate(b, g, 1.0);
            }
            Op::Sub(a, b) => {
                self.accumulate(a, g, 1.0);
                self.accumulate(b, g, -1.0);
            }
            Op::Scale(x, f) => self.accumulate(x, g, f),
            Op::Flatten(x) => self.accumulate(x, g, 1.0),
            Op::Sum(x) => {
                let d = g[0];
                if let Some(gx) = self.grad_slot(x) {
                    gx.iter_mut().for_each(|a| *a += d);
                }
            }
            Op::GlobalAvgPool(x) => {
                let c = g.len();
                let positions = self.value(x).len() / c;
                let inv = 1.0 / positions as f64;
                if let Some(gx) = self.grad_slot(x) {
                    for chunk in gx.chunks_exact_mut(c) {
                        for (a, d) in chunk.iter_mut().zip(g) {
                            *a += d * inv;
                        }
                    }
                }
            }
            Op::L2Norm(x) => {
                let norm = self.nodes[i].value.data()[0];
                let xd = self.value(x).data().to_vec();
                let d = if norm > 0.0 { g[0] / norm } else { 0.0 };
                if let Some(gx) = self.grad_slot(x) {
                    for (a, v) in gx.iter_mut().zip(xd) {
                        *a += v * d;
                    }
                }
            }
            Op::Stack(items) => {
                for (k, v) in items.into_iter().enumerate() {
                    if let Some(gv) = self.grad_slot(v) {
                        gv[0] += g[k];
                    }
                }
            }
            Op::Bpr { pos, neg } => {
                let p = self.value(pos).data().to_vec();
                let n = self.value(neg).data().to_vec();
                let scale = g[0] / p.len() as f64;
                // d/dp softplus(n - p) = -sigmoid(n - p)
                let dpos: Vec<f64> = p.iter().zip(&n).map(|(a, b)| -sigmoid(b - a) * scale).collect();
                if let Some(gp) = self.grad_slot(pos) {
                    for (a, d) in gp.iter_mut().zip(&dpos) {
                        *a += d;
                    }
                }
                if let Some(gn) = self.grad_slot(neg) {
                    for (a, d) in gn.iter_mut().zip(&dpos) {
                        *a -= d;
                    }
                }
            }
        }
    }

    fn accumulate(&mut self, v: Var, g: &[f64], factor: f64) {
        if let Some(gv) = self.grad_slot(v) {
            for (a, d) in gv.iter_mut().zip(g) {
                *a += factor * d;
            }
        }
    }
}

fn check_axis(axis: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::ShapeMismatch { axis, expected, got });
    }
    Ok(())
}

fn check_stride(stride: usize) -> Result<()> {
    if stride == 0 {
        return Err(Error::Invalid("stride must be positive".into()));
    }
    Ok(())
}

/// `ln(1 + e^x)` without overflow.
pub(crate) fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
