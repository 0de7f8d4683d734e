//! Trainable layer parameters and their binding onto a tape.

use rand::Rng;
use rand_distr::{Distribution, Uniform};

use super::{Checkpoint, Tape, Tensor, Var};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerKind {
    Conv2d,
    Conv1d,
    Linear,
}

impl LayerKind {
    pub fn name(self) -> &'static str {
        match self {
            LayerKind::Conv2d => "conv2d",
            LayerKind::Conv1d => "conv1d",
            LayerKind::Linear => "linear",
        }
    }
}

/// Weights and bias of one layer. Padding is always "same".
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub kind: LayerKind,
    pub weight: Tensor,
    pub bias: Tensor,
    pub stride: usize,
}

fn he_uniform<R: Rng + ?Sized>(shape: Vec<usize>, fan_in: usize, rng: &mut R) -> Tensor {
    let bound = (6.0 / fan_in as f64).sqrt();
    let dist = Uniform::new_inclusive(-bound, bound);
    let n: usize = shape.iter().product();
    let data = (0..n).map(|_| dist.sample(rng)).collect();
    Tensor::new(shape, data).expect("positive dims")
}

impl LayerParams {
    pub fn conv2d<R: Rng + ?Sized>(
        kh: usize,
        kw: usize,
        c_in: usize,
        c_out: usize,
        stride: usize,
        rng: &mut R,
    ) -> Self {
        Self {
            kind: LayerKind::Conv2d,
            weight: he_uniform(vec![kh, kw, c_in, c_out], kh * kw * c_in, rng),
            bias: Tensor::zeros(vec![c_out]),
            stride,
        }
    }

    pub fn conv1d<R: Rng + ?Sized>(kw: usize, c_in: usize, c_out: usize, stride: usize, rng: &mut R) -> Self {
        Self {
            kind: LayerKind::Conv1d,
            weight: he_uniform(vec![kw, c_in, c_out], kw * c_in, rng),
            bias: Tensor::zeros(vec![c_out]),
            stride,
        }
    }

    pub fn linear<R: Rng + ?Sized>(n_in: usize, n_out: usize, rng: &mut R) -> Self {
        Self {
            kind: LayerKind::Linear,
            weight: he_uniform(vec![n_in, n_out], n_in, rng),
            bias: Tensor::zeros(vec![n_out]),
            stride: 1,
        }
    }

    /// Builds a layer from explicit tensors, checking the shape invariants.
    pub fn from_parts(kind: LayerKind, weight: Tensor, bias: Tensor, stride: usize) -> Result<Self> {
        let layer = Self {
            kind,
            weight,
            bias,
            stride,
        };
        layer.validate()?;
        Ok(layer)
    }

    pub fn validate(&self) -> Result<()> {
        let rank = match self.kind {
            LayerKind::Conv2d => 4,
            LayerKind::Conv1d => 3,
            LayerKind::Linear => 2,
        };
        self.weight.expect_rank(rank)?;
        if self.bias.len() != self.out_channels() {
            return Err(Error::ShapeMismatch {
                axis: "bias length",
                expected: self.out_channels(),
                got: self.bias.len(),
            });
        }
        if self.stride == 0 {
            return Err(Error::Invalid("stride must be positive".into()));
        }
        Ok(())
    }

    pub fn in_channels(&self) -> usize {
        let s = self.weight.shape();
        s[s.len() - 2]
    }

    pub fn out_channels(&self) -> usize {
        *self.weight.shape().last().expect("non-empty shape")
    }

    pub fn param_count(&self) -> usize {
        self.weight.len() + self.bias.len()
    }

    pub fn zero_grad(&mut self) {
        self.weight.zero_grad();
        self.bias.zero_grad();
    }

    pub fn bind(&self, tape: &mut Tape) -> BoundLayer {
        BoundLayer {
            kind: self.kind,
            stride: self.stride,
            weight: tape.leaf(self.weight.clone()),
            bias: tape.leaf(self.bias.clone()),
        }
    }
}

/// A layer whose parameters live on a tape as differentiable leaves.
#[derive(Debug, Clone, Copy)]
pub struct BoundLayer {
    pub kind: LayerKind,
    pub stride: usize,
    pub weight: Var,
    pub bias: Var,
}

impl BoundLayer {
    pub fn forward(&self, tape: &mut Tape, x: Var) -> Result<Var> {
        match self.kind {
            LayerKind::Conv2d => tape.conv2d(x, self.weight, self.bias, self.stride),
            LayerKind::Conv1d => tape.conv1d(x, self.weight, self.bias, self.stride),
            LayerKind::Linear => tape.linear(x, self.weight, self.bias),
        }
    }
}

/// A model made of named layers, in a fixed order.
pub trait Parameterized {
    fn layers(&self) -> Vec<(String, &LayerParams)>;
    fn layers_mut(&mut self) -> Vec<&mut LayerParams>;

    fn param_count(&self) -> usize {
        self.layers().iter().map(|(_, l)| l.param_count()).sum()
    }

    fn zero_grad(&mut self) {
        self.layers_mut().into_iter().for_each(LayerParams::zero_grad);
    }

    fn bind(&self, tape: &mut Tape) -> Vec<BoundLayer> {
        self.layers().into_iter().map(|(_, l)| l.bind(tape)).collect()
    }

    /// Flattens the tape gradients of `bound` in layer order (weight, then bias).
    /// Parameters the loss did not reach contribute zeros.
    fn collect_grads(&self, tape: &Tape, bound: &[BoundLayer]) -> Vec<f64> {
        let mut flat = Vec::with_capacity(self.param_count());
        for ((_, layer), b) in self.layers().into_iter().zip(bound) {
            for (var, n) in [(b.weight, layer.weight.len()), (b.bias, layer.bias.len())] {
                match tape.grad(var) {
                    Some(g) => flat.extend_from_slice(g),
                    None => flat.extend(std::iter::repeat(0.0).take(n)),
                }
            }
        }
        flat
    }

    /// Adds a flat gradient (as produced by `collect_grads`) into the parameters' grad buffers.
    fn accumulate_grads(&mut self, flat: &[f64]) -> Result<()> {
        let expected = self.param_count();
        if flat.len() != expected {
            return Err(Error::ShapeMismatch {
                axis: "flat gradient",
                expected,
                got: flat.len(),
            });
        }
        let mut offset = 0;
        for layer in self.layers_mut() {
            for t in [&mut layer.weight, &mut layer.bias] {
                let n = t.len();
                t.accumulate_grad(&flat[offset..offset + n])?;
                offset += n;
            }
        }
        Ok(())
    }

    /// Every parameter tensor in layer order, with its checkpoint name.
    fn named_tensors(&self) -> Vec<(String, &Tensor)> {
        self.layers()
            .into_iter()
            .flat_map(|(name, l)| {
                [
                    (format!("{name}.weight"), &l.weight),
                    (format!("{name}.bias"), &l.bias),
                ]
            })
            .collect()
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        self.layers_mut()
            .into_iter()
            .flat_map(|l| [&mut l.weight, &mut l.bias])
            .collect()
    }

    fn to_checkpoint(&self, kind: &str, common_length: usize) -> Checkpoint {
        Checkpoint {
            kind: kind.to_string(),
            common_length,
            params: self
                .named_tensors()
                .into_iter()
                .map(|(n, t)| {
                    let mut t = t.clone();
                    t.zero_grad();
                    (n, t)
                })
                .collect(),
        }
    }

    /// Overwrites parameter values from a checkpoint; names and shapes must match exactly.
    fn load_params(&mut self, ckpt: &Checkpoint) -> Result<()> {
        let names: Vec<String> = self.named_tensors().into_iter().map(|(n, _)| n).collect();
        if names.len() != ckpt.params.len() {
            return Err(Error::Checkpoint(format!(
                "expected {} tensors, found {}",
                names.len(),
                ckpt.params.len()
            )));
        }
        for ((name, dst), (cname, src)) in names.iter().zip(self.tensors_mut()).zip(&ckpt.params) {
            if name != cname || dst.shape() != src.shape() {
                return Err(Error::Checkpoint(format!(
                    "tensor {cname} {:?} does not match model tensor {name} {:?}",
                    src.shape(),
                    dst.shape()
                )));
            }
            dst.data_mut().copy_from_slice(src.data());
            dst.zero_grad();
        }
        Ok(())
    }
}
