//! Gradient-free forms of the layer operations, for inference and checks.

use super::{LayerKind, LayerParams, Tape, Tensor};
use crate::error::{Error, Result};

fn expect_kind(params: &LayerParams, kind: LayerKind) -> Result<()> {
    if params.kind != kind {
        return Err(Error::LayerKind {
            expected: kind.name(),
            got: params.kind.name(),
        });
    }
    Ok(())
}

fn apply(input: &Tensor, params: &LayerParams) -> Result<Tensor> {
    let mut tape = Tape::new();
    let x = tape.constant(input.clone());
    let w = tape.constant(params.weight.clone());
    let b = tape.constant(params.bias.clone());
    let y = match params.kind {
        LayerKind::Conv2d => tape.conv2d(x, w, b, params.stride)?,
        LayerKind::Conv1d => tape.conv1d(x, w, b, params.stride)?,
        LayerKind::Linear => tape.linear(x, w, b)?,
    };
    Ok(tape.value(y).clone())
}

/// `[h, w, c_in]` to `[ceil(h/s), ceil(w/s), c_out]`.
pub fn conv2d(input: &Tensor, params: &LayerParams) -> Result<Tensor> {
    expect_kind(params, LayerKind::Conv2d)?;
    apply(input, params)
}

/// `[t, c_in]` to `[ceil(t/s), c_out]`.
pub fn conv1d(input: &Tensor, params: &LayerParams) -> Result<Tensor> {
    expect_kind(params, LayerKind::Conv1d)?;
    apply(input, params)
}

pub fn linear(input: &Tensor, params: &LayerParams) -> Result<Tensor> {
    expect_kind(params, LayerKind::Linear)?;
    apply(input, params)
}

pub fn relu(input: &Tensor) -> Tensor {
    let data = input.data().iter().map(|&v| v.max(0.0)).collect();
    Tensor::new(input.shape().to_vec(), data).expect("same shape")
}

/// `[h, w, c]` to `[c]`, averaging each channel.
pub fn global_avg_pool2d(input: &Tensor) -> Result<Tensor> {
    input.expect_rank(3)?;
    let mut tape = Tape::new();
    let x = tape.constant(input.clone());
    let y = tape.global_avg_pool(x)?;
    Ok(tape.value(y).clone())
}
