//! Adam with bias-corrected moment estimates.

use super::{Parameterized, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OptimizerState {
    pub config: AdamConfig,
    step: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl OptimizerState {
    pub fn new(config: AdamConfig, params: &[&Tensor]) -> Self {
        Self {
            config,
            step: 0,
            first: params.iter().map(|p| vec![0.0; p.len()]).collect(),
            second: params.iter().map(|p| vec![0.0; p.len()]).collect(),
        }
    }

    pub fn for_model<M: Parameterized + ?Sized>(config: AdamConfig, model: &M) -> Self {
        let tensors: Vec<&Tensor> = model.named_tensors().into_iter().map(|(_, t)| t).collect();
        Self::new(config, &tensors)
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

/// One Adam update over `params`, reading each tensor's accumulated gradient.
/// A tensor without a gradient is treated as having a zero gradient.
pub fn adam_step(params: &mut [&mut Tensor], state: &mut OptimizerState) -> Result<()> {
    if params.len() != state.first.len() {
        return Err(Error::ShapeMismatch {
            axis: "optimizer parameter count",
            expected: state.first.len(),
            got: params.len(),
        });
    }
    for (p, m) in params.iter().zip(&state.first) {
        if p.len() != m.len() {
            return Err(Error::ShapeMismatch {
                axis: "optimizer accumulator",
                expected: m.len(),
                got: p.len(),
            });
        }
    }
    state.step += 1;
    let AdamConfig {
        learning_rate: lr,
        beta1,
        beta2,
        epsilon,
    } = state.config;
    let t = state.step as i32;
    let c1 = 1.0 - beta1.powi(t);
    let c2 = 1.0 - beta2.powi(t);
    for ((p, m), v) in params.iter_mut().zip(&mut state.first).zip(&mut state.second) {
        let g = p.grad().map_or_else(|| vec![0.0; p.len()], <[f64]>::to_vec);
        for ((x, g), (mi, vi)) in p.data_mut().iter_mut().zip(&g).zip(m.iter_mut().zip(v.iter_mut())) {
            *mi = beta1 * *mi + (1.0 - beta1) * g;
            *vi = beta2 * *vi + (1.0 - beta2) * g * g;
            let mh = *mi / c1;
            let vh = *vi / c2;
            *x -= lr * mh / (vh.sqrt() + epsilon);
        }
    }
    Ok(())
}

impl OptimizerState {
    /// Applies one update to every tensor of `model`, then clears its gradients.
    pub fn step_model<M: Parameterized + ?Sized>(&mut self, model: &mut M) -> Result<()> {
        let mut tensors = model.tensors_mut();
        adam_step(&mut tensors, self)?;
        model.zero_grad();
        Ok(())
    }
}
