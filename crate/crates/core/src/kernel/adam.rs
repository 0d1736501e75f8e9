use serde::{Deserialize, Serialize};

use super::{KernelError, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 0.001, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// A learnable tensor together with its Adam moments.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamState {
    pub name: String,
    pub value: Tensor,
    pub adam_m: Tensor,
    pub adam_v: Tensor,
    pub step: u64,
}

impl ParamState {
    pub fn new(name: impl Into<String>, value: Tensor) -> Self {
        let shape = value.shape().to_vec();
        Self {
            name: name.into(),
            adam_m: Tensor::zeros(shape.clone()),
            adam_v: Tensor::zeros(shape),
            value,
            step: 0,
        }
    }
}

/// Applies one bias-corrected Adam update to every parameter.
pub fn adam_step(params: &mut [ParamState], grads: &[Tensor], hyper: &AdamConfig) -> Result<(), KernelError> {
    if params.len() != grads.len() {
        return Err(KernelError::Shape(format!(
            "adam_step: {} params but {} gradients",
            params.len(),
            grads.len()
        )));
    }
    for (p, g) in params.iter().zip(grads) {
        if p.value.shape() != g.shape() {
            return Err(KernelError::Shape(format!(
                "adam_step: gradient {:?} for parameter {} of {:?}",
                g.shape(),
                p.name,
                p.value.shape()
            )));
        }
    }
    for (p, g) in params.iter_mut().zip(grads) {
        p.step += 1;
        let t = p.step as f64;
        let bc1 = 1.0 - hyper.beta1.powf(t);
        let bc2 = 1.0 - hyper.beta2.powf(t);
        let n = g.len();
        let (mut m, mut v, mut x) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
        for i in 0..n {
            let gi = g.data()[i];
            let mi = hyper.beta1 * p.adam_m.data()[i] + (1.0 - hyper.beta1) * gi;
            let vi = hyper.beta2 * p.adam_v.data()[i] + (1.0 - hyper.beta2) * gi * gi;
            let update = (mi / bc1) / ((vi / bc2).sqrt() + hyper.eps);
            x.push(p.value.data()[i] - hyper.lr * update);
            m.push(mi);
            v.push(vi);
        }
        let shape = p.value.shape().to_vec();
        p.value = Tensor::new(shape.clone(), x)?;
        p.adam_m = Tensor::from_raw(shape.clone(), m);
        p.adam_v = Tensor::from_raw(shape, v);
    }
    Ok(())
}
