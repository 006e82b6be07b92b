use serde::{Deserialize, Serialize};

use super::ParamStore;
use crate::error::{Error, Result};
use crate::tensor::Real;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Rescale all gradients jointly when their global norm exceeds this.
    pub max_grad_norm: Option<f64>,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            max_grad_norm: None,
        }
    }
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        AdamConfig {
            lr,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.lr > 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.eps > 0.0
            && self.max_grad_norm.is_none_or(|n| n > 0.0);
        if !ok {
            return Err(Error::config(format!("invalid Adam settings {self:?}")));
        }
        Ok(())
    }
}

/// One bias-corrected Adam update over every parameter, then zeroes the
/// gradients. Fails if no backward pass populated them since the last step.
pub fn adam_step<T: Real>(params: &mut ParamStore<T>, cfg: &AdamConfig) -> Result<()> {
    cfg.validate()?;
    if !params.grads_ready() {
        return Err(Error::contract(
            "adam_step called without gradients from a backward pass",
        ));
    }

    let clip = cfg.max_grad_norm.and_then(|max| {
        let norm = params
            .iter()
            .map(|p| p.grad.sq_norm().as_f64())
            .sum::<f64>()
            .sqrt();
        (norm > max).then(|| T::lit(max / norm))
    });

    let (b1, b2) = (T::lit(cfg.beta1), T::lit(cfg.beta2));
    let (lr, eps) = (T::lit(cfg.lr), T::lit(cfg.eps));
    let one = T::one();
    for p in params.iter_mut() {
        p.step += 1;
        let t = p.step as i32;
        let bc1 = one - b1.powi(t);
        let bc2 = one - b2.powi(t);
        let value = p.value.data_mut();
        let grad = p.grad.data();
        let m = p.m.data_mut();
        let v = p.v.data_mut();
        for i in 0..value.len() {
            let g = clip.map_or(grad[i], |s| grad[i] * s);
            m[i] = b1 * m[i] + (one - b1) * g;
            v[i] = b2 * v[i] + (one - b2) * g * g;
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            value[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    params.zero_grads();
    Ok(())
}
