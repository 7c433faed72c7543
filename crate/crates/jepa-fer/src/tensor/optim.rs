//! Adaptive-moment optimizer with decoupled weight decay.

use super::{Element, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct AdamWConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        AdamWConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
        }
    }
}

/// Optimizer state: first/second moment accumulators aligned positionally
/// with the parameter list handed to [`AdamW::new`], plus the step counter.
pub struct AdamW<E: Element> {
    pub cfg: AdamWConfig,
    step: u64,
    m: Vec<Vec<E>>,
    v: Vec<Vec<E>>,
    decay_mask: Vec<bool>,
}

impl<E: Element> AdamW<E> {
    pub fn new(cfg: AdamWConfig, params: &[Tensor<E>]) -> Self {
        let m = params.iter().map(|p| vec![E::zero(); p.numel()]).collect();
        let v = params.iter().map(|p| vec![E::zero(); p.numel()]).collect();
        AdamW {
            cfg,
            step: 0,
            m,
            v,
            decay_mask: vec![true; params.len()],
        }
    }

    /// Exempt the parameters at `indices` from weight decay.
    pub fn no_decay(&mut self, indices: &[usize]) {
        for &i in indices {
            self.decay_mask[i] = false;
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One update over `params`, reading each tensor's accumulated gradient.
    /// The learning rate used may be overridden per call (for warmup
    /// schedules); pass `None` to use the configured rate.
    pub fn step(&mut self, params: &[Tensor<E>], lr_override: Option<f64>) -> Result<()> {
        if params.len() != self.m.len() {
            return Err(Error::usage(format!(
                "optimizer built for {} params, got {}",
                self.m.len(),
                params.len()
            )));
        }
        self.step += 1;
        let t = self.step as i32;
        let lr = E::from_f64(lr_override.unwrap_or(self.cfg.lr));
        let b1 = E::from_f64(self.cfg.beta1);
        let b2 = E::from_f64(self.cfg.beta2);
        let eps = E::from_f64(self.cfg.eps);
        let bc1 = E::from_f64(1.0 - self.cfg.beta1.powi(t));
        let bc2 = E::from_f64(1.0 - self.cfg.beta2.powi(t));
        for (i, p) in params.iter().enumerate() {
            let g = p.grad().ok_or_else(|| {
                Error::usage(format!(
                    "optimizer step with missing gradient on parameter {i} (shape {:?})",
                    p.shape()
                ))
            })?;
            let wd = if self.decay_mask[i] {
                E::from_f64(self.cfg.weight_decay)
            } else {
                E::zero()
            };
            let m = &mut self.m[i];
            let v = &mut self.v[i];
            let mut w = p.to_vec();
            for j in 0..w.len() {
                m[j] = b1 * m[j] + (E::one() - b1) * g[j];
                v[j] = b2 * v[j] + (E::one() - b2) * g[j] * g[j];
                let mhat = m[j] / bc1;
                let vhat = v[j] / bc2;
                w[j] = w[j] - lr * (mhat / (vhat.sqrt() + eps) + wd * w[j]);
            }
            p.set_values(&w)?;
        }
        Ok(())
    }
}

/// Drop accumulated gradients on every listed tensor.
pub fn clear_grads<E: Element>(params: &[Tensor<E>]) {
    for p in params {
        p.clear_grad();
    }
}
