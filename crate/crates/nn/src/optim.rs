use serde::{Deserialize, Serialize};

use crate::params::ParamStore;
use crate::tensor::Tensor;
use crate::NnError;

/// Step schedule that halves the base rate every five epochs.
pub fn lr_at(base_lr: f64, epoch: usize) -> f64 {
    base_lr * 0.5f64.powi((epoch / 5) as i32)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamW {
    pub lr: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamW {
    fn default() -> Self {
        Self { lr: 0.005, weight_decay: 0.001, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimState {
    pub config: AdamW,
    pub step: u64,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl OptimState {
    pub fn new(config: AdamW, store: &ParamStore) -> Self {
        let zeros = |s: &ParamStore| s.ids().map(|id| Tensor::zeros(s.value(id).rows(), s.value(id).cols())).collect();
        Self { config, step: 0, m: zeros(store), v: zeros(store) }
    }

    /// One AdamW update using the store's accumulated gradients.
    pub fn step(&mut self, store: &mut ParamStore) -> Result<(), NnError> {
        if self.m.len() != store.len() {
            return Err(NnError::ShapeMismatch(format!(
                "state for {} params, store has {}",
                self.m.len(),
                store.len()
            )));
        }
        self.step += 1;
        let AdamW { lr, weight_decay, beta1, beta2, eps } = self.config;
        let bc1 = 1.0 - beta1.powi(self.step as i32);
        let bc2 = 1.0 - beta2.powi(self.step as i32);
        for (k, id) in store.ids().collect::<Vec<_>>().into_iter().enumerate() {
            if store.grad(id).shape() != self.m[k].shape() || store.value(id).shape() != self.m[k].shape() {
                return Err(NnError::ShapeMismatch(format!("parameter {}", store.name(id))));
            }
            let g = store.grad(id).data().to_vec();
            let (m, v) = (self.m[k].data_mut(), self.v[k].data_mut());
            for i in 0..g.len() {
                m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
                v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
            }
            let (m, v) = (self.m[k].data(), self.v[k].data());
            for (i, p) in store.value_mut(id).data_mut().iter_mut().enumerate() {
                *p -= lr * weight_decay * *p;
                *p -= lr * (m[i] / bc1) / ((v[i] / bc2).sqrt() + eps);
            }
        }
        Ok(())
    }
}
