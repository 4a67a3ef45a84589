use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::params::ParamStore;
use super::tensor::Tensor2D;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        Self {
            lr,
            ..Self::default()
        }
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Bias-corrected Adam moments, keyed by parameter name.
#[derive(Clone, Debug)]
pub struct AdamState {
    pub config: AdamConfig,
    step: u64,
    moments: BTreeMap<String, (Tensor2D, Tensor2D)>,
}

impl AdamState {
    pub fn new(config: AdamConfig, store: &ParamStore) -> Result<Self> {
        if !(config.lr >= 0.0) || !(0.0..1.0).contains(&config.beta1) || !(0.0..1.0).contains(&config.beta2) {
            return Err(Error::InvalidConfig(format!("bad Adam hyperparameters {config:?}")));
        }
        let moments = store
            .iter()
            .map(|(name, p)| {
                let (r, c) = p.value.shape();
                (name.to_owned(), (Tensor2D::zeros(r, c), Tensor2D::zeros(r, c)))
            })
            .collect();
        Ok(Self {
            config,
            step: 0,
            moments,
        })
    }

    pub fn step(&self) -> u64 {
        self.step
    }
}

/// One Adam step over every parameter, then zeroes the gradients.
pub fn adam_update(store: &mut ParamStore, state: &mut AdamState) -> Result<()> {
    state.step += 1;
    let AdamConfig { lr, beta1, beta2, eps } = state.config;
    let t = state.step as i32;
    let bias1 = 1.0 - beta1.powi(t);
    let bias2 = 1.0 - beta2.powi(t);
    for (name, p) in store.iter_mut() {
        let (m, v) = state
            .moments
            .get_mut(name)
            .ok_or_else(|| Error::UnknownParameter(name.to_owned()))?;
        let values = p.value.data_mut();
        let grads = p.grad.data();
        for (((w, &g), mi), vi) in values
            .iter_mut()
            .zip(grads)
            .zip(m.data_mut())
            .zip(v.data_mut())
        {
            *mi = beta1 * *mi + (1.0 - beta1) * g;
            *vi = beta2 * *vi + (1.0 - beta2) * g * g;
            let m_hat = *mi / bias1;
            let v_hat = *vi / bias2;
            *w -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    store.zero_grads();
    Ok(())
}
