//! Adam with optional global-norm gradient clipping.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{ParamId, ParamStore};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Adam {
    config: AdamConfig,
    step: u64,
    m: Vec<Option<Array2<f64>>>,
    v: Vec<Option<Array2<f64>>>,
}

impl Adam {
    pub fn new(config: AdamConfig) -> Self {
        Self {
            config,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// One update of every parameter that has a gradient.
    pub fn step(
        &mut self,
        store: &mut ParamStore,
        grads: &[(ParamId, Array2<f64>)],
        lr: f64,
    ) -> Result<()> {
        self.step += 1;
        let AdamConfig { beta1, beta2, eps } = self.config;
        let bc1 = 1.0 - beta1.powi(self.step as i32);
        let bc2 = 1.0 - beta2.powi(self.step as i32);
        if self.m.len() < store.len() {
            self.m.resize(store.len(), None);
            self.v.resize(store.len(), None);
        }
        for (id, g) in grads {
            let param = store.get_mut(*id);
            if param.dim() != g.dim() {
                return Err(Error::shape(format!(
                    "gradient {:?} for parameter {:?}",
                    g.dim(),
                    param.dim()
                )));
            }
            let m = self.m[id.0].get_or_insert_with(|| Array2::zeros(g.dim()));
            let v = self.v[id.0].get_or_insert_with(|| Array2::zeros(g.dim()));
            ndarray::Zip::from(param)
                .and(m)
                .and(v)
                .and(g)
                .for_each(|p, m, v, &g| {
                    *m = beta1 * *m + (1.0 - beta1) * g;
                    *v = beta2 * *v + (1.0 - beta2) * g * g;
                    *p -= lr * (*m / bc1) / ((*v / bc2).sqrt() + eps);
                });
        }
        Ok(())
    }
}

/// Rescales `grads` in place so their joint L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_global_norm(grads: &mut [(ParamId, Array2<f64>)], max_norm: f64) -> f64 {
    let norm = grads
        .iter()
        .map(|(_, g)| g.iter().map(|x| x * x).sum::<f64>())
        .sum::<f64>()
        .sqrt();
    if max_norm > 0.0 && norm > max_norm {
        let k = max_norm / norm;
        grads
            .iter_mut()
            .for_each(|(_, g)| g.mapv_inplace(|x| x * k));
    }
    norm
}
