//! AdamW with decoupled weight decay:
//! p <- p - lr * m_hat / (sqrt(v_hat) + eps) - lr * wd * p.

use indexmap::IndexMap;
use thiserror::Error;

use super::params::ParamStore;

#[derive(Debug, Error)]
pub enum OptimizerError {
    #[error("no gradient for parameter `{0}`")]
    MissingGrad(String),
    #[error("gradient length {got} for `{name}` does not match parameter length {want}")]
    ShapeMismatch { name: String, got: usize, want: usize },
}

/// AdamW state: per-parameter first/second moments plus the step counter.
#[derive(Clone, Debug)]
pub struct AdamW {
    pub lr: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step_count: u64,
    moments: IndexMap<String, (Vec<f64>, Vec<f64>)>,
}

impl AdamW {
    pub fn new(lr: f64, weight_decay: f64) -> Self {
        AdamW {
            lr,
            weight_decay,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step_count: 0,
            moments: IndexMap::new(),
        }
    }

    /// One update over every parameter in the store. Every parameter must
    /// have a gradient entry.
    pub fn step(
        &mut self,
        store: &mut ParamStore,
        grads: &IndexMap<String, Vec<f64>>,
    ) -> Result<(), OptimizerError> {
        self.step_count += 1;
        let t = self.step_count as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        for (name, param) in store.entries.iter_mut() {
            let g = grads
                .get(name)
                .ok_or_else(|| OptimizerError::MissingGrad(name.clone()))?;
            if g.len() != param.data.len() {
                return Err(OptimizerError::ShapeMismatch {
                    name: name.clone(),
                    got: g.len(),
                    want: param.data.len(),
                });
            }
            let (m, v) = self
                .moments
                .entry(name.clone())
                .or_insert_with(|| (vec![0.0; g.len()], vec![0.0; g.len()]));
            for i in 0..g.len() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g[i] * g[i];
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                param.data[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps)
                    + self.lr * self.weight_decay * param.data[i];
            }
        }
        Ok(())
    }
}
