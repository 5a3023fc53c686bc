use serde::{Deserialize, Serialize};

use crate::error::ensure_dim;
use crate::Result;

/// Adam hyper-parameters. Defaults are the common deep-learning framework
/// defaults: step 1e-3, decay rates 0.9 / 0.999, epsilon 1e-7.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
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
            epsilon: 1e-7,
        }
    }
}

/// First and second moment accumulators plus the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl AdamState {
    pub fn new(n_params: usize) -> Self {
        Self {
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            t: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// Applies one update in place. The bias correction is folded into the
    /// step size and epsilon is added to the uncorrected `sqrt(v)`.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64], cfg: &AdamConfig) -> Result<()> {
        ensure_dim(self.m.len(), params.len())?;
        ensure_dim(self.m.len(), grad.len())?;
        self.t += 1;
        let t = self.t as i32;
        let lr_t = cfg.learning_rate * (1.0 - cfg.beta2.powi(t)).sqrt() / (1.0 - cfg.beta1.powi(t));
        for (((p, g), m), v) in params.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
            *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
            *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
            *p -= lr_t * *m / (v.sqrt() + cfg.epsilon);
        }
        Ok(())
    }
}
