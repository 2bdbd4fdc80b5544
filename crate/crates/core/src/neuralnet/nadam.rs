//! Nesterov-accelerated Adam with a constant momentum coefficient.

use serde::{Deserialize, Serialize};

use super::Scalar;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NadamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for NadamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Optimizer state: one first- and second-moment buffer per parameter
/// tensor, plus the step counter.
#[derive(Clone, Debug)]
pub struct Nadam {
    pub config: NadamConfig,
    step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Nadam {
    pub fn new(config: NadamConfig) -> Self {
        Self {
            config,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// Applies one update. `params[i]` and `grads[i]` must have equal
    /// lengths; tensors with `trainable[i] == false` are left alone.
    pub fn step<T: Scalar>(
        &mut self,
        params: &mut [&mut [T]],
        grads: &[&[T]],
        trainable: &[bool],
        learning_rate: f64,
    ) -> Result<()> {
        if params.len() != grads.len() || params.len() != trainable.len() {
            return Err(Error::ShapeMismatch("parameter and gradient lists differ".into()));
        }
        if self.m.is_empty() {
            self.m = params.iter().map(|p| vec![0.0; p.len()]).collect();
            self.v = self.m.clone();
        }
        if self.m.len() != params.len() {
            return Err(Error::ShapeMismatch("optimizer state belongs to another model".into()));
        }
        self.step += 1;
        let t = self.step as i32;
        let NadamConfig { beta1: b1, beta2: b2, epsilon: eps } = self.config;
        let c1 = 1.0 - b1.powi(t + 1);
        let c1_now = 1.0 - b1.powi(t);
        let c2 = 1.0 - b2.powi(t);
        for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            if !trainable[i] {
                continue;
            }
            if p.len() != g.len() || p.len() != self.m[i].len() {
                return Err(Error::ShapeMismatch(format!("parameter tensor {i} changed size")));
            }
            for (j, (p, &g)) in p.iter_mut().zip(g.iter()).enumerate() {
                let g = g.to_f64_lossy();
                let m = &mut self.m[i][j];
                let v = &mut self.v[i][j];
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                let m_hat = b1 * *m / c1 + (1.0 - b1) * g / c1_now;
                let v_hat = *v / c2;
                *p -= T::lit(learning_rate * m_hat / (v_hat.sqrt() + eps));
            }
        }
        Ok(())
    }
}
