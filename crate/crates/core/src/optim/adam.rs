use crate::error::{Error, Result};

use super::StepRule;

pub const DEFAULT_BETA1: f64 = 0.9;
pub const DEFAULT_EPS: f64 = 1e-8;

/// Bias-corrected Adam.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(n_params: usize, beta2: f64) -> Self {
        Self::with_hyper(n_params, DEFAULT_BETA1, beta2, DEFAULT_EPS)
    }

    pub fn with_hyper(n_params: usize, beta1: f64, beta2: f64, eps: f64) -> Self {
        AdamState {
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            t: 0,
            beta1,
            beta2,
            eps,
        }
    }

    /// Advances the state by one step and returns the parameter update.
    pub fn step(&mut self, grad: &[f64], lr: f64) -> Result<Vec<f64>> {
        if grad.len() != self.m.len() {
            return Err(Error::Dimension {
                expected: self.m.len(),
                got: grad.len(),
            });
        }
        if let Some(i) = grad.iter().position(|g| !g.is_finite()) {
            return Err(Error::non_finite("gradient", Some(i)));
        }
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        let (b1, b2) = (self.beta1, self.beta2);
        Ok(grad
            .iter()
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
            .map(|(&g, (m, v))| {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                -lr * (*m / c1) / ((*v / c2).sqrt() + self.eps)
            })
            .collect())
    }
}

impl StepRule for AdamState {
    fn step(&mut self, grad: &[f64], lr: f64) -> Result<Vec<f64>> {
        AdamState::step(self, grad, lr)
    }
}
