use std::collections::BTreeMap;

use super::params::{GradMap, NamedParams};
use super::NetworkError;
use crate::autodiff::Matrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn with_learning_rate(learning_rate: f64) -> Self {
        Self {
            learning_rate,
            ..Self::default()
        }
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Moments {
    first: Matrix,
    second: Matrix,
}

/// Adam with bias correction. Moments are created lazily per parameter name.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    step: u64,
    moments: BTreeMap<String, Moments>,
}

impl AdamState {
    pub fn new(config: AdamConfig) -> Self {
        Self {
            config,
            step: 0,
            moments: BTreeMap::new(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Applies one update to every parameter named in `grads`; others are untouched.
    pub fn step<P: NamedParams + ?Sized>(
        &mut self,
        params: &mut P,
        grads: &GradMap,
    ) -> Result<(), NetworkError> {
        let mut targets: BTreeMap<String, &mut Matrix> =
            params.named_params_mut().into_iter().collect();
        for (name, g) in grads {
            let p = targets
                .get(name.as_str())
                .ok_or_else(|| NetworkError::UnknownParameter(name.clone()))?;
            if p.shape() != g.shape() {
                return Err(NetworkError::GradShape {
                    name: name.clone(),
                    param: p.shape(),
                    grad: g.shape(),
                });
            }
        }

        self.step += 1;
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            eps,
        } = self.config;
        let t = self.step as i32;
        let bc1 = 1.0 - beta1.powi(t);
        let bc2 = 1.0 - beta2.powi(t);
        for (name, g) in grads {
            let p = targets.get_mut(name.as_str()).expect("checked above");
            let m = self.moments.entry(name.clone()).or_insert_with(|| Moments {
                first: Matrix::zeros(g.rows(), g.cols()),
                second: Matrix::zeros(g.rows(), g.cols()),
            });
            let it = p
                .as_mut_slice()
                .iter_mut()
                .zip(m.first.as_mut_slice())
                .zip(m.second.as_mut_slice())
                .zip(g.as_slice());
            for (((w, m1), m2), &gi) in it {
                *m1 = beta1 * *m1 + (1.0 - beta1) * gi;
                *m2 = beta2 * *m2 + (1.0 - beta2) * gi * gi;
                let mhat = *m1 / bc1;
                let vhat = *m2 / bc2;
                *w -= learning_rate * mhat / (vhat.sqrt() + eps);
            }
        }
        Ok(())
    }
}
