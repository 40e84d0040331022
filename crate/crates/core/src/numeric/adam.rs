use super::params::ParameterStore;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamConfig {
    /// A learning rate of exactly 0 is accepted so that a null update can be
    /// requested explicitly.
    pub fn validate(&self) -> Result<()> {
        let in_unit = |b: f64| b > 0.0 && b < 1.0;
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning rate {}", self.learning_rate)));
        }
        if !in_unit(self.beta1) || !in_unit(self.beta2) {
            return Err(Error::Config(format!(
                "Adam betas ({}, {}) must lie in (0, 1)",
                self.beta1, self.beta2
            )));
        }
        if self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return Err(Error::Config(format!("Adam epsilon {}", self.epsilon)));
        }
        Ok(())
    }
}

/// One bias-corrected Adam update over every entry of the store.
///
/// Entries whose gradient is identically zero this step are not moved; only
/// their moment estimates decay.
pub fn adam_step(store: &mut ParameterStore, config: &AdamConfig) {
    store.step_count += 1;
    let t = store.step_count as i32;
    let c1 = 1.0 - config.beta1.powi(t);
    let c2 = 1.0 - config.beta2.powi(t);
    for (_, p) in store.iter_mut() {
        let touched = p.grad.data().iter().any(|&g| g != 0.0);
        let m = p.adam_m.data_mut();
        let v = p.adam_v.data_mut();
        if !touched {
            m.iter_mut().for_each(|x| *x *= config.beta1);
            v.iter_mut().for_each(|x| *x *= config.beta2);
            continue;
        }
        let g = p.grad.data();
        let theta = p.value.data_mut();
        for i in 0..g.len() {
            m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g[i];
            v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g[i] * g[i];
            let m_hat = m[i] / c1;
            let v_hat = v[i] / c2;
            theta[i] -= config.learning_rate * m_hat / (v_hat.sqrt() + config.epsilon);
        }
    }
}
