//! Adam with bias correction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::ModelParams;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moments, one buffer per parameter tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(params: &ModelParams) -> Self {
        let zeros: Vec<Vec<f64>> = params.tensors().iter().map(|t| vec![0.0; t.data.len()]).collect();
        Self {
            m: zeros.clone(),
            v: zeros,
        }
    }
}

/// One Adam update at step `t` (1-based). Gradients are checked for finiteness
/// before anything is modified.
pub fn adam_step(
    params: &mut ModelParams,
    grads: &ModelParams,
    state: &mut AdamState,
    t: u64,
    config: &AdamConfig,
) -> Result<()> {
    if t == 0 {
        return Err(Error::ContractViolation("Adam steps are numbered from 1".into()));
    }
    let grad_tensors = grads.tensors();
    let shapes_match = {
        let p = params.tensors();
        p.len() == grad_tensors.len()
            && p.len() == state.m.len()
            && p.iter()
                .zip(&grad_tensors)
                .zip(&state.m)
                .all(|((a, b), m)| a.data.len() == b.data.len() && a.data.len() == m.len())
    };
    if !shapes_match {
        return Err(Error::shape("adam_step", "params, gradients and state differ in shape"));
    }
    if let Some(bad) = grad_tensors.iter().find(|g| !g.data.iter().all(|v| v.is_finite())) {
        return Err(Error::NumericFailure(format!(
            "gradient of {} is not finite",
            bad.name
        )));
    }

    let bc1 = 1.0 - config.beta1.powi(t.min(i32::MAX as u64) as i32);
    let bc2 = 1.0 - config.beta2.powi(t.min(i32::MAX as u64) as i32);
    for (((p, g), m), v) in params
        .tensors_mut()
        .into_iter()
        .zip(&grad_tensors)
        .zip(state.m.iter_mut())
        .zip(state.v.iter_mut())
    {
        for i in 0..p.len() {
            let gi = g.data[i];
            m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * gi;
            v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * gi * gi;
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            p[i] -= config.learning_rate * m_hat / (v_hat.sqrt() + config.eps);
        }
    }
    Ok(())
}
