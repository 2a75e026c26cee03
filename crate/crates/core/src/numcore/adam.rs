use serde::{Deserialize, Serialize};

use super::{MlpGrads, MlpParams};
use crate::error::{DcmaError, Result};

/// Adaptive-moment optimizer state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl OptState {
    pub fn new(params: &MlpParams, lr: f64) -> Self {
        Self::with_betas(params, lr, 0.9, 0.999, 1e-8)
    }

    pub fn with_betas(params: &MlpParams, lr: f64, beta1: f64, beta2: f64, eps: f64) -> Self {
        let zeros: Vec<Vec<f64>> = params.tensors().iter().map(|t| vec![0.0; t.len()]).collect();
        OptState {
            lr,
            beta1,
            beta2,
            eps,
            step: 0,
            first: zeros.clone(),
            second: zeros,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

/// One bias-corrected Adam update, applied to `params` in place.
///
/// Rejects the whole step, leaving `params` and `state` untouched, when any
/// gradient entry is non-finite.
pub fn adam_step(params: &mut MlpParams, grads: &MlpGrads, state: &mut OptState) -> Result<()> {
    let g_tensors = grads.tensors();
    if g_tensors.len() != state.first.len()
        || g_tensors
            .iter()
            .zip(&state.first)
            .any(|(g, m)| g.len() != m.len())
    {
        return Err(DcmaError::shape("gradient layout does not match parameters"));
    }
    for (t, g) in g_tensors.iter().enumerate() {
        if let Some(k) = g.iter().position(|v| !v.is_finite()) {
            return Err(DcmaError::Training(format!(
                "non-finite gradient at {}[{k}]",
                MlpParams::tensor_name(t)
            )));
        }
    }

    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - state.beta1.powi(t);
    let bc2 = 1.0 - state.beta2.powi(t);
    let (b1, b2, lr, eps) = (state.beta1, state.beta2, state.lr, state.eps);

    for (((p, g), m), v) in params
        .tensors_mut()
        .into_iter()
        .zip(g_tensors)
        .zip(state.first.iter_mut())
        .zip(state.second.iter_mut())
    {
        for k in 0..p.len() {
            let gk = g[k];
            m[k] = b1 * m[k] + (1.0 - b1) * gk;
            v[k] = b2 * v[k] + (1.0 - b2) * gk * gk;
            let m_hat = m[k] / bc1;
            let v_hat = v[k] / bc2;
            p[k] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}
