//! Adam with global-norm gradient clipping.

use crate::error::{Error, Result};
use crate::model::SgruParams;
use crate::train::TrainConfig;

/// Per-parameter moment buffers, aligned with the leaf registration order.
#[derive(Debug, Clone)]
pub struct AdamState {
    first_moment: Vec<Vec<f64>>,
    second_moment: Vec<Vec<f64>>,
    step: u64,
}

impl AdamState {
    pub fn new(params: &SgruParams) -> Self {
        let shapes: Vec<usize> = params.leaves().iter().map(|(_, t)| t.numel()).collect();
        AdamState {
            first_moment: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            second_moment: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

/// Scales all gradients so their joint Euclidean norm is at most `max_norm`.
/// Returns the pre-clip norm.
pub fn clip_gradients(params: &mut SgruParams, max_norm: f64) -> Result<f64> {
    let mut sq_sum = 0.0;
    for (name, tensor) in params.leaves() {
        let grad = tensor
            .grad()
            .ok_or_else(|| Error::Train(format!("gradient missing for {name}")))?;
        for g in grad {
            sq_sum += g * g;
        }
    }
    let norm = sq_sum.sqrt();
    if norm > max_norm {
        let scale = max_norm / norm;
        for (_, tensor) in params.leaves_mut() {
            for g in tensor.grad_mut().expect("checked above") {
                *g *= scale;
            }
        }
    }
    Ok(norm)
}

/// One optimizer step over the gradients currently stored on `params`:
/// finiteness check, global-norm clip, then bias-corrected Adam.
pub fn adam_step(
    params: &mut SgruParams,
    state: &mut AdamState,
    config: &TrainConfig,
) -> Result<()> {
    if state.first_moment.len() != params.leaves().len() {
        return Err(Error::Train(format!(
            "optimizer state tracks {} tensors, model has {}",
            state.first_moment.len(),
            params.leaves().len()
        )));
    }
    for (name, tensor) in params.leaves() {
        let grad = tensor
            .grad()
            .ok_or_else(|| Error::Train(format!("gradient missing for {name}")))?;
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Train(format!("non-finite gradient for {name}")));
        }
    }
    clip_gradients(params, config.gradient_clip_norm)?;

    state.step += 1;
    let t = state.step as i32;
    let beta1 = config.adam_beta1;
    let beta2 = config.adam_beta2;
    let m_correction = 1.0 - beta1.powi(t);
    let v_correction = 1.0 - beta2.powi(t);
    for (slot, (_, tensor)) in params.leaves_mut().into_iter().enumerate() {
        let m = &mut state.first_moment[slot];
        let v = &mut state.second_moment[slot];
        if m.len() != tensor.numel() {
            return Err(Error::Train(format!(
                "optimizer state slot {slot} holds {} entries, tensor has {}",
                m.len(),
                tensor.numel()
            )));
        }
        let grads = tensor.grad().expect("checked above").to_vec();
        for (i, g) in grads.into_iter().enumerate() {
            m[i] = beta1 * m[i] + (1.0 - beta1) * g;
            v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
            let m_hat = m[i] / m_correction;
            let v_hat = v[i] / v_correction;
            let delta = config.learning_rate * m_hat / (v_hat.sqrt() + config.adam_eps);
            // Skipping exact-zero deltas keeps lr=0 bitwise inert, including
            // on negative-zero parameters.
            if delta != 0.0 {
                tensor.data_mut()[i] -= delta;
            }
        }
    }
    Ok(())
}
