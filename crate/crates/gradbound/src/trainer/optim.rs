//! Global-norm gradient clipping and bias-corrected Adam with decoupled
//! weight decay (embeddings and norm affines excluded).

use crate::error::{Error, Result};
use crate::model::params::{Gradients, Parameters};
use crate::trainer::config::TrainConfig;

pub const ADAM_EPSILON: f64 = 1e-8;

/// L2 norm over the concatenation of all parameter gradients.
pub fn global_grad_norm(grads: &Gradients) -> f64 {
    grads
        .tensors()
        .iter()
        .map(|s| s.tensor.as_slice().iter().map(|v| v * v).sum::<f64>())
        .sum::<f64>()
        .sqrt()
}

#[derive(Debug, Clone, Copy)]
pub struct ClipOutcome {
    pub preclip: f64,
    pub postclip: f64,
}

/// Scales all gradients by `clip_norm / norm` when the global norm exceeds
/// `clip_norm`. Errors on a non-finite norm so the caller can mark the run
/// diverged.
pub fn clip_gradients(grads: &mut Gradients, clip_norm: f64) -> Result<ClipOutcome> {
    let preclip = global_grad_norm(grads);
    if !preclip.is_finite() {
        return Err(Error::NonFinite(format!("gradient norm is {preclip}")));
    }
    if preclip <= clip_norm {
        return Ok(ClipOutcome {
            preclip,
            postclip: preclip,
        });
    }
    let scale = clip_norm / preclip;
    for (_, tensor, _) in grads.tensors_mut() {
        tensor.scale_in_place(scale);
    }
    Ok(ClipOutcome {
        preclip,
        postclip: global_grad_norm(grads),
    })
}

/// First/second moment accumulators, one pair per tensor in declaration
/// order, plus the shared step counter.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    pub step: usize,
}

impl OptimizerState {
    pub fn new(params: &Parameters) -> Self {
        let shapes: Vec<usize> = params.tensors().iter().map(|s| s.tensor.len()).collect();
        Self {
            m: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            v: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            step: 0,
        }
    }

    pub fn quantize_f32(&mut self) {
        for buf in self.m.iter_mut().chain(self.v.iter_mut()) {
            for x in buf.iter_mut() {
                *x = *x as f32 as f64;
            }
        }
    }

    pub fn all_finite(&self) -> bool {
        self.m
            .iter()
            .chain(self.v.iter())
            .all(|buf| buf.iter().all(|v| v.is_finite()))
    }
}

/// One bias-corrected Adam step with decoupled weight decay applied to the
/// tensors flagged for decay (everything except embeddings and norms).
pub fn adam_step(
    params: &mut Parameters,
    grads: &Gradients,
    state: &mut OptimizerState,
    lr: f64,
    config: &TrainConfig,
) -> Result<()> {
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - config.adam_beta1.powi(t);
    let bc2 = 1.0 - config.adam_beta2.powi(t);
    let grad_slots = grads.tensors();
    let param_slots = params.tensors_mut();
    if grad_slots.len() != param_slots.len() || grad_slots.len() != state.m.len() {
        return Err(Error::ShapeMismatch(
            "optimizer state does not mirror the parameters".into(),
        ));
    }
    for (i, (g, (name, p, decay))) in grad_slots.iter().zip(param_slots).enumerate() {
        if g.tensor.len() != p.len() {
            return Err(Error::ShapeMismatch(format!("gradient shape for {name}")));
        }
        let m = &mut state.m[i];
        let v = &mut state.v[i];
        for (j, (&gj, pj)) in g
            .tensor
            .as_slice()
            .iter()
            .zip(p.as_mut_slice().iter_mut())
            .enumerate()
        {
            m[j] = config.adam_beta1 * m[j] + (1.0 - config.adam_beta1) * gj;
            v[j] = config.adam_beta2 * v[j] + (1.0 - config.adam_beta2) * gj * gj;
            let m_hat = m[j] / bc1;
            let v_hat = v[j] / bc2;
            let mut update = lr * m_hat / (v_hat.sqrt() + ADAM_EPSILON);
            if decay && config.weight_decay > 0.0 {
                update += lr * config.weight_decay * *pj;
            }
            *pj -= update;
        }
    }
    Ok(())
}
