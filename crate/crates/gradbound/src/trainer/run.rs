//! The training loop: forward/backward over a batch, clip, Adam, per-step
//! logging, online spike detection, and divergence capture.

use std::time::Instant;

use crate::data::BatchStream;
use crate::error::{Error, Result};
use crate::model::backward::model_backward;
use crate::model::config::ModelConfig;
use crate::model::forward::{model_forward, RunMode};
use crate::model::loss::cross_entropy;
use crate::model::params::Parameters;
use crate::numerics::RandomSource;
use crate::trainer::config::{Precision, SpikeEvent, TrainConfig, TrainLogRecord, TrainStatus};
use crate::trainer::optim::{adam_step, clip_gradients, OptimizerState};
use crate::trainer::schedule::lr_at;
use crate::trainer::spikes::{spike_at, DEFAULT_SPIKE_FACTOR, DEFAULT_SPIKE_WINDOW};

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: Parameters,
    pub log: Vec<TrainLogRecord>,
    pub spikes: Vec<SpikeEvent>,
    pub status: TrainStatus,
    /// Step at which a non-finite loss/gradient/parameter appeared.
    pub diverged_at: Option<usize>,
}

impl TrainOutcome {
    pub fn final_loss(&self) -> Option<f64> {
        self.log.last().map(|r| r.train_loss)
    }

    pub fn max_grad_norm(&self) -> f64 {
        self.log
            .iter()
            .fold(0.0_f64, |m, r| m.max(r.grad_norm_preclip))
    }
}

/// Errors that mean the numbers blew up, as opposed to a misconfigured run.
fn is_divergence(err: &Error) -> bool {
    matches!(err, Error::NonFinite(_) | Error::DegenerateNorm(_))
}

/// Trains for `tconfig.total_steps` steps. Deterministic given the seed (the
/// loop is single-threaded). A non-finite loss, gradient, or parameter ends
/// the run with `Diverged` status and the log up to that step: divergence
/// is a recorded experimental outcome, not an error.
pub fn train(
    params: Parameters,
    config: &ModelConfig,
    tconfig: &TrainConfig,
    data: &mut BatchStream,
    mut on_step: Option<&mut dyn FnMut(&TrainLogRecord)>,
) -> Result<TrainOutcome> {
    config.validate()?;
    tconfig.validate()?;
    if data.seq_len() != config.seq_len {
        return Err(Error::Config(format!(
            "data stream seq_len {} != model seq_len {}",
            data.seq_len(),
            config.seq_len
        )));
    }
    if data.batch_size() != tconfig.batch_size {
        return Err(Error::Config(format!(
            "data stream batch_size {} != train batch_size {}",
            data.batch_size(),
            tconfig.batch_size
        )));
    }

    let mut params = params;
    let mut model_rng = RandomSource::new(tconfig.seed);
    let mut state = OptimizerState::new(&params);
    let mut log: Vec<TrainLogRecord> = Vec::with_capacity(tconfig.total_steps);
    let mut spikes: Vec<SpikeEvent> = Vec::new();
    let single = tconfig.precision == Precision::Single;

    for step in 0..tconfig.total_steps {
        let t0 = Instant::now();
        let batch = data.next_batch();
        let mut grads = params.zeros_like();
        let mut loss_sum = 0.0;
        let mut blew_up = false;

        for (inputs, targets) in batch.inputs.iter().zip(batch.targets.iter()) {
            let step_result = (|| -> Result<f64> {
                let (logits, cache) =
                    model_forward(inputs, &params, config, RunMode::Train, &mut model_rng)?;
                let (loss, d_logits) = cross_entropy(&logits, targets)?;
                let g = model_backward(&cache, &params, config, &d_logits)?;
                grads.accumulate(&g);
                Ok(loss)
            })();
            match step_result {
                Ok(loss) => loss_sum += loss,
                Err(e) if is_divergence(&e) => {
                    blew_up = true;
                    break;
                }
                Err(e) => return Err(e),
            }
        }

        let inv_b = 1.0 / tconfig.batch_size as f64;
        let mut loss_mean = loss_sum * inv_b;
        grads.scale_all(inv_b);
        if single {
            grads.quantize_f32();
            loss_mean = loss_mean as f32 as f64;
        }

        if blew_up || !loss_mean.is_finite() || !grads.all_finite() {
            return Ok(TrainOutcome {
                params,
                log,
                spikes,
                status: TrainStatus::Diverged,
                diverged_at: Some(step),
            });
        }

        let clip = clip_gradients(&mut grads, tconfig.clip_norm)?;
        let lr = lr_at(step, tconfig)?;
        adam_step(&mut params, &grads, &mut state, lr, tconfig)?;
        if single {
            params.quantize_f32();
            state.quantize_f32();
        }

        let record = TrainLogRecord {
            step,
            lr,
            train_loss: loss_mean,
            grad_norm_preclip: clip.preclip,
            grad_norm_postclip: clip.postclip,
            wall_ms: t0.elapsed().as_secs_f64() * 1e3,
        };
        log.push(record);
        if let Some(callback) = on_step.as_deref_mut() {
            callback(log.last().expect("just pushed"));
        }
        if let Some(event) = spike_at(&log, step, DEFAULT_SPIKE_WINDOW, DEFAULT_SPIKE_FACTOR) {
            spikes.push(event);
        }

        if !params.all_finite() || !state.all_finite() {
            return Ok(TrainOutcome {
                params,
                log,
                spikes,
                status: TrainStatus::Diverged,
                diverged_at: Some(step),
            });
        }
    }

    Ok(TrainOutcome {
        params,
        log,
        spikes,
        status: TrainStatus::Completed,
        diverged_at: None,
    })
}
