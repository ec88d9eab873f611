//! Linear warmup followed by cosine decay to a floor of `0.1 * lr_peak`.

use crate::error::{Error, Result};
use crate::trainer::config::TrainConfig;

pub const LR_FLOOR_FRACTION: f64 = 0.1;

/// Learning rate at `step` (0-based, must be < `total_steps`).
pub fn lr_at(step: usize, config: &TrainConfig) -> Result<f64> {
    if step >= config.total_steps {
        return Err(Error::InvalidArgument(format!(
            "step {step} out of range for {} total steps",
            config.total_steps
        )));
    }
    let warmup = config.warmup_steps();
    if step <= warmup {
        return Ok(config.lr_peak * step as f64 / warmup as f64);
    }
    let floor = LR_FLOOR_FRACTION * config.lr_peak;
    let progress = (step - warmup) as f64 / (config.total_steps - warmup) as f64;
    Ok(floor + (config.lr_peak - floor) * 0.5 * (1.0 + (std::f64::consts::PI * progress).cos()))
}
