//! Gradient-norm spike detection: a step spikes when its pre-clip gradient
//! norm exceeds `factor` times the median over the trailing window.

use crate::error::{Error, Result};
use crate::trainer::config::{SpikeEvent, TrainLogRecord};

pub const DEFAULT_SPIKE_WINDOW: usize = 50;
pub const DEFAULT_SPIKE_FACTOR: f64 = 3.0;

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).expect("finite norms"));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Spike test for the record at index `t`, given the full log. Used both by
/// the batch scan and by the online detection inside the training loop.
pub(crate) fn spike_at(
    log: &[TrainLogRecord],
    t: usize,
    window: usize,
    factor: f64,
) -> Option<SpikeEvent> {
    if t < window {
        return None;
    }
    let mut trailing: Vec<f64> = log[t - window..t]
        .iter()
        .map(|r| r.grad_norm_preclip)
        .collect();
    let med = median(&mut trailing);
    let norm = log[t].grad_norm_preclip;
    if med > 0.0 && norm > factor * med {
        Some(SpikeEvent {
            step: log[t].step,
            grad_norm: norm,
            trailing_median: med,
            ratio: norm / med,
        })
    } else {
        None
    }
}

/// Scans a full log. Logs shorter than the window yield no events.
pub fn detect_spikes(
    log: &[TrainLogRecord],
    window: usize,
    factor: f64,
) -> Result<Vec<SpikeEvent>> {
    if window < 10 {
        return Err(Error::InvalidArgument(format!(
            "spike window must be >= 10, got {window}"
        )));
    }
    if !(factor > 0.0) {
        return Err(Error::InvalidArgument("spike factor must be positive".into()));
    }
    Ok((0..log.len())
        .filter_map(|t| spike_at(log, t, window, factor))
        .collect())
}
