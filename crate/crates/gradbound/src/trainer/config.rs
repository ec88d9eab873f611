//! Training configuration and log record types.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    /// f64 everywhere.
    Double,
    /// Parameters, optimizer state, gradients, and logged losses are rounded
    /// to their nearest f32 each step; arithmetic still accumulates in f64.
    Single,
}

impl Precision {
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "double" | "f64" => Ok(Self::Double),
            "single" | "f32" => Ok(Self::Single),
            other => Err(Error::Config(format!("unknown precision '{other}'"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Double => "double",
            Self::Single => "single",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr_peak: f64,
    pub warmup_fraction: f64,
    pub total_steps: usize,
    pub batch_size: usize,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub weight_decay: f64,
    pub clip_norm: f64,
    pub seed: u64,
    pub precision: Precision,
    /// Console echo interval; the in-memory log records every step.
    pub log_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr_peak: 1e-3,
            warmup_fraction: 0.05,
            total_steps: 2000,
            batch_size: 16,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            weight_decay: 0.01,
            clip_norm: 1.0,
            seed: 42,
            precision: Precision::Single,
            log_every: 50,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr_peak > 0.0 && self.lr_peak.is_finite()) {
            return Err(Error::Config(format!("lr_peak must be positive, got {}", self.lr_peak)));
        }
        if !(self.warmup_fraction > 0.0 && self.warmup_fraction < 1.0) {
            return Err(Error::Config(format!(
                "warmup_fraction must be in (0,1), got {}",
                self.warmup_fraction
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        for (name, beta) in [("adam_beta1", self.adam_beta1), ("adam_beta2", self.adam_beta2)] {
            if !(beta > 0.0 && beta < 1.0) {
                return Err(Error::Config(format!("{name} must be in (0,1), got {beta}")));
            }
        }
        if !(self.weight_decay >= 0.0) {
            return Err(Error::Config("weight_decay must be nonnegative".into()));
        }
        if !(self.clip_norm > 0.0) {
            return Err(Error::Config("clip_norm must be positive".into()));
        }
        if self.log_every == 0 {
            return Err(Error::Config("log_every must be >= 1".into()));
        }
        Ok(())
    }

    /// `round(warmup_fraction * total_steps)`, at least 1.
    pub fn warmup_steps(&self) -> usize {
        ((self.warmup_fraction * self.total_steps as f64).round() as usize).max(1)
    }
}

/// One training step as logged. `wall_ms` is kept in memory for reporting
/// but excluded from serialized logs, which must be byte-identical across
/// reruns of the same seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLogRecord {
    pub step: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub grad_norm_preclip: f64,
    pub grad_norm_postclip: f64,
    #[serde(skip)]
    pub wall_ms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpikeEvent {
    pub step: usize,
    pub grad_norm: f64,
    pub trailing_median: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrainStatus {
    Completed,
    Diverged,
}

impl TrainStatus {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Completed => "completed",
            Self::Diverged => "diverged",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_is_valid_and_warmup_rounds() {
        let c = TrainConfig::default();
        c.validate().unwrap();
        assert_eq!(c.warmup_steps(), 100);
        let mut short = c.clone();
        short.total_steps = 3;
        assert_eq!(short.warmup_steps(), 1);
    }

    #[test]
    fn validation_rejects_bad_fields() {
        let mut c = TrainConfig::default();
        c.warmup_fraction = 1.0;
        assert!(c.validate().is_err());
        c = TrainConfig::default();
        c.adam_beta2 = 1.0;
        assert!(c.validate().is_err());
        c = TrainConfig::default();
        c.clip_norm = 0.0;
        assert!(c.validate().is_err());
    }
}
