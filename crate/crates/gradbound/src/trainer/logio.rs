//! Training log serialization.
//!
//! A log file is JSONL: one metadata header object, then one object per
//! step with exactly the `TrainLogRecord` fields (timing is excluded so
//! equal seeds produce byte-identical files), then one typed record per
//! spike event. The final summary is a single JSON object.

use std::path::Path;

use serde::Serialize;

use crate::error::Result;
use crate::model::config::ModelConfig;
use crate::trainer::config::{SpikeEvent, TrainConfig, TrainLogRecord, TrainStatus};
use crate::trainer::run::TrainOutcome;

pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Serialize)]
pub struct RunMetadata<'a> {
    pub r#type: &'static str,
    pub artifact_version: &'static str,
    pub scheme: &'a str,
    pub seed: u64,
    pub model: &'a ModelConfig,
    pub train: &'a TrainConfig,
}

impl<'a> RunMetadata<'a> {
    pub fn new(
        scheme: &'a str,
        seed: u64,
        model: &'a ModelConfig,
        train: &'a TrainConfig,
    ) -> Self {
        Self {
            r#type: "meta",
            artifact_version: ARTIFACT_VERSION,
            scheme,
            seed,
            model,
            train,
        }
    }
}

#[derive(Serialize)]
struct SpikeLine<'a> {
    r#type: &'static str,
    #[serde(flatten)]
    event: &'a SpikeEvent,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary<'a> {
    pub r#type: &'static str,
    pub status: &'a str,
    pub steps: usize,
    pub final_loss: Option<f64>,
    pub max_grad_norm: f64,
    pub spike_count: usize,
    pub diverged_at: Option<usize>,
}

/// Renders the full JSONL document. Deterministic for a fixed outcome.
pub fn render_jsonl(meta: &RunMetadata<'_>, log: &[TrainLogRecord], spikes: &[SpikeEvent]) -> String {
    let mut out = String::new();
    out.push_str(&serde_json::to_string(meta).expect("meta serializes"));
    out.push('\n');
    for record in log {
        out.push_str(&serde_json::to_string(record).expect("record serializes"));
        out.push('\n');
    }
    for event in spikes {
        let line = SpikeLine {
            r#type: "spike",
            event,
        };
        out.push_str(&serde_json::to_string(&line).expect("spike serializes"));
        out.push('\n');
    }
    out
}

pub fn write_jsonl(
    path: &Path,
    meta: &RunMetadata<'_>,
    log: &[TrainLogRecord],
    spikes: &[SpikeEvent],
) -> Result<()> {
    std::fs::write(path, render_jsonl(meta, log, spikes))?;
    Ok(())
}

pub fn summary_json(outcome: &TrainOutcome) -> String {
    let summary = RunSummary {
        r#type: "summary",
        status: match outcome.status {
            TrainStatus::Completed => "completed",
            TrainStatus::Diverged => "diverged",
        },
        steps: outcome.log.len(),
        final_loss: outcome.final_loss(),
        max_grad_norm: outcome.max_grad_norm(),
        spike_count: outcome.spikes.len(),
        diverged_at: outcome.diverged_at,
    };
    serde_json::to_string(&summary).expect("summary serializes")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jsonl_layout_and_step_fields() {
        let model = ModelConfig::toy();
        let train = TrainConfig::default();
        let meta = RunMetadata::new("vanilla", 7, &model, &train);
        let log = vec![TrainLogRecord {
            step: 0,
            lr: 1e-3,
            train_loss: 5.5,
            grad_norm_preclip: 2.0,
            grad_norm_postclip: 1.0,
            wall_ms: 123.0,
        }];
        let spikes = vec![SpikeEvent {
            step: 0,
            grad_norm: 2.0,
            trailing_median: 0.5,
            ratio: 4.0,
        }];
        let text = render_jsonl(&meta, &log, &spikes);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);

        let meta_v: serde_json::Value = serde_json::from_str(lines[0]).unwrap();
        assert_eq!(meta_v["type"], "meta");
        assert_eq!(meta_v["scheme"], "vanilla");
        assert_eq!(meta_v["model"]["d"], 64);

        let step_v: serde_json::Value = serde_json::from_str(lines[1]).unwrap();
        let obj = step_v.as_object().unwrap();
        let mut keys: Vec<&String> = obj.keys().collect();
        keys.sort();
        assert_eq!(
            keys,
            ["grad_norm_postclip", "grad_norm_preclip", "lr", "step", "train_loss"]
        );

        let spike_v: serde_json::Value = serde_json::from_str(lines[2]).unwrap();
        assert_eq!(spike_v["type"], "spike");
        assert_eq!(spike_v["ratio"], 4.0);
    }

    #[test]
    fn rendering_is_deterministic() {
        let model = ModelConfig::toy();
        let train = TrainConfig::default();
        let meta = RunMetadata::new("scaled-embed", 3, &model, &train);
        let log: Vec<TrainLogRecord> = (0..5)
            .map(|s| TrainLogRecord {
                step: s,
                lr: 0.001 * s as f64,
                train_loss: 5.0 - s as f64 * 0.1,
                grad_norm_preclip: 1.5,
                grad_norm_postclip: 1.0,
                wall_ms: s as f64 * 17.0, // differs run to run; must not appear
            })
            .collect();
        let a = render_jsonl(&meta, &log, &[]);
        let mut log2 = log.clone();
        for r in &mut log2 {
            r.wall_ms += 999.0;
        }
        let b = render_jsonl(&meta, &log2, &[]);
        assert_eq!(a, b, "timing must not leak into the serialized log");
        assert!(!a.contains("wall_ms"));
    }
}
