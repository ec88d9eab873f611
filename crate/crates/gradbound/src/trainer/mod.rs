//! Desk-scale pre-training: Adam with warmup+cosine schedule, global-norm
//! gradient clipping, per-step gradient-norm logging, spike detection, and
//! the scheme comparison harness.

mod compare;
mod config;
mod logio;
mod optim;
mod run;
mod schedule;
mod spikes;

pub use compare::{
    compare_schemes, run_scheme, run_scheme_with_progress, CompareRow, CompareTable,
};
pub use config::{Precision, SpikeEvent, TrainConfig, TrainLogRecord, TrainStatus};
pub use logio::{render_jsonl, summary_json, write_jsonl, RunMetadata, RunSummary,
    ARTIFACT_VERSION};
pub use optim::{adam_step, clip_gradients, global_grad_norm, ClipOutcome, OptimizerState,
    ADAM_EPSILON};
pub use run::{train, TrainOutcome};
pub use schedule::{lr_at, LR_FLOOR_FRACTION};
pub use spikes::{detect_spikes, DEFAULT_SPIKE_FACTOR, DEFAULT_SPIKE_WINDOW};
