//! Scheme comparison harness: initialize, report init-time bounds, train,
//! summarize: per scheme and seed.

use crate::bounds::{layerwise_bound_report, measure_shortcut_stats, BoundReport};
use crate::data::{BatchStream, Corpus};
use crate::error::Result;
use crate::model::config::ModelConfig;
use crate::model::params::init_parameters;
use crate::numerics::RandomSource;
use crate::scheme::SchemeSpec;
use crate::trainer::config::{TrainConfig, TrainStatus};
use crate::trainer::run::{train, TrainOutcome};

/// Summary of one (scheme, seed) run.
#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub scheme: String,
    pub seed: u64,
    pub lr_peak: f64,
    pub seq_len: usize,
    pub batch_size: usize,
    pub final_loss: Option<f64>,
    pub max_grad_norm: f64,
    pub spike_count: usize,
    pub status: String,
    pub layer1_ffn_bound: f64,
    pub layer1_attn_bound: f64,
}

#[derive(Debug, Clone, Default)]
pub struct CompareTable {
    pub rows: Vec<CompareRow>,
    /// Init-time bound report per row; `None` for rows that errored.
    pub reports: Vec<Option<BoundReport>>,
}

impl CompareTable {
    pub fn to_csv(&self) -> String {
        let mut s = String::from(
            "scheme,seed,lr_peak,seq_len,batch_size,final_loss,max_grad_norm,spike_count,status,layer1_ffn_bound,layer1_attn_bound\n",
        );
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{}\n",
                r.scheme,
                r.seed,
                r.lr_peak,
                r.seq_len,
                r.batch_size,
                r.final_loss.map_or("NA".to_string(), |v| v.to_string()),
                r.max_grad_norm,
                r.spike_count,
                r.status,
                r.layer1_ffn_bound,
                r.layer1_attn_bound
            ));
        }
        s
    }
}

/// Initializes one scheme, measures its init-time bound report, and trains.
/// All randomness is derived from `seed` so identical calls are identical.
pub fn run_scheme(
    scheme: &SchemeSpec,
    model_config: &ModelConfig,
    tconfig: &TrainConfig,
    corpus: &Corpus,
    seed: u64,
    probe_batches: usize,
) -> Result<(TrainOutcome, BoundReport)> {
    run_scheme_with_progress(scheme, model_config, tconfig, corpus, seed, probe_batches, None)
}

/// [`run_scheme`] with a per-step callback for live progress reporting.
pub fn run_scheme_with_progress(
    scheme: &SchemeSpec,
    model_config: &ModelConfig,
    tconfig: &TrainConfig,
    corpus: &Corpus,
    seed: u64,
    probe_batches: usize,
    on_step: Option<&mut dyn FnMut(&crate::trainer::config::TrainLogRecord)>,
) -> Result<(TrainOutcome, BoundReport)> {
    let config = model_config.clone().with_embed_mode(scheme.embed_mode);
    let mut root = RandomSource::new(seed);
    let mut init_rng = root.fork();
    let mut probe_rng = root.fork();
    let data_rng = root.fork();
    let model_seed = root.next_u64();

    let params = init_parameters(&config, scheme.initializer, &mut init_rng)?;
    let stats = measure_shortcut_stats(&params, &config, probe_batches, &mut probe_rng)?;
    let report = layerwise_bound_report(&params, &config, &stats, &scheme.name)?;

    let mut stream = BatchStream::new(
        corpus.clone(),
        tconfig.batch_size,
        config.seq_len,
        data_rng,
    )?;
    let mut tc = tconfig.clone();
    tc.seed = model_seed;
    let outcome = train(params, &config, &tc, &mut stream, on_step)?;
    Ok((outcome, report))
}

fn row_from_outcome(
    scheme: &SchemeSpec,
    seed: u64,
    tconfig: &TrainConfig,
    config: &ModelConfig,
    outcome: &TrainOutcome,
    report: &BoundReport,
) -> CompareRow {
    CompareRow {
        scheme: scheme.name.clone(),
        seed,
        lr_peak: tconfig.lr_peak,
        seq_len: config.seq_len,
        batch_size: tconfig.batch_size,
        final_loss: outcome.final_loss(),
        max_grad_norm: outcome.max_grad_norm(),
        spike_count: outcome.spikes.len(),
        status: match outcome.status {
            TrainStatus::Completed => "completed".to_string(),
            TrainStatus::Diverged => format!(
                "diverged@{}",
                outcome.diverged_at.map_or(0, |s| s)
            ),
        },
        layer1_ffn_bound: report.layers.first().map_or(f64::NAN, |l| l.ffn_bound),
        layer1_attn_bound: report.layers.first().map_or(f64::NAN, |l| l.attn_bound),
    }
}

/// Full scheme x seed comparison. Failures of individual runs become rows
/// with an `error:` status instead of aborting the sweep.
pub fn compare_schemes(
    schemes: &[SchemeSpec],
    model_config: &ModelConfig,
    tconfig: &TrainConfig,
    corpus: &Corpus,
    seeds: &[u64],
    probe_batches: usize,
) -> Result<CompareTable> {
    let mut table = CompareTable::default();
    for scheme in schemes {
        for &seed in seeds {
            match run_scheme(scheme, model_config, tconfig, corpus, seed, probe_batches) {
                Ok((outcome, report)) => {
                    let config = model_config.clone().with_embed_mode(scheme.embed_mode);
                    table
                        .rows
                        .push(row_from_outcome(scheme, seed, tconfig, &config, &outcome, &report));
                    table.reports.push(Some(report));
                }
                Err(e) => {
                    table.rows.push(CompareRow {
                        scheme: scheme.name.clone(),
                        seed,
                        lr_peak: tconfig.lr_peak,
                        seq_len: model_config.seq_len,
                        batch_size: tconfig.batch_size,
                        final_loss: None,
                        max_grad_norm: f64::NAN,
                        spike_count: 0,
                        status: format!("error: {}", e.to_string().replace(',', ";")),
                        layer1_ffn_bound: f64::NAN,
                        layer1_attn_bound: f64::NAN,
                    });
                    table.reports.push(None);
                }
            }
        }
    }
    Ok(table)
}
