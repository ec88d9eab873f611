//! Subcommand implementations. Exit codes: 0 for success (a diverged run is
//! a recorded outcome, not a failure), 1 for failed verification checks,
//! 2 for configuration/usage errors.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use gradbound::bounds::{layer1_bound_from_init, streamed_bound_reports, BoundReport};
use gradbound::data::{synthetic_corpus, Corpus};
use gradbound::model::{save_checkpoint, EmbedMode, Initializer, ModelConfig};
use gradbound::numerics::RandomSource;
use gradbound::scheme::SchemeSpec;
use gradbound::trainer::{self, compare_schemes, run_scheme_with_progress, RunMetadata};
use gradbound::verify::{default_checks, run_checks};
use gradbound::{Error, Result};

use crate::config::{DataSource, RunConfig};

pub fn cmd_verify(filter: Option<&str>, json_only: bool) -> i32 {
    let checks = default_checks();
    let summary = run_checks(&checks, filter);
    if !json_only {
        for outcome in &summary.outcomes {
            let flag = if outcome.passed { "PASS" } else { "FAIL" };
            println!("[{flag}] {}: {}", outcome.name, outcome.detail);
        }
    }
    println!("{}", summary.to_json());
    if summary.total == 0 {
        eprintln!("no checks matched the filter");
        return 2;
    }
    if summary.all_passed() {
        0
    } else {
        1
    }
}

pub fn build_corpus(data: &DataSource, seed: u64) -> Result<Corpus> {
    match data {
        DataSource::Synthetic { kind, length, noise } => {
            synthetic_corpus(*kind, *length, *noise, &mut RandomSource::new(seed))
        }
        DataSource::File(path) => Corpus::from_file(path),
    }
}

fn ensure_out_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

/// Probe-time model shape: the bound report is evaluated at the configured
/// probe length (default: the model sequence length).
fn probe_config(config: &RunConfig) -> ModelConfig {
    let mut model = config.model.clone();
    if let Some(len) = config.bounds.probe_len {
        model.seq_len = len;
    }
    model
}

pub fn cmd_bounds(
    config: &RunConfig,
    schemes: &[SchemeSpec],
    seed: u64,
    out_dir: &Path,
) -> Result<()> {
    if schemes.is_empty() {
        return Err(Error::Config("bounds needs at least one scheme".into()));
    }
    ensure_out_dir(out_dir)?;
    let probe_model = probe_config(config);
    let token_seed = seed.wrapping_add(1);

    // Schemes sharing an initializer share one sampled weight stream, so the
    // whole group is computed in a single pass over the layers.
    let mut by_init: BTreeMap<&'static str, (Initializer, Vec<(String, EmbedMode)>)> =
        BTreeMap::new();
    for scheme in schemes {
        by_init
            .entry(scheme.initializer.name())
            .or_insert_with(|| (scheme.initializer, Vec::new()))
            .1
            .push((scheme.name.clone(), scheme.embed_mode));
    }

    let mut reports: BTreeMap<String, BoundReport> = BTreeMap::new();
    for (initializer, modes) in by_init.values() {
        let group = streamed_bound_reports(
            &probe_model,
            *initializer,
            modes,
            config.bounds.probe_batches,
            seed,
            token_seed,
        )?;
        for report in group {
            reports.insert(report.scheme.clone(), report);
        }
    }

    for scheme in schemes {
        let report = reports
            .get(&scheme.name)
            .expect("every requested scheme was computed");
        let path = out_dir.join(format!("bounds-{}.csv", scheme.name));
        std::fs::write(&path, report.to_csv())?;
        let layer1 = &report.layers[0];
        let shallow = layer1_bound_from_init(
            &probe_model
                .clone()
                .with_embed_mode(scheme.embed_mode),
            scheme.initializer,
            seed,
        )?;
        println!(
            "{}: layer-1 ffn bound {:.4} (embedding-shortcut evaluation {:.4}), attn bound {:.4} -> {}",
            scheme.name,
            layer1.ffn_bound,
            shallow,
            layer1.attn_bound,
            path.display()
        );
    }
    Ok(())
}

pub fn cmd_train(config: &RunConfig, out_dir: &Path, seed: u64) -> Result<()> {
    ensure_out_dir(out_dir)?;
    // Resolved configuration beside the outputs, for reproduction.
    std::fs::write(out_dir.join("config-resolved.cfg"), config.to_config_text())?;
    let corpus = build_corpus(&config.data, config.train.seed)?;
    let scheme = &config.scheme;
    let log_every = config.train.log_every;

    let mut echo = |r: &trainer::TrainLogRecord| {
        if r.step % log_every == 0 {
            println!(
                "step {:>6}  lr {:.3e}  loss {:.4}  grad {:.4} -> {:.4}  ({:.0} ms)",
                r.step, r.lr, r.train_loss, r.grad_norm_preclip, r.grad_norm_postclip, r.wall_ms
            );
        }
    };
    let (outcome, report) = run_scheme_with_progress(
        scheme,
        &config.model,
        &config.train,
        &corpus,
        seed,
        config.bounds.probe_batches,
        Some(&mut echo),
    )?;

    let tag = format!("{}-seed{}", scheme.name, seed);
    let model_cfg = config.model.clone().with_embed_mode(scheme.embed_mode);

    let log_path = out_dir.join(format!("train-{tag}.jsonl"));
    let meta = RunMetadata::new(&scheme.name, seed, &model_cfg, &config.train);
    trainer::write_jsonl(&log_path, &meta, &outcome.log, &outcome.spikes)?;

    let ckpt_path = out_dir.join(format!("checkpoint-{tag}.ckpt"));
    save_checkpoint(&ckpt_path, &model_cfg, &outcome.params)?;

    let bounds_path = out_dir.join(format!("bounds-{tag}.csv"));
    std::fs::write(&bounds_path, report.to_csv())?;

    let summary = trainer::summary_json(&outcome);
    let summary_path = out_dir.join(format!("summary-{tag}.json"));
    std::fs::write(&summary_path, format!("{summary}\n"))?;

    println!("{summary}");
    println!(
        "wrote {}, {}, {}, {}",
        log_path.display(),
        ckpt_path.display(),
        bounds_path.display(),
        summary_path.display()
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_compare(
    config: &RunConfig,
    schemes: &[SchemeSpec],
    seeds: &[u64],
    lrs: &[f64],
    seq_lens: &[usize],
    token_budget: bool,
    out_dir: &Path,
) -> Result<()> {
    if schemes.is_empty() || seeds.is_empty() {
        return Err(Error::Config("compare needs schemes and seeds".into()));
    }
    ensure_out_dir(out_dir)?;
    let corpus = build_corpus(&config.data, config.train.seed)?;
    let base_tokens = config.train.batch_size * config.model.seq_len;

    let mut all_rows = Vec::new();
    let mut bound_files: BTreeMap<PathBuf, String> = BTreeMap::new();
    for &lr in lrs {
        for &seq_len in seq_lens {
            let mut model = config.model.clone();
            model.seq_len = seq_len;
            let mut tconfig = config.train.clone();
            tconfig.lr_peak = lr;
            if token_budget {
                if base_tokens % seq_len != 0 {
                    return Err(Error::Config(format!(
                        "token budget {base_tokens} is not a multiple of seq_len {seq_len}"
                    )));
                }
                tconfig.batch_size = base_tokens / seq_len;
            }
            if corpus.len() < seq_len + 1 {
                return Err(Error::Config(format!(
                    "corpus of {} bytes too short for seq_len {seq_len}",
                    corpus.len()
                )));
            }
            let table = compare_schemes(
                schemes,
                &model,
                &tconfig,
                &corpus,
                seeds,
                config.bounds.probe_batches,
            )?;
            for (row, report) in table.rows.iter().zip(table.reports.iter()) {
                if let Some(report) = report {
                    let path = out_dir.join(format!(
                        "bounds-{}-seed{}-L{}.csv",
                        row.scheme, row.seed, row.seq_len
                    ));
                    bound_files.insert(path, report.to_csv());
                }
            }
            all_rows.extend(table.rows);
        }
    }

    for (path, content) in &bound_files {
        std::fs::write(path, content)?;
    }

    let table = trainer::CompareTable {
        rows: all_rows,
        reports: Vec::new(),
    };
    let csv_path = out_dir.join("compare.csv");
    std::fs::write(&csv_path, table.to_csv())?;
    print!("{}", table.to_csv());
    println!(
        "wrote {} and {} bound report(s)",
        csv_path.display(),
        bound_files.len()
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corpus_kinds_build() {
        let synthetic = DataSource::Synthetic {
            kind: gradbound::data::CorpusKind::SeededMarkov,
            length: 1024,
            noise: 0.0,
        };
        let c = build_corpus(&synthetic, 9).unwrap();
        assert_eq!(c.len(), 1024);
        let c2 = build_corpus(&synthetic, 9).unwrap();
        assert_eq!(c.bytes, c2.bytes);
    }

    #[test]
    fn probe_config_overrides_seq_len() {
        let mut config = RunConfig::default();
        config.bounds.probe_len = Some(8);
        assert_eq!(probe_config(&config).seq_len, 8);
        config.bounds.probe_len = None;
        assert_eq!(probe_config(&config).seq_len, config.model.seq_len);
    }
}
