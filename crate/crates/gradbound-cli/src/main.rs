//! `gradbound`: spectral-norm gradient bounds and loss-spike experiments
//! for Pre-LN transformers, at desk scale.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::RunConfig;
use gradbound::scheme::SchemeSpec;
use gradbound::Error;

#[derive(Parser)]
#[command(
    name = "gradbound",
    version,
    about = "Analytic gradient-norm bounds, sub-layer Jacobian probes, and toy pre-training for Pre-LN transformers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the registered self-checks (exit 1 if any fails)
    Verify {
        /// Only run checks whose name contains this substring
        #[arg(long)]
        filter: Option<String>,
        /// Print only the machine-readable JSON summary
        #[arg(long)]
        json: bool,
    },
    /// Initialize schemes and write per-layer bound reports as CSV
    Bounds {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated scheme names (vanilla, embed-detach, embed-ln,
        /// scaled-embed, xavier, xavier-scaled)
        #[arg(long, required = true)]
        schemes: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train the configured scheme; write JSONL log, spike events,
    /// checkpoint, bound report, and summary
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the scheme named in the config file
        #[arg(long)]
        scheme: Option<String>,
    },
    /// Sweep schemes x seeds (x learning rates x sequence lengths) and
    /// write a comparison CSV plus init-time bound reports
    Compare {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, required = true)]
        schemes: String,
        /// Comma-separated seeds
        #[arg(long, required = true, value_delimiter = ',')]
        seeds: Vec<u64>,
        /// Comma-separated learning rates (default: the configured lr_peak)
        #[arg(long, value_delimiter = ',')]
        lrs: Option<Vec<f64>>,
        /// Comma-separated sequence lengths (default: the configured seq_len)
        #[arg(long, value_delimiter = ',')]
        seq_lens: Option<Vec<usize>>,
        /// Hold batch_size x seq_len constant across sequence lengths
        #[arg(long)]
        token_budget: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Output directory priority: --out flag, then GRADBOUND_OUT, then config.
fn resolve_out_dir(flag: Option<PathBuf>, config: &RunConfig) -> PathBuf {
    flag.or_else(|| std::env::var_os("GRADBOUND_OUT").map(PathBuf::from))
        .unwrap_or_else(|| config.out_dir.clone())
}

fn run(cli: Cli) -> Result<i32, Error> {
    match cli.command {
        Command::Verify { filter, json } => Ok(commands::cmd_verify(filter.as_deref(), json)),
        Command::Bounds {
            config,
            schemes,
            seed,
            out,
        } => {
            let config = RunConfig::load(&config)?;
            let schemes = SchemeSpec::parse_list(&schemes)?;
            let out_dir = resolve_out_dir(out, &config);
            commands::cmd_bounds(&config, &schemes, seed.unwrap_or(config.train.seed), &out_dir)?;
            Ok(0)
        }
        Command::Train {
            config,
            seed,
            out,
            scheme,
        } => {
            let mut config = RunConfig::load(&config)?;
            if let Some(name) = scheme {
                config.scheme = SchemeSpec::parse(&name)?;
            }
            let out_dir = resolve_out_dir(out, &config);
            commands::cmd_train(&config, &out_dir, seed.unwrap_or(config.train.seed))?;
            Ok(0)
        }
        Command::Compare {
            config,
            schemes,
            seeds,
            lrs,
            seq_lens,
            token_budget,
            out,
        } => {
            let config = RunConfig::load(&config)?;
            let schemes = SchemeSpec::parse_list(&schemes)?;
            let out_dir = resolve_out_dir(out, &config);
            let lrs = lrs.unwrap_or_else(|| vec![config.train.lr_peak]);
            let seq_lens = seq_lens.unwrap_or_else(|| vec![config.model.seq_len]);
            commands::cmd_compare(
                &config,
                &schemes,
                &seeds,
                &lrs,
                &seq_lens,
                token_budget,
                &out_dir,
            )?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
