//! Runnable self-checks behind the CLI `verify` subcommand.
//!
//! Each check is a named, deterministic pass/fail probe of one claim the
//! crate rests on: fast versions of the invariants the full test suite
//! pins down. The registry is data, so a caller (or a test) can run a
//! filtered subset or inject its own checks.

use std::panic::{catch_unwind, AssertUnwindSafe};

use serde::Serialize;

use crate::bounds;
use crate::data;
use crate::model;
use crate::model::config::{Activation, EmbedMode, ModelConfig, NormKind};
use crate::model::params::{init_parameters, Initializer, Parameters};
use crate::numerics::{
    expected_spectral_norm, finite_diff_jacobian, gaussian_matrix, spectral_norm, RandomSource,
};
use crate::trainer;

/// `Ok(detail)` on pass, `Err(reason)` on failure.
pub type CheckResult = Result<String, String>;

pub struct Check {
    pub name: &'static str,
    pub run: Box<dyn Fn() -> CheckResult + Send + Sync>,
}

impl Check {
    fn new(name: &'static str, run: impl Fn() -> CheckResult + Send + Sync + 'static) -> Self {
        Self {
            name,
            run: Box::new(run),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifySummary {
    pub total: usize,
    pub passed: usize,
    pub failed: usize,
    pub outcomes: Vec<CheckOutcome>,
}

impl VerifySummary {
    pub fn all_passed(&self) -> bool {
        self.failed == 0
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("summary serializes")
    }
}

/// Runs checks whose names contain `filter` (all when absent). A panicking
/// check is recorded as a failure, not a crash.
pub fn run_checks(checks: &[Check], filter: Option<&str>) -> VerifySummary {
    let mut outcomes = Vec::new();
    for check in checks {
        if let Some(f) = filter {
            if !check.name.contains(f) {
                continue;
            }
        }
        let result = catch_unwind(AssertUnwindSafe(|| (check.run)()));
        let outcome = match result {
            Ok(Ok(detail)) => CheckOutcome {
                name: check.name.to_string(),
                passed: true,
                detail,
            },
            Ok(Err(reason)) => CheckOutcome {
                name: check.name.to_string(),
                passed: false,
                detail: reason,
            },
            Err(panic) => CheckOutcome {
                name: check.name.to_string(),
                passed: false,
                detail: format!(
                    "panicked: {}",
                    panic
                        .downcast_ref::<String>()
                        .cloned()
                        .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                        .unwrap_or_else(|| "<non-string panic>".into())
                ),
            },
        };
        outcomes.push(outcome);
    }
    let passed = outcomes.iter().filter(|o| o.passed).count();
    VerifySummary {
        total: outcomes.len(),
        passed,
        failed: outcomes.len() - passed,
        outcomes,
    }
}

fn ensure(cond: bool, detail: String) -> CheckResult {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

/// The default registry.
pub fn default_checks() -> Vec<Check> {
    vec![
        Check::new("numerics-spectral-law", || {
            let mut rng = RandomSource::new(101);
            let mut worst = 0.0_f64;
            for seed in 0..3u64 {
                let mut srng = RandomSource::new(5000 + seed);
                let m = gaussian_matrix(256, 1024, 0.0, 0.02, &mut srng).map_err(|e| e.to_string())?;
                let est = spectral_norm(&m, 1e-6, 2000, &mut rng).map_err(|e| e.to_string())?;
                worst = worst.max(rel(est.value, expected_spectral_norm(0.02, 256, 1024)));
            }
            ensure(worst < 0.05, format!("worst relative gap {worst:.4} (< 0.05)"))
        }),
        Check::new("numerics-submultiplicativity", || {
            let mut rng = RandomSource::new(102);
            for _ in 0..8 {
                let a = gaussian_matrix(24, 30, 0.0, 1.0, &mut rng).map_err(|e| e.to_string())?;
                let b = gaussian_matrix(30, 18, 0.0, 1.0, &mut rng).map_err(|e| e.to_string())?;
                let na = spectral_norm(&a, 1e-8, 2000, &mut rng).map_err(|e| e.to_string())?.value;
                let nb = spectral_norm(&b, 1e-8, 2000, &mut rng).map_err(|e| e.to_string())?.value;
                let nab = spectral_norm(&a.matmul(&b), 1e-8, 2000, &mut rng)
                    .map_err(|e| e.to_string())?
                    .value;
                if nab > na * nb * (1.0 + 1e-6) {
                    return Err(format!("submultiplicativity violated: {nab} > {na}*{nb}"));
                }
            }
            Ok("8 random pairs satisfy |AB| <= |A||B|".into())
        }),
        Check::new("numerics-finite-diff", || {
            let mut rng = RandomSource::new(103);
            let a = gaussian_matrix(6, 9, 0.0, 1.0, &mut rng).map_err(|e| e.to_string())?;
            let x: Vec<f64> = (0..9).map(|_| rng.standard_normal()).collect();
            let jac = finite_diff_jacobian(|v| a.matvec(v), &x, 1e-5).map_err(|e| e.to_string())?;
            let worst = jac
                .as_slice()
                .iter()
                .zip(a.as_slice())
                .map(|(g, w)| (g - w).abs())
                .fold(0.0_f64, f64::max);
            ensure(worst < 1e-8, format!("max abs error {worst:.2e} (< 1e-8)"))
        }),
        Check::new("eq12-zz-variance", || {
            let mut rng = RandomSource::new(104);
            let z = bounds::zz_variance_mc(256, 20_000, &mut rng).map_err(|e| e.to_string())?;
            ensure(
                rel(z.diag_var, 2.0) < 0.10 && (z.offdiag_var - 1.0).abs() < 0.10,
                format!("diag {:.3} (~2), offdiag {:.3} (~1)", z.diag_var, z.offdiag_var),
            )
        }),
        Check::new("eq11-ln-jacobian", || {
            let mut rng = RandomSource::new(105);
            let x: Vec<f64> = (0..16).map(|_| rng.standard_normal()).collect();
            let analytic = bounds::ln_jacobian_analytic(&x).map_err(|e| e.to_string())?;
            let fd = finite_diff_jacobian(|v| model::norm::rms_norm(v).unwrap(), &x, 1e-6)
                .map_err(|e| e.to_string())?;
            let worst = analytic
                .as_slice()
                .iter()
                .zip(fd.as_slice())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0_f64, f64::max);
            ensure(worst < 1e-6, format!("max abs gap {worst:.2e} (< 1e-6)"))
        }),
        Check::new("eq13-ln-spectral", || {
            let mut rng = RandomSource::new(106);
            let x: Vec<f64> = (0..256).map(|_| rng.standard_normal()).collect();
            let jac = finite_diff_jacobian(|v| model::norm::layer_norm(v).unwrap(), &x, 1e-6)
                .map_err(|e| e.to_string())?;
            let norm = spectral_norm(&jac, 1e-8, 2000, &mut rng)
                .map_err(|e| e.to_string())?
                .value;
            let mean = x.iter().sum::<f64>() / 256.0;
            let sigma = (x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 256.0).sqrt();
            ensure(
                rel(norm, 1.0 / sigma) < 0.02,
                format!("|J| {:.4} vs 1/sigma {:.4}", norm, 1.0 / sigma),
            )
        }),
        Check::new("appf-silu-derivative-max", || {
            let (argmax, max) = bounds::silu_derivative_max(0.0, 5.0, 1e-3).map_err(|e| e.to_string())?;
            ensure(
                (argmax - 2.40).abs() < 0.01 && (max - 1.0998).abs() < 1e-3,
                format!("argmax {argmax:.4} (~2.40), max {max:.5} (~1.0998)"),
            )
        }),
        Check::new("gradcheck-small", || {
            let combos = [
                (Activation::Identity, NormKind::LayerNorm, EmbedMode::Vanilla),
                (Activation::ReLU, NormKind::RmsNorm, EmbedMode::scaled_default()),
                (Activation::SwiGLU, NormKind::LayerNorm, EmbedMode::EmbedLn),
            ];
            let mut worst = 0.0_f64;
            for (act, norm, mode) in combos {
                let mut config = ModelConfig::toy();
                config.d = 8;
                config.d_ffn = 16;
                config.num_heads = 2;
                config.seq_len = 3;
                config.vocab_size = 16;
                config.activation = act;
                config.norm_kind = norm;
                config.embed_mode = mode;
                let report = model::run_gradcheck(&config, 31, 1e-5).map_err(|e| e.to_string())?;
                worst = worst.max(report.max_rel_err);
            }
            ensure(worst < 1e-4, format!("worst rel err {worst:.2e} (< 1e-4)"))
        }),
        Check::new("ineq-ffn-probe", || {
            let mut worst = f64::INFINITY;
            for seed in 0..2u64 {
                let mut config = ModelConfig::toy();
                config.d = 16;
                config.d_ffn = 32;
                config.num_heads = 2;
                config.seq_len = 4;
                config.activation = if seed == 0 { Activation::Identity } else { Activation::SiLU };
                let mut rng = RandomSource::new(400 + seed);
                let params = init_parameters(&config, Initializer::MegatronSmall, &mut rng)
                    .map_err(|e| e.to_string())?;
                let x = gaussian_matrix(16, 4, 0.0, 1.0, &mut rng).map_err(|e| e.to_string())?;
                let probe = bounds::probe_sublayer_jacobian(
                    &params.layers[0],
                    bounds::SublayerKind::Ffn,
                    &x,
                    &config,
                    &mut rng,
                )
                .map_err(|e| e.to_string())?;
                worst = worst.min(probe.slack);
            }
            ensure(worst >= -1e-6, format!("min slack {worst:.3e} (>= -1e-6)"))
        }),
        Check::new("ineq-attn-probe", || {
            let mut worst = f64::INFINITY;
            for seed in 0..2u64 {
                let mut config = ModelConfig::toy();
                config.d = 16;
                config.d_ffn = 32;
                config.num_heads = 2;
                config.seq_len = 4;
                let mut rng = RandomSource::new(500 + seed);
                let params = init_parameters(&config, Initializer::MegatronSmall, &mut rng)
                    .map_err(|e| e.to_string())?;
                let x = gaussian_matrix(16, 4, 0.0, 1.0, &mut rng).map_err(|e| e.to_string())?;
                let probe = bounds::probe_sublayer_jacobian(
                    &params.layers[0],
                    bounds::SublayerKind::Attn,
                    &x,
                    &config,
                    &mut rng,
                )
                .map_err(|e| e.to_string())?;
                worst = worst.min(probe.slack);
            }
            ensure(worst >= -1e-6, format!("min slack {worst:.3e} (>= -1e-6)"))
        }),
        Check::new("appe-attn-variance", || {
            let mut rng = RandomSource::new(107);
            let rows = bounds::attn_variance_vs_length(32, 1e-4, 1e-4, 1.0, &[8, 16], 200, &mut rng)
                .map_err(|e| e.to_string())?;
            let mut worst = 0.0_f64;
            for row in &rows {
                worst = worst.max(rel(row.mc_variance, row.analytic));
            }
            ensure(worst < 0.25, format!("worst MC/analytic gap {worst:.3} (< 0.25)"))
        }),
        Check::new("bounds-ordering", || {
            let mut config = ModelConfig::toy();
            config.d = 128;
            config.d_ffn = 512;
            config.num_heads = 4;
            config.num_layers = 4;
            config.seq_len = 16;
            config.activation = Activation::Identity;
            let modes = vec![
                ("vanilla".to_string(), EmbedMode::Vanilla),
                ("scaled-embed".to_string(), EmbedMode::scaled_default()),
                ("embed-ln".to_string(), EmbedMode::EmbedLn),
                ("embed-detach".to_string(), EmbedMode::detach_default()),
            ];
            let reports = bounds::streamed_bound_reports(
                &config,
                Initializer::MegatronSmall,
                &modes,
                2,
                600,
                601,
            )
            .map_err(|e| e.to_string())?;
            let b = |i: usize| reports[i].layers[0].ffn_bound;
            let (vanilla, scaled, ln, detach) = (b(0), b(1), b(2), b(3));
            let xavier = bounds::layer1_bound_from_init(&config, Initializer::Xavier, 600)
                .map_err(|e| e.to_string())?;
            let megatron = bounds::layer1_bound_from_init(&config, Initializer::MegatronSmall, 600)
                .map_err(|e| e.to_string())?;
            ensure(
                scaled < vanilla && ln < vanilla && scaled < detach && ln < detach && xavier > megatron,
                format!(
                    "layer-1 ffn bounds: vanilla {vanilla:.2}, detach {detach:.2}, scaled {scaled:.3}, embed-ln {ln:.3}; xavier {xavier:.2} > megatron {megatron:.2}"
                ),
            )
        }),
        Check::new("bounds-width-trend", || {
            let mut prev = 0.0_f64;
            let mut values = Vec::new();
            for d in [256usize, 1024, 2304] {
                let mut config = ModelConfig::toy();
                config.d = d;
                config.d_ffn = 4 * d;
                config.num_heads = 8;
                config.num_layers = 24;
                config.activation = Activation::Identity;
                let bound = bounds::layer1_bound_from_init(&config, Initializer::MegatronSmall, 700)
                    .map_err(|e| e.to_string())?;
                if bound <= prev {
                    return Err(format!("bound at d={d} is {bound:.2}, not above {prev:.2}"));
                }
                values.push(format!("d={d}: {bound:.2}"));
                prev = bound;
            }
            Ok(format!("strictly increasing ({})", values.join(", ")))
        }),
        Check::new("trainer-lr-schedule", || {
            let tc = trainer::TrainConfig::default();
            let w = tc.warmup_steps();
            let at = |s| trainer::lr_at(s, &tc).unwrap();
            ensure(
                at(0) == 0.0
                    && at(w) == tc.lr_peak
                    && rel(at(tc.total_steps - 1), 0.1 * tc.lr_peak) < 0.01,
                format!("lr(0)=0, lr({w})=peak, lr(end)~0.1 peak"),
            )
        }),
        Check::new("trainer-clip-contract", || {
            let mut config = ModelConfig::toy();
            config.d = 8;
            config.d_ffn = 16;
            config.seq_len = 4;
            config.vocab_size = 12;
            let params = init_parameters(&config, Initializer::MegatronSmall, &mut RandomSource::new(1))
                .map_err(|e| e.to_string())?;
            let mut rng = RandomSource::new(108);
            for _ in 0..5 {
                let mut grads = params.zeros_like();
                for (_, t, _) in grads.tensors_mut() {
                    let (r, c) = (t.rows(), t.cols());
                    *t = gaussian_matrix(r, c, 0.0, 0.5, &mut rng).map_err(|e| e.to_string())?;
                }
                let out = trainer::clip_gradients(&mut grads, 1.0).map_err(|e| e.to_string())?;
                if out.postclip > out.preclip.min(1.0) + 1e-9 {
                    return Err(format!("post {} vs pre {} clip 1.0", out.postclip, out.preclip));
                }
            }
            Ok("post-clip norm = min(pre, clip) on 5 random draws".into())
        }),
        Check::new("trainer-determinism", || {
            let mut config = ModelConfig::toy();
            config.d = 16;
            config.d_ffn = 32;
            config.seq_len = 8;
            let corpus = data::synthetic_corpus(
                data::CorpusKind::RepeatingPattern,
                2048,
                data::PATTERN_NOISE,
                &mut RandomSource::new(109),
            )
            .map_err(|e| e.to_string())?;
            let mut tc = trainer::TrainConfig::default();
            tc.total_steps = 20;
            tc.batch_size = 2;
            let run = || -> Result<String, String> {
                let params =
                    init_parameters(&config, Initializer::MegatronSmall, &mut RandomSource::new(2))
                        .map_err(|e| e.to_string())?;
                let mut stream =
                    data::BatchStream::new(corpus.clone(), 2, 8, RandomSource::new(3))
                        .map_err(|e| e.to_string())?;
                let out = trainer::train(params, &config, &tc, &mut stream, None)
                    .map_err(|e| e.to_string())?;
                Ok(out
                    .log
                    .iter()
                    .map(|r| serde_json::to_string(r).unwrap())
                    .collect::<Vec<_>>()
                    .join("\n"))
            };
            let a = run()?;
            let b = run()?;
            ensure(a == b, "two seeded runs produce byte-identical logs".into())
        }),
        Check::new("trainer-embed-detach-step", || {
            embed_detach_single_step_contract().map_err(|e| e.to_string())?;
            Ok("one detached step = vanilla step with gamma-scaled embedding gradient".into())
        }),
        Check::new("trainer-spike-detector", || {
            let mut log: Vec<trainer::TrainLogRecord> = (0..120)
                .map(|s| trainer::TrainLogRecord {
                    step: s,
                    lr: 1e-3,
                    train_loss: 1.0,
                    grad_norm_preclip: 0.5,
                    grad_norm_postclip: 0.5,
                    wall_ms: 0.0,
                })
                .collect();
            log[90].grad_norm_preclip = 5.0;
            let events = trainer::detect_spikes(&log, 50, 3.0).map_err(|e| e.to_string())?;
            ensure(
                events.len() == 1 && events[0].step == 90,
                format!("one synthetic excursion detected at step 90 (got {})", events.len()),
            )
        }),
        Check::new("data-shift-alignment", || {
            let corpus = data::Corpus::new((0..=200u8).collect(), "check").map_err(|e| e.to_string())?;
            let mut stream = data::BatchStream::new(corpus.clone(), 4, 8, RandomSource::new(110))
                .map_err(|e| e.to_string())?;
            for _ in 0..10 {
                let b = stream.next_batch();
                for (i, t) in b.inputs.iter().zip(b.targets.iter()) {
                    if i[1..] != t[..7] {
                        return Err("targets are not inputs shifted by one".into());
                    }
                }
            }
            let budget = data::BatchStream::with_token_budget(corpus, 64, 16, RandomSource::new(1))
                .map_err(|e| e.to_string())?;
            ensure(
                budget.batch_size() * budget.seq_len() == 64,
                "windows shift-aligned; token budget holds batch*L constant".into(),
            )
        }),
        Check::new("model-checkpoint-roundtrip", || {
            let config = ModelConfig::toy();
            let params = init_parameters(&config, Initializer::MegatronSmall, &mut RandomSource::new(4))
                .map_err(|e| e.to_string())?;
            let dir = std::env::temp_dir().join(format!("gradbound-verify-{}", std::process::id()));
            std::fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
            let path = dir.join("check.ckpt");
            model::save_checkpoint(&path, &config, &params).map_err(|e| e.to_string())?;
            let (config2, params2) = model::load_checkpoint(&path).map_err(|e| e.to_string())?;
            let _ = std::fs::remove_dir_all(&dir);
            ensure(
                config == config2 && params == params2,
                "checkpoint round-trips bit-identically".into(),
            )
        }),
        Check::new("model-normality", || {
            let mut config = ModelConfig::toy();
            config.d = 256;
            config.d_ffn = 1024;
            config.num_heads = 8;
            config.num_layers = 2;
            config.seq_len = 32;
            config.activation = Activation::Identity;
            // Unmasked probes: under causal masking the attention output
            // variance scales with 1/(positions attended), and pooling
            // positions reads that variance mixture as spurious kurtosis.
            config.causal_mask = false;
            let layers = sublayer_output_normality(&config, 16, 111).map_err(|e| e.to_string())?;
            let mut worst_skew = 0.0_f64;
            let mut worst_kurt = 0.0_f64;
            for (attn, ffn) in &layers {
                for s in [attn, ffn] {
                    worst_skew = worst_skew.max(s.skewness.abs());
                    worst_kurt = worst_kurt.max(s.excess_kurtosis.abs());
                }
            }
            ensure(
                worst_skew < 0.1 && worst_kurt < 0.3,
                format!("worst |skew| {worst_skew:.3} (< 0.1), worst |kurt| {worst_kurt:.3} (< 0.3)"),
            )
        }),
    ]
}

/// Pooled moment statistics of one sub-layer family's outputs at init.
#[derive(Debug, Clone, Copy)]
pub struct NormalityStats {
    pub skewness: f64,
    pub excess_kurtosis: f64,
    pub samples: u64,
}

/// Per-layer skewness/kurtosis of attention-sublayer and FFN-sublayer
/// outputs, pooled over random probe sequences at initialization. Each
/// (layer, family) is pooled on its own: the two families have different
/// output variances, and the attention variance also drifts across depth,
/// so wider pooling would read those variance mixtures as spurious
/// kurtosis. Returned as `(attention, ffn)` stats per layer.
pub fn sublayer_output_normality(
    config: &ModelConfig,
    sequences: usize,
    seed: u64,
) -> crate::Result<Vec<(NormalityStats, NormalityStats)>> {
    let mut rng = RandomSource::new(seed);
    let params = init_parameters(config, Initializer::MegatronSmall, &mut rng)?;
    let n = config.num_layers;
    let mut attn_acc = vec![crate::numerics::MomentAccumulator::new(); n];
    let mut ffn_acc = vec![crate::numerics::MomentAccumulator::new(); n];
    let mut scratch = RandomSource::new(0);
    for _ in 0..sequences {
        let tokens: Vec<usize> = (0..config.seq_len)
            .map(|_| rng.index(config.vocab_size))
            .collect();
        let (_, cache) = model::model_forward(
            &tokens,
            &params,
            config,
            model::RunMode::Eval,
            &mut scratch,
        )?;
        for (i, lc) in cache.layers.iter().enumerate() {
            attn_acc[i].extend(lc.x_prime.sub(&lc.x).as_slice());
            ffn_acc[i].extend(lc.y.sub(&lc.x_prime).as_slice());
        }
    }
    let to_stats = |acc: &crate::numerics::MomentAccumulator| {
        let s = acc.stats();
        NormalityStats {
            skewness: s.skewness.unwrap_or(f64::NAN),
            excess_kurtosis: s.excess_kurtosis.unwrap_or(f64::NAN),
            samples: acc.count(),
        }
    };
    Ok((0..n)
        .map(|i| (to_stats(&attn_acc[i]), to_stats(&ffn_acc[i])))
        .collect())
}

/// One EmbedDetach optimizer step (at a nonzero learning rate) must move
/// every parameter exactly as the step pipeline does when fed the Vanilla
/// gradients with the embedding gradient scaled by gamma. The warmup
/// schedule makes lr(0) = 0, so the step runs directly rather than through
/// `train`: a step at lr 0 would verify nothing.
pub fn embed_detach_single_step_contract() -> crate::Result<()> {
    let mut config = ModelConfig::toy();
    config.d = 16;
    config.d_ffn = 32;
    config.num_heads = 2;
    config.seq_len = 8;
    let gamma = 0.1;

    let corpus = data::synthetic_corpus(
        data::CorpusKind::RepeatingPattern,
        1024,
        data::PATTERN_NOISE,
        &mut RandomSource::new(112),
    )?;
    // Batch of one: gamma-scaling commutes with gradient accumulation only
    // up to rounding, and this contract is about bit-exactness.
    let mut tc = trainer::TrainConfig::default();
    tc.batch_size = 1;
    tc.precision = trainer::Precision::Double;

    let params = init_parameters(&config, Initializer::MegatronSmall, &mut RandomSource::new(5))?;
    let batch = data::BatchStream::new(corpus, 1, 8, RandomSource::new(6))?.next_batch();

    // Gradients with frozen rng, per mode, from the same parameters.
    let grads_for = |mode: EmbedMode| -> crate::Result<crate::model::Gradients> {
        let cfg = config.clone().with_embed_mode(mode);
        let mut grads = params.zeros_like();
        let mut model_rng = RandomSource::new(tc.seed);
        for (inputs, targets) in batch.inputs.iter().zip(batch.targets.iter()) {
            let (logits, cache) = model::model_forward(
                inputs,
                &params,
                &cfg,
                model::RunMode::Train,
                &mut model_rng,
            )?;
            let (_, d_logits) = model::cross_entropy(&logits, targets)?;
            grads.accumulate(&model::model_backward(&cache, &params, &cfg, &d_logits)?);
        }
        grads.scale_all(1.0 / tc.batch_size as f64);
        Ok(grads)
    };
    let grads_vanilla = grads_for(EmbedMode::Vanilla)?;
    let grads_detached = grads_for(EmbedMode::EmbedDetach { gamma })?;

    // The detached gradients ARE the vanilla gradients with the embedding
    // scaled by gamma, bit for bit.
    let mut replay_grads = grads_vanilla;
    replay_grads.embedding.scale_in_place(gamma);
    for (a, b) in replay_grads
        .tensors()
        .iter()
        .zip(grads_detached.tensors().iter())
    {
        if a.tensor != b.tensor {
            return Err(crate::Error::InvalidArgument(format!(
                "gradient {} differs from the gamma-scaled vanilla gradient",
                a.name
            )));
        }
    }

    // One full clip + Adam step at a nonzero lr lands on the same
    // parameters through either route, and actually moves them.
    let step = |mut grads: crate::model::Gradients| -> crate::Result<Parameters> {
        let mut p = params.clone();
        let mut state = trainer::OptimizerState::new(&p);
        trainer::clip_gradients(&mut grads, tc.clip_norm)?;
        trainer::adam_step(&mut p, &grads, &mut state, 1e-3, &tc)?;
        Ok(p)
    };
    let stepped_detached = step(grads_detached)?;
    let stepped_replay = step(replay_grads)?;
    if stepped_detached != stepped_replay {
        return Err(crate::Error::InvalidArgument(
            "detached step differs from the gamma-scaled-gradient step".into(),
        ));
    }
    if stepped_detached.embedding == params.embedding {
        return Err(crate::Error::InvalidArgument(
            "step was a no-op; the contract check proved nothing".into(),
        ));
    }
    Ok(())
}
