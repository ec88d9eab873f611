//! Acceptance suite: the exit criteria of this artifact, one test per
//! criterion, each printing a PASS line with its measured values (run with
//! `--nocapture` to see them). Tolerances are pinned in the assertions.

mod common;

use common::rel_err;
use gradbound::bounds::{
    self, layer1_bound_from_init, ln_jacobian_analytic, probe_sublayer_jacobian,
    silu_derivative_max, streamed_bound_reports, zz_variance_mc, SublayerKind,
};
use gradbound::data::{synthetic_corpus, CorpusKind, PATTERN_NOISE};
use gradbound::model::config::{Activation, EmbedMode, ModelConfig, NormKind};
use gradbound::model::norm::{layer_norm, rms_norm};
use gradbound::model::params::{init_parameters, Initializer};
use gradbound::model::run_gradcheck;
use gradbound::numerics::{
    expected_spectral_norm, finite_diff_jacobian, gaussian_matrix, spectral_norm, RandomSource,
};
use gradbound::scheme::SchemeSpec;
use gradbound::trainer::{self, run_scheme, RunMetadata, TrainConfig, TrainStatus};
use gradbound::verify::sublayer_output_normality;

fn pass(criterion: &str, detail: String) {
    println!("ACCEPTANCE {criterion}: PASS ({detail})");
}

#[test]
fn criterion_01_zz_variance() {
    let mut rng = RandomSource::new(101);
    let z = zz_variance_mc(1024, 100_000, &mut rng).unwrap();
    assert!(
        (z.diag_var - 2.0).abs() <= 0.1,
        "diag variance {} outside 2 +/- 0.1",
        z.diag_var
    );
    assert!(
        (z.offdiag_var - 1.0).abs() <= 0.05,
        "offdiag variance {} outside 1 +/- 0.05",
        z.offdiag_var
    );
    pass(
        "01 zz-variance",
        format!("diag {:.4}, offdiag {:.4}", z.diag_var, z.offdiag_var),
    );
}

#[test]
fn criterion_02_spectral_norm_law() {
    let mut details = Vec::new();
    for (rows, cols) in [(256usize, 1024usize), (512, 2048)] {
        for sigma in [0.01, 0.02] {
            let mut sum = 0.0;
            for seed in 0..10u64 {
                let mut rng = RandomSource::new(1000 + 17 * seed);
                let m = gaussian_matrix(rows, cols, 0.0, sigma, &mut rng).unwrap();
                let est = spectral_norm(&m, 1e-6, 5000, &mut rng).unwrap();
                assert!(est.converged, "{rows}x{cols} sigma {sigma} seed {seed}");
                sum += est.value;
            }
            let mean = sum / 10.0;
            let law = expected_spectral_norm(sigma, rows, cols);
            let gap = rel_err(mean, law);
            assert!(
                gap <= 0.03,
                "{rows}x{cols} sigma {sigma}: mean {mean:.5} vs law {law:.5} (rel {gap:.4})"
            );
            details.push(format!("{rows}x{cols}/{sigma}: {gap:.4}"));
        }
    }
    pass("02 spectral-law", format!("relative gaps {}", details.join(", ")));
}

#[test]
fn criterion_03_ln_jacobian() {
    // Part 1: at d=1024, the normalization Jacobian spectral norm is 1/sigma
    // within 2%: for both mean-centered LN and the mean-free map.
    let d = 1024;
    let mut rng = RandomSource::new(301);
    let x: Vec<f64> = (0..d).map(|_| rng.standard_normal()).collect();
    let mean = x.iter().sum::<f64>() / d as f64;
    let sigma = (x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64).sqrt();

    let jac_ln = finite_diff_jacobian(|v| layer_norm(v).unwrap(), &x, 1e-6).unwrap();
    let norm_ln = spectral_norm(&jac_ln, 1e-8, 3000, &mut rng).unwrap().value;
    let gap_ln = rel_err(norm_ln, 1.0 / sigma);
    assert!(gap_ln <= 0.02, "LN: |J| {norm_ln:.5} vs 1/sigma {:.5}", 1.0 / sigma);

    let jac_rms = finite_diff_jacobian(|v| rms_norm(v).unwrap(), &x, 1e-6).unwrap();
    let norm_rms = spectral_norm(&jac_rms, 1e-8, 3000, &mut rng).unwrap().value;
    let gap_rms = rel_err(norm_rms, 1.0 / sigma);
    assert!(gap_rms <= 0.02, "RMS: |J| {norm_rms:.5} vs 1/sigma {:.5}", 1.0 / sigma);

    // Part 2: the analytic Jacobian matrix matches finite differences of the
    // mean-free normalization map within 1e-6 at d=16.
    let x16: Vec<f64> = (0..16).map(|_| rng.standard_normal()).collect();
    let analytic = ln_jacobian_analytic(&x16).unwrap();
    let fd = finite_diff_jacobian(|v| rms_norm(v).unwrap(), &x16, 1e-6).unwrap();
    let mut worst = 0.0_f64;
    for (a, b) in analytic.as_slice().iter().zip(fd.as_slice()) {
        worst = worst.max((a - b).abs());
    }
    assert!(worst <= 1e-6, "analytic vs finite differences: max gap {worst:.2e}");

    pass(
        "03 ln-jacobian",
        format!("norm gaps LN {gap_ln:.5} / RMS {gap_rms:.5}, matrix gap {worst:.2e}"),
    );
}

#[test]
fn criterion_04_gradient_exactness() {
    let activations = [
        Activation::Identity,
        Activation::ReLU,
        Activation::SiLU,
        Activation::SwiGLU,
    ];
    let norms = [NormKind::LayerNorm, NormKind::RmsNorm];
    let modes = [
        EmbedMode::Vanilla,
        EmbedMode::scaled_default(),
        EmbedMode::EmbedLn,
        EmbedMode::detach_default(),
    ];
    let mut worst = 0.0_f64;
    let mut worst_desc = String::new();
    let mut configs = 0;
    for activation in activations {
        for norm_kind in norms {
            for embed_mode in modes {
                let mut config = ModelConfig::toy();
                config.num_layers = 2;
                config.d = 16;
                config.d_ffn = 32;
                config.num_heads = 2;
                config.seq_len = 4;
                config.vocab_size = 24;
                config.dropout_rate = 0.0;
                config.activation = activation;
                config.norm_kind = norm_kind;
                config.embed_mode = embed_mode;
                for seed in 0..5u64 {
                    let report = run_gradcheck(&config, 4000 + 31 * seed, 1e-5).unwrap();
                    if report.max_rel_err > worst {
                        worst = report.max_rel_err;
                        worst_desc = format!(
                            "{}/{}/{} seed {} at {}",
                            activation.name(),
                            norm_kind.name(),
                            embed_mode.name(),
                            seed,
                            report.worst_tensor
                        );
                    }
                    assert!(
                        report.max_rel_err <= 1e-4,
                        "gradient mismatch {:.3e} in {}/{}/{} seed {seed} ({})",
                        report.max_rel_err,
                        activation.name(),
                        norm_kind.name(),
                        embed_mode.name(),
                        report.worst_tensor
                    );
                }
                configs += 1;
            }
        }
    }
    pass(
        "04 gradient-exactness",
        format!("{configs} configs x 5 seeds, worst rel err {worst:.2e} at {worst_desc}"),
    );
}

#[test]
fn criterion_05_inequality_soundness() {
    // 25 seeded toy models spanning all four activations and both norms.
    let combos: Vec<(Activation, NormKind)> = [
        Activation::Identity,
        Activation::ReLU,
        Activation::SiLU,
        Activation::SwiGLU,
    ]
    .into_iter()
    .flat_map(|a| {
        [NormKind::LayerNorm, NormKind::RmsNorm]
            .into_iter()
            .map(move |n| (a, n))
    })
    .collect();
    let shapes = [(16usize, 2usize, 4usize), (32, 4, 8), (64, 4, 8)];

    let mut min_slack = f64::INFINITY;
    let mut probes = 0;
    for model_idx in 0..25u64 {
        let (activation, norm_kind) = combos[model_idx as usize % combos.len()];
        let (d, h, l) = shapes[model_idx as usize % shapes.len()];
        let mut config = ModelConfig::toy();
        config.d = d;
        config.d_ffn = 2 * d;
        config.num_heads = h;
        config.seq_len = l;
        config.activation = activation;
        config.norm_kind = norm_kind;

        let mut rng = RandomSource::new(5000 + 97 * model_idx);
        let params = init_parameters(&config, Initializer::MegatronSmall, &mut rng).unwrap();
        let x = gaussian_matrix(d, l, 0.0, 1.0, &mut rng).unwrap();
        for kind in [SublayerKind::Ffn, SublayerKind::Attn] {
            let probe =
                probe_sublayer_jacobian(&params.layers[0], kind, &x, &config, &mut rng).unwrap();
            assert!(
                probe.slack >= -1e-6,
                "model {model_idx} ({}/{} d={d} L={l}) {kind:?}: empirical {:.5} > bound {:.5}",
                activation.name(),
                norm_kind.name(),
                probe.empirical,
                probe.bound
            );
            min_slack = min_slack.min(probe.slack);
            probes += 1;
        }
    }
    pass(
        "05 inequality-soundness",
        format!("{probes} probes over 25 models, min slack {min_slack:.4}"),
    );
}

#[test]
fn criterion_06_fig2_analytic_reproduction() {
    // Table-5 1.7B shape. Layer-1 values come from direct bound evaluation
    // with measured tensor stds and the (mode-transformed) embedding std as
    // the shallow-layer shortcut; orderings use streamed forward probes.
    let mut shape = ModelConfig::shape_1p7b();
    shape.seq_len = 32; // probe length for the ordering part
    let init_seed = 61;
    let token_seed = 62;

    let vanilla_b = layer1_bound_from_init(&shape, Initializer::MegatronSmall, init_seed).unwrap();
    assert!(
        rel_err(vanilla_b, 40.4) <= 0.10,
        "vanilla layer-1 bound {vanilla_b:.2} outside 40.4 +/- 10%"
    );
    let scaled_shape = shape.clone().with_embed_mode(EmbedMode::scaled_default());
    let scaled_b = layer1_bound_from_init(&scaled_shape, Initializer::MegatronSmall, init_seed).unwrap();
    assert!(
        rel_err(scaled_b, 1.82) <= 0.10,
        "scaled-embed layer-1 bound {scaled_b:.3} outside 1.82 +/- 10%"
    );

    let xavier_b = layer1_bound_from_init(&shape, Initializer::Xavier, init_seed).unwrap();
    assert!(
        xavier_b > vanilla_b,
        "xavier layer-1 bound {xavier_b:.2} not above megatron {vanilla_b:.2}"
    );

    let modes = vec![
        ("vanilla".to_string(), EmbedMode::Vanilla),
        ("embed-detach".to_string(), EmbedMode::detach_default()),
        ("scaled-embed".to_string(), EmbedMode::scaled_default()),
        ("embed-ln".to_string(), EmbedMode::EmbedLn),
    ];
    let reports = streamed_bound_reports(
        &shape,
        Initializer::MegatronSmall,
        &modes,
        1,
        init_seed,
        token_seed,
    )
    .unwrap();
    for layer in 0..shape.num_layers {
        let ffn = |i: usize| reports[i].layers[layer].ffn_bound;
        let attn = |i: usize| reports[i].layers[layer].attn_bound;
        for good in [2usize, 3] {
            for bad in [0usize, 1] {
                assert!(
                    ffn(good) < ffn(bad),
                    "layer {} ffn: {} ({:.3}) not below {} ({:.3})",
                    layer + 1,
                    reports[good].scheme,
                    ffn(good),
                    reports[bad].scheme,
                    ffn(bad)
                );
                assert!(
                    attn(good) < attn(bad),
                    "layer {} attn: {} ({:.3}) not below {} ({:.3})",
                    layer + 1,
                    reports[good].scheme,
                    attn(good),
                    reports[bad].scheme,
                    attn(bad)
                );
            }
        }
    }
    pass(
        "06 fig2-reproduction",
        format!(
            "layer-1 ffn bounds: vanilla {vanilla_b:.2} (~40.4), scaled {scaled_b:.3} (~1.82), xavier {xavier_b:.1}; orderings hold at all {} layers",
            shape.num_layers
        ),
    );
}

#[test]
fn criterion_07_silu_derivative_max() {
    let (argmax, max) = silu_derivative_max(0.0, 5.0, 1e-4).unwrap();
    assert!((argmax - 2.40).abs() <= 0.01, "argmax {argmax}");
    assert!((max - 1.0998).abs() <= 1e-3, "max {max}");
    pass(
        "07 silu-derivative",
        format!("max {max:.5} at x = {argmax:.4}"),
    );
}

#[test]
fn criterion_08_attention_variance_law() {
    let mut rng = RandomSource::new(801);
    let rows = bounds::attn_variance_vs_length(
        64,
        1e-4,
        1e-4,
        1.0,
        &[8, 16, 32, 64],
        1000,
        &mut rng,
    )
    .unwrap();
    let mut details = Vec::new();
    for row in &rows {
        let gap = rel_err(row.mc_variance, row.analytic);
        assert!(
            gap <= 0.15,
            "L={}: MC {:.3e} vs analytic {:.3e} (rel {gap:.3})",
            row.len,
            row.mc_variance,
            row.analytic
        );
        details.push(format!("L={}: {gap:.3}", row.len));
    }
    for pair in rows.windows(2) {
        let ratio = pair[1].mc_variance / pair[0].mc_variance;
        assert!(
            (ratio - 0.5).abs() <= 0.15 * 0.5,
            "doubling L={} -> {}: variance ratio {ratio:.3} not ~0.5",
            pair[0].len,
            pair[1].len
        );
    }
    pass(
        "08 attention-variance",
        format!("MC/analytic gaps {}", details.join(", ")),
    );
}

#[test]
fn criterion_09_width_instability_trend() {
    let mut bounds_by_width = Vec::new();
    for d in [256usize, 1024, 2304] {
        let mut config = ModelConfig::shape_1p7b();
        config.d = d;
        config.d_ffn = 4 * d;
        config.num_heads = 8;
        let b = layer1_bound_from_init(&config, Initializer::MegatronSmall, 91).unwrap();
        bounds_by_width.push((d, b));
    }
    for pair in bounds_by_width.windows(2) {
        assert!(
            pair[1].1 > pair[0].1,
            "bound at d={} ({:.2}) not above d={} ({:.2})",
            pair[1].0,
            pair[1].1,
            pair[0].0,
            pair[0].1
        );
    }
    pass(
        "09 width-trend",
        bounds_by_width
            .iter()
            .map(|(d, b)| format!("d={d}: {b:.2}"))
            .collect::<Vec<_>>()
            .join(", "),
    );
}

#[test]
fn criterion_10_toy_training_sanity() {
    let mut config = ModelConfig::toy(); // 2 layers, d=64, byte vocab, relu
    config.seq_len = 32;
    let mut tconfig = TrainConfig::default();
    tconfig.lr_peak = 1e-3;
    tconfig.total_steps = 500;
    tconfig.batch_size = 16;
    let corpus = synthetic_corpus(
        CorpusKind::RepeatingPattern,
        65536,
        PATTERN_NOISE,
        &mut RandomSource::new(1000),
    )
    .unwrap();
    let threshold = (256.0_f64).ln() / 2.0;
    let seeds = [11u64, 12, 13, 14, 15];

    let mut scaled_finals = Vec::new();
    let mut scaled_logs = Vec::new();
    let mut scaled_spikes = Vec::new();
    for &seed in &seeds {
        let (out, _) = run_scheme(
            &SchemeSpec::scaled_embed(),
            &config,
            &tconfig,
            &corpus,
            seed,
            1,
        )
        .unwrap();
        assert_eq!(
            out.status,
            TrainStatus::Completed,
            "seed {seed} diverged at {:?}",
            out.diverged_at
        );
        let final_loss = out.final_loss().unwrap();
        assert!(
            final_loss < threshold,
            "seed {seed}: final loss {final_loss:.3} >= ln(256)/2 = {threshold:.3}"
        );
        assert!(
            out.log[200].train_loss < out.log[1].train_loss,
            "seed {seed}: no improvement by step 200"
        );
        for r in &out.log {
            assert!(
                r.grad_norm_postclip <= r.grad_norm_preclip.min(tconfig.clip_norm) + 1e-6,
                "clip contract violated at step {}",
                r.step
            );
            assert_eq!(r.lr, trainer::lr_at(r.step, &tconfig).unwrap());
        }
        scaled_finals.push(final_loss);
        scaled_spikes.push(out.spikes.len());
        scaled_logs.push(out.log);
    }

    // Determinism: repeat the first seed and compare the serialized logs.
    let (rerun, _) = run_scheme(
        &SchemeSpec::scaled_embed(),
        &config,
        &tconfig,
        &corpus,
        seeds[0],
        1,
    )
    .unwrap();
    let scheme_cfg = config.clone().with_embed_mode(EmbedMode::scaled_default());
    let meta = RunMetadata::new("scaled-embed", seeds[0], &scheme_cfg, &tconfig);
    let first = trainer::render_jsonl(&meta, &scaled_logs[0], &[]);
    let second = trainer::render_jsonl(&meta, &rerun.log, &[]);
    assert_eq!(first, second, "rerun of seed {} not byte-identical", seeds[0]);

    // Vanilla at matched seeds: spike counts are reported, not asserted.
    let mut vanilla_report = Vec::new();
    for &seed in &seeds {
        let (out, _) =
            run_scheme(&SchemeSpec::vanilla(), &config, &tconfig, &corpus, seed, 1).unwrap();
        vanilla_report.push(format!(
            "seed {seed}: {} spikes, {}",
            out.spikes.len(),
            match out.status {
                TrainStatus::Completed => "completed".to_string(),
                TrainStatus::Diverged => format!("diverged@{:?}", out.diverged_at.unwrap_or(0)),
            }
        ));
    }

    pass(
        "10 toy-training",
        format!(
            "scaled-embed finals {:?} (all < {threshold:.3}), spikes {:?}; vanilla [{}]",
            scaled_finals
                .iter()
                .map(|v| format!("{v:.3}"))
                .collect::<Vec<_>>(),
            scaled_spikes,
            vanilla_report.join("; ")
        ),
    );
}

#[test]
fn criterion_11_sublayer_normality() {
    let mut config = ModelConfig::toy();
    config.d = 256;
    config.d_ffn = 1024;
    config.num_heads = 8;
    config.num_layers = 8;
    config.seq_len = 32;
    config.activation = Activation::Identity;
    // Maskless probes: causal masking makes the attention output variance
    // position-dependent, which pooled moments read as spurious kurtosis.
    config.causal_mask = false;
    let layers = sublayer_output_normality(&config, 64, 1101).unwrap();
    let mut worst_skew = 0.0_f64;
    let mut worst_kurt = 0.0_f64;
    for (idx, (attn, ffn)) in layers.iter().enumerate() {
        for (family, s) in [("attn", attn), ("ffn", ffn)] {
            assert!(
                s.skewness.abs() < 0.1,
                "layer {} {family}: |skew| {:.3} >= 0.1",
                idx + 1,
                s.skewness
            );
            assert!(
                s.excess_kurtosis.abs() < 0.3,
                "layer {} {family}: |kurt| {:.3} >= 0.3",
                idx + 1,
                s.excess_kurtosis
            );
            worst_skew = worst_skew.max(s.skewness.abs());
            worst_kurt = worst_kurt.max(s.excess_kurtosis.abs());
        }
    }
    pass(
        "11 normality",
        format!(
            "16 sub-layers over 64 sequences: worst |skew| {worst_skew:.3}, worst |kurt| {worst_kurt:.3}"
        ),
    );
}
