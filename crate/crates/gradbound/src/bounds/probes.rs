//! Empirical probes: measured shortcut statistics, per-layer bound reports,
//! and finite-difference verification that actual sub-layer Jacobian norms
//! stay below the analytic bounds.

use crate::bounds::formulas::{
    attn_upper_bound, c_ffn, c_swiglu, ffn_upper_bound, jz_bound, SILU_DERIVATIVE_BOUND,
};
use crate::error::{Error, Result};
use crate::model::attention::{attention_forward, AttentionHeads};
use crate::model::config::{Activation, EmbedMode, ModelConfig};
use crate::model::ffn::ffn_forward_block;
use crate::model::forward::{embed_tokens, layer_forward, model_forward, RunMode};
use crate::model::norm::norm_forward_block;
use crate::model::params::{init_embedding, init_layer, Initializer, LayerParams, Parameters};
use crate::numerics::{
    finite_diff_jacobian, gaussian_matrix, pooled_std, pooled_std_many, spectral_norm,
    Matrix, MomentAccumulator, RandomSource,
};

/// Measured standard deviations of the two shortcuts of one layer, pooled
/// over positions, dimensions, and probe batches.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SublayerStats {
    /// 1-based layer index.
    pub layer: usize,
    /// Std of the attention shortcut x.
    pub sigma_x: f64,
    /// Std of the FFN shortcut x'.
    pub sigma_x_prime: f64,
    pub samples: u64,
}

/// One layer's bound evaluation with all its ingredients.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerBound {
    /// 1-based layer index.
    pub layer: usize,
    pub sigma_x: f64,
    pub sigma_x_prime: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    pub sigma_o: f64,
    pub sigma_v: Option<f64>,
    /// Pooled std over the query/key/value projections, fed to the J^Z bound.
    pub sigma_qkv: f64,
    /// The activation-specific FFN constant actually used.
    pub c_ffn: f64,
    pub jz_norm: f64,
    pub c_attn: f64,
    pub ffn_bound: f64,
    pub attn_bound: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub scheme: String,
    pub layers: Vec<LayerBound>,
}

impl BoundReport {
    /// Deterministic CSV: one header row, rows ordered by layer.
    pub fn to_csv(&self) -> String {
        let mut s =
            String::from("layer,sigma_x,sigma_x_prime,sigma1,sigma2,sigma_O,ffn_bound,attn_bound,scheme\n");
        for l in &self.layers {
            s.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                l.layer,
                l.sigma_x,
                l.sigma_x_prime,
                l.sigma1,
                l.sigma2,
                l.sigma_o,
                l.ffn_bound,
                l.attn_bound,
                self.scheme
            ));
        }
        s
    }
}

/// Forwards `probe_batches` random-token sequences in eval mode and records
/// the pooled per-layer stds of x and x'.
pub fn measure_shortcut_stats(
    params: &Parameters,
    config: &ModelConfig,
    probe_batches: usize,
    rng: &mut RandomSource,
) -> Result<Vec<SublayerStats>> {
    if probe_batches == 0 {
        return Err(Error::InvalidArgument("need at least one probe batch".into()));
    }
    let n = config.num_layers;
    let mut acc_x = vec![MomentAccumulator::new(); n];
    let mut acc_xp = vec![MomentAccumulator::new(); n];
    let mut scratch = RandomSource::new(0);
    for _ in 0..probe_batches {
        let tokens: Vec<usize> = (0..config.seq_len)
            .map(|_| rng.index(config.vocab_size))
            .collect();
        let (_, cache) = model_forward(&tokens, params, config, RunMode::Eval, &mut scratch)?;
        for (i, lc) in cache.layers.iter().enumerate() {
            acc_x[i].extend(lc.x.as_slice());
            acc_xp[i].extend(lc.x_prime.as_slice());
        }
    }
    Ok((0..n)
        .map(|i| SublayerStats {
            layer: i + 1,
            sigma_x: acc_x[i].std(),
            sigma_x_prime: acc_xp[i].std(),
            samples: acc_x[i].count(),
        })
        .collect())
}

fn layer_sigmas(layer: &LayerParams) -> (f64, f64, f64, Option<f64>, f64) {
    let sigma1 = pooled_std(&layer.w1);
    let sigma2 = pooled_std(&layer.w2);
    let sigma_o = pooled_std(&layer.w_o);
    let sigma_v = layer.v.as_ref().map(pooled_std);
    let sigma_qkv = pooled_std_many(
        layer
            .w_q
            .iter()
            .chain(layer.w_k.iter())
            .chain(layer.w_v.iter()),
    );
    (sigma1, sigma2, sigma_o, sigma_v, sigma_qkv)
}

fn layer_bound(
    config: &ModelConfig,
    layer_index: usize,
    stats: &SublayerStats,
    sigmas: (f64, f64, f64, Option<f64>, f64),
) -> Result<LayerBound> {
    let (sigma1, sigma2, sigma_o, sigma_v, sigma_qkv) = sigmas;
    let d = config.d;
    let ffn = ffn_upper_bound(
        sigma1,
        sigma2,
        stats.sigma_x_prime,
        d,
        config.d_ffn,
        config.activation,
        if config.activation == Activation::SwiGLU {
            sigma_v
        } else {
            None
        },
    )?;
    let jz = jz_bound(config.num_heads, config.seq_len, sigma_qkv, d, config.d_head());
    let attn = attn_upper_bound(sigma_o, stats.sigma_x, d, jz)?;
    let c_ffn_used = match config.activation {
        Activation::Identity => c_ffn(d, config.d_ffn),
        Activation::ReLU => c_ffn(d, config.d_ffn / 2),
        Activation::SiLU => SILU_DERIVATIVE_BOUND * c_ffn(d, config.d_ffn),
        Activation::SwiGLU => c_swiglu(d, config.d_ffn),
    };
    Ok(LayerBound {
        layer: layer_index,
        sigma_x: stats.sigma_x,
        sigma_x_prime: stats.sigma_x_prime,
        sigma1,
        sigma2,
        sigma_o,
        sigma_v,
        sigma_qkv,
        c_ffn: c_ffn_used,
        jz_norm: jz,
        c_attn: 2.0 * (d as f64).sqrt() * jz,
        ffn_bound: ffn,
        attn_bound: attn,
    })
}

/// Evaluates the per-layer bounds from measured parameter stds and measured
/// shortcut stds. `stats` must cover all layers.
pub fn layerwise_bound_report(
    params: &Parameters,
    config: &ModelConfig,
    stats: &[SublayerStats],
    scheme: &str,
) -> Result<BoundReport> {
    if stats.len() != config.num_layers {
        return Err(Error::InvalidArgument(format!(
            "stats cover {} layers, model has {}",
            stats.len(),
            config.num_layers
        )));
    }
    let mut layers = Vec::with_capacity(config.num_layers);
    for (i, layer) in params.layers.iter().enumerate() {
        layers.push(layer_bound(
            config,
            i + 1,
            &stats[i],
            layer_sigmas(layer),
        )?);
    }
    Ok(BoundReport {
        scheme: scheme.to_string(),
        layers,
    })
}

/// Probe token batches used by both the streamed and materialized report
/// paths, so the two agree bit for bit.
pub fn probe_token_batches(
    config: &ModelConfig,
    probe_batches: usize,
    rng: &mut RandomSource,
) -> Vec<Vec<usize>> {
    (0..probe_batches)
        .map(|_| {
            (0..config.seq_len)
                .map(|_| rng.index(config.vocab_size))
                .collect()
        })
        .collect()
}

/// Per-layer bound reports for several embedding treatments sharing one
/// sampled weight stream, computed layer by layer so shapes of billions of
/// parameters never exist in memory at once. The weight stream consumes the
/// rng exactly like `init_parameters`, so at sizes where the model fits the
/// output matches `measure_shortcut_stats` + `layerwise_bound_report`
/// bit for bit.
pub fn streamed_bound_reports(
    config: &ModelConfig,
    initializer: Initializer,
    modes: &[(String, EmbedMode)],
    probe_batches: usize,
    init_seed: u64,
    token_seed: u64,
) -> Result<Vec<BoundReport>> {
    if modes.is_empty() {
        return Err(Error::InvalidArgument("no embedding modes given".into()));
    }
    config.validate()?;
    let mut init_rng = RandomSource::new(init_seed);
    let embedding = init_embedding(config, initializer, &mut init_rng);
    let pos = if config.pos_embedding {
        Some(gaussian_matrix(
            config.seq_len,
            config.d,
            0.0,
            match initializer {
                Initializer::MegatronSmall => (2.0 / (5.0 * config.d as f64)).sqrt(),
                Initializer::Xavier => (2.0 / (config.seq_len + config.d) as f64).sqrt(),
            },
            &mut init_rng,
        )?)
    } else {
        None
    };

    let tokens = probe_token_batches(config, probe_batches, &mut RandomSource::new(token_seed));

    // Layer-0 inputs per mode per batch.
    let mut streams: Vec<Vec<Matrix>> = Vec::with_capacity(modes.len());
    let mut mode_configs = Vec::with_capacity(modes.len());
    for (_, mode) in modes {
        let cfg = config.clone().with_embed_mode(*mode);
        let mut xs = Vec::with_capacity(probe_batches);
        for batch in &tokens {
            let (x, _, _) = embed_tokens(&embedding, pos.as_ref(), None, &cfg, batch)?;
            xs.push(x);
        }
        streams.push(xs);
        mode_configs.push(cfg);
    }

    let mut scratch = RandomSource::new(0);
    let mut per_mode_layers: Vec<Vec<LayerBound>> = vec![Vec::new(); modes.len()];
    for layer_idx in 0..config.num_layers {
        let layer = init_layer(config, initializer, &mut init_rng);
        let sigmas = layer_sigmas(&layer);
        for (m, xs) in streams.iter_mut().enumerate() {
            let mut acc_x = MomentAccumulator::new();
            let mut acc_xp = MomentAccumulator::new();
            for x in xs.iter_mut() {
                acc_x.extend(x.as_slice());
                let (y, cache) =
                    layer_forward(x, &layer, &mode_configs[m], RunMode::Eval, &mut scratch)?;
                acc_xp.extend(cache.x_prime.as_slice());
                *x = y;
            }
            let stats = SublayerStats {
                layer: layer_idx + 1,
                sigma_x: acc_x.std(),
                sigma_x_prime: acc_xp.std(),
                samples: acc_x.count(),
            };
            per_mode_layers[m].push(layer_bound(config, layer_idx + 1, &stats, sigmas)?);
        }
    }

    Ok(modes
        .iter()
        .zip(per_mode_layers)
        .map(|((name, _), layers)| BoundReport {
            scheme: name.clone(),
            layers,
        })
        .collect())
}

/// Std of the embedding table after the embedding treatment: the
/// shallow-layer stand-in for the shortcut std (at layer 1 the shortcut is
/// essentially the embedding).
pub fn embedding_shortcut_std(embedding: &Matrix, config: &ModelConfig) -> Result<f64> {
    match config.embed_mode {
        EmbedMode::Vanilla | EmbedMode::EmbedDetach { .. } => Ok(pooled_std(embedding)),
        EmbedMode::ScaledEmbed { .. } => {
            Ok(config.embed_mode.forward_scale(config.d) * pooled_std(embedding))
        }
        EmbedMode::EmbedLn => {
            let mut acc = MomentAccumulator::new();
            for r in 0..embedding.rows() {
                let normalized = crate::model::norm::normalize(config.norm_kind, embedding.row(r))?;
                acc.extend(&normalized);
            }
            Ok(acc.std())
        }
    }
}

/// Layer-1 FFN bound straight from sampled tensors, with the embedding std
/// as the shortcut std. Streams only the embedding and the first layer, so
/// it runs at any width.
pub fn layer1_bound_from_init(
    config: &ModelConfig,
    initializer: Initializer,
    init_seed: u64,
) -> Result<f64> {
    config.validate()?;
    let mut rng = RandomSource::new(init_seed);
    let embedding = init_embedding(config, initializer, &mut rng);
    if config.pos_embedding {
        return Err(Error::InvalidArgument(
            "layer1_bound_from_init expects no positional table".into(),
        ));
    }
    let layer = init_layer(config, initializer, &mut rng);
    let (sigma1, sigma2, _, sigma_v, _) = layer_sigmas(&layer);
    let sigma_shortcut = embedding_shortcut_std(&embedding, config)?;
    ffn_upper_bound(
        sigma1,
        sigma2,
        sigma_shortcut,
        config.d,
        config.d_ffn,
        config.activation,
        if config.activation == Activation::SwiGLU {
            sigma_v
        } else {
            None
        },
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SublayerKind {
    Ffn,
    Attn,
}

#[derive(Debug, Clone)]
pub struct JacobianProbe {
    pub sublayer: SublayerKind,
    /// Spectral norm of the finite-difference Jacobian of the residual block.
    pub empirical: f64,
    /// Analytic bound with stds measured from the tensors and the probe input.
    pub bound: f64,
    /// `bound - empirical`; the inequality holds when this is >= -tol.
    pub slack: f64,
    pub sigma_shortcut: f64,
}

const PROBE_MAX_D: usize = 64;
const PROBE_MAX_L: usize = 8;

/// Measures the actual residual-block Jacobian spectral norm at `x` by
/// finite differences and pairs it with the analytic bound.
///
/// The attention bound is derived under a uniform-attention hypothesis, so
/// the attention probe zeroes the query projections (weights become exactly
/// uniform) and runs unmasked; the J^Z bound gets the pooled key/value std.
pub fn probe_sublayer_jacobian(
    layer: &LayerParams,
    sublayer: SublayerKind,
    x: &Matrix,
    config: &ModelConfig,
    rng: &mut RandomSource,
) -> Result<JacobianProbe> {
    let d = x.rows();
    let l = x.cols();
    if d > PROBE_MAX_D || l > PROBE_MAX_L {
        return Err(Error::InvalidDimension(format!(
            "probe dimensions {d}x{l} exceed the {PROBE_MAX_D}x{PROBE_MAX_L} finite-difference guard"
        )));
    }
    if d != config.d {
        return Err(Error::ShapeMismatch("probe input width != config.d".into()));
    }
    let sigma_shortcut = pooled_std(x);
    if sigma_shortcut == 0.0 {
        return Err(Error::DegenerateNorm("constant probe input".into()));
    }
    let (sigma1, sigma2, sigma_o, sigma_v, _) = layer_sigmas(layer);

    let (empirical, bound) = match sublayer {
        SublayerKind::Ffn => {
            let f = |flat: &[f64]| -> Vec<f64> {
                let xm = Matrix::from_vec_unchecked(d, l, flat.to_vec());
                let (u, _) =
                    norm_forward_block(config.norm_kind, &xm, layer.ffn_norm.as_ref()).unwrap();
                let (ffn, _) =
                    ffn_forward_block(&u, &layer.w1, &layer.w2, layer.v.as_ref(), config.activation)
                        .unwrap();
                xm.add(&ffn).as_slice().to_vec()
            };
            let jac = finite_diff_jacobian(f, x.as_slice(), 1e-5)?;
            let est = spectral_norm(&jac, 1e-7, 2000, rng)?;
            let bound = ffn_upper_bound(
                sigma1,
                sigma2,
                sigma_shortcut,
                config.d,
                config.d_ffn,
                config.activation,
                if config.activation == Activation::SwiGLU {
                    sigma_v
                } else {
                    None
                },
            )?;
            (est.value, bound)
        }
        SublayerKind::Attn => {
            let zero_q: Vec<Matrix> = layer
                .w_q
                .iter()
                .map(|m| Matrix::zeros(m.rows(), m.cols()))
                .collect();
            let sigma_kv = pooled_std_many(layer.w_k.iter().chain(layer.w_v.iter()));
            let f = |flat: &[f64]| -> Vec<f64> {
                let xm = Matrix::from_vec_unchecked(d, l, flat.to_vec());
                let (u, _) =
                    norm_forward_block(config.norm_kind, &xm, layer.attn_norm.as_ref()).unwrap();
                let heads = AttentionHeads {
                    w_q: &zero_q,
                    w_k: &layer.w_k,
                    w_v: &layer.w_v,
                    w_o: &layer.w_o,
                };
                let attn = attention_forward(&u, &heads, false).unwrap();
                xm.add(&attn).as_slice().to_vec()
            };
            let jac = finite_diff_jacobian(f, x.as_slice(), 1e-5)?;
            let est = spectral_norm(&jac, 1e-7, 2000, rng)?;
            let jz = jz_bound(config.num_heads, l, sigma_kv, config.d, config.d_head());
            let bound = attn_upper_bound(sigma_o, sigma_shortcut, config.d, jz)?;
            (est.value, bound)
        }
    };

    Ok(JacobianProbe {
        sublayer,
        empirical,
        bound,
        slack: bound - empirical,
        sigma_shortcut,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::params::init_parameters;

    #[test]
    fn shortcut_stats_track_the_embedding_scale() {
        let mut config = ModelConfig::toy();
        config.num_layers = 2;
        config.d = 128;
        config.d_ffn = 512;
        config.num_heads = 4;
        let params =
            init_parameters(&config, Initializer::MegatronSmall, &mut RandomSource::new(3))
                .unwrap();

        let stats =
            measure_shortcut_stats(&params, &config, 4, &mut RandomSource::new(77)).unwrap();
        assert_eq!(stats.len(), 2);
        let embed_std = pooled_std(&params.embedding);
        let rel = (stats[0].sigma_x - embed_std).abs() / embed_std;
        assert!(rel < 0.10, "layer-1 sigma_x {} vs embed {}", stats[0].sigma_x, embed_std);

        let cfg_ln = config.clone().with_embed_mode(EmbedMode::EmbedLn);
        let stats_ln =
            measure_shortcut_stats(&params, &cfg_ln, 4, &mut RandomSource::new(77)).unwrap();
        assert!((stats_ln[0].sigma_x - 1.0).abs() < 0.10);
    }

    #[test]
    fn report_row_count_and_zero_model() {
        let mut config = ModelConfig::toy();
        config.num_layers = 3;
        let mut params =
            init_parameters(&config, Initializer::MegatronSmall, &mut RandomSource::new(4))
                .unwrap();
        for l in &mut params.layers {
            l.w1 = Matrix::zeros(l.w1.rows(), l.w1.cols());
            l.w2 = Matrix::zeros(l.w2.rows(), l.w2.cols());
            l.w_o = Matrix::zeros(l.w_o.rows(), l.w_o.cols());
        }
        let stats =
            measure_shortcut_stats(&params, &config, 2, &mut RandomSource::new(5)).unwrap();
        let report = layerwise_bound_report(&params, &config, &stats, "zeroed").unwrap();
        assert_eq!(report.layers.len(), 3);
        for l in &report.layers {
            assert_eq!(l.ffn_bound, 1.0);
            assert_eq!(l.attn_bound, 1.0);
        }
        // Missing stats rejected.
        assert!(layerwise_bound_report(&params, &config, &stats[..2], "x").is_err());
    }

    #[test]
    fn scaled_embed_shrinks_the_layer1_ffn_bound() {
        let mut config = ModelConfig::toy();
        config.d = 256;
        config.d_ffn = 1024;
        config.num_heads = 8;
        config.num_layers = 8;
        config.activation = Activation::Identity;
        let params =
            init_parameters(&config, Initializer::MegatronSmall, &mut RandomSource::new(6))
                .unwrap();

        let mut bounds = Vec::new();
        for mode in [EmbedMode::Vanilla, EmbedMode::scaled_default()] {
            let cfg = config.clone().with_embed_mode(mode);
            let stats =
                measure_shortcut_stats(&params, &cfg, 2, &mut RandomSource::new(9)).unwrap();
            let report = layerwise_bound_report(&params, &cfg, &stats, mode.name()).unwrap();
            bounds.push(report.layers[0].ffn_bound);
        }
        assert!(
            bounds[1] < bounds[0],
            "scaled {} must sit below vanilla {}",
            bounds[1],
            bounds[0]
        );
    }

    #[test]
    fn streamed_reports_match_materialized_reports_exactly() {
        let mut config = ModelConfig::toy();
        config.num_layers = 3;
        config.d = 32;
        config.d_ffn = 64;
        config.num_heads = 4;
        config.seq_len = 8;
        let init_seed = 42;
        let token_seed = 43;

        let modes = vec![
            ("vanilla".to_string(), EmbedMode::Vanilla),
            ("scaled-embed".to_string(), EmbedMode::scaled_default()),
            ("embed-ln".to_string(), EmbedMode::EmbedLn),
        ];
        let streamed = streamed_bound_reports(
            &config,
            Initializer::MegatronSmall,
            &modes,
            2,
            init_seed,
            token_seed,
        )
        .unwrap();

        let params = init_parameters(
            &config,
            Initializer::MegatronSmall,
            &mut RandomSource::new(init_seed),
        )
        .unwrap();
        for (i, (name, mode)) in modes.iter().enumerate() {
            let cfg = config.clone().with_embed_mode(*mode);
            let stats =
                measure_shortcut_stats(&params, &cfg, 2, &mut RandomSource::new(token_seed))
                    .unwrap();
            let report = layerwise_bound_report(&params, &cfg, &stats, name).unwrap();
            assert_eq!(streamed[i], report, "mode {name}");
        }
    }

    #[test]
    fn csv_shape_is_stable() {
        let mut config = ModelConfig::toy();
        config.num_layers = 2;
        let params =
            init_parameters(&config, Initializer::MegatronSmall, &mut RandomSource::new(7))
                .unwrap();
        let stats =
            measure_shortcut_stats(&params, &config, 1, &mut RandomSource::new(8)).unwrap();
        let report = layerwise_bound_report(&params, &config, &stats, "vanilla").unwrap();
        let csv = report.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(
            lines[0],
            "layer,sigma_x,sigma_x_prime,sigma1,sigma2,sigma_O,ffn_bound,attn_bound,scheme"
        );
        assert!(lines[1].starts_with("1,"));
        assert!(lines[1].ends_with(",vanilla"));
    }

    #[test]
    fn zeroed_sublayer_probe_has_zero_slack() {
        let mut config = ModelConfig::toy();
        config.d = 16;
        config.d_ffn = 32;
        config.num_heads = 2;
        config.seq_len = 4;
        let mut params =
            init_parameters(&config, Initializer::MegatronSmall, &mut RandomSource::new(10))
                .unwrap();
        let layer = &mut params.layers[0];
        layer.w1 = Matrix::zeros(32, 16);
        layer.w2 = Matrix::zeros(16, 32);
        layer.w_o = Matrix::zeros(16, 16);
        let mut rng = RandomSource::new(11);
        let x = gaussian_matrix(16, 4, 0.0, 1.0, &mut rng).unwrap();
        for kind in [SublayerKind::Ffn, SublayerKind::Attn] {
            let probe =
                probe_sublayer_jacobian(&params.layers[0], kind, &x, &config, &mut rng).unwrap();
            assert!((probe.empirical - 1.0).abs() < 1e-6, "{kind:?}");
            assert_eq!(probe.bound, 1.0);
            assert!(probe.slack.abs() < 1e-6);
        }
    }

    #[test]
    fn random_small_models_never_violate_the_bounds() {
        for seed in 0..5u64 {
            let mut config = ModelConfig::toy();
            config.d = 32;
            config.d_ffn = 64;
            config.num_heads = 2;
            config.seq_len = 4;
            config.activation = Activation::Identity;
            let mut rng = RandomSource::new(100 + seed);
            let params =
                init_parameters(&config, Initializer::MegatronSmall, &mut rng).unwrap();
            let x = gaussian_matrix(32, 4, 0.0, 1.0, &mut rng).unwrap();
            for kind in [SublayerKind::Ffn, SublayerKind::Attn] {
                let probe =
                    probe_sublayer_jacobian(&params.layers[0], kind, &x, &config, &mut rng)
                        .unwrap();
                assert!(
                    probe.slack >= -1e-6,
                    "seed {seed} {kind:?}: empirical {} vs bound {}",
                    probe.empirical,
                    probe.bound
                );
            }
        }
    }

    #[test]
    fn probe_guards_against_large_dimensions() {
        let mut config = ModelConfig::toy();
        config.d = 128;
        config.num_heads = 4;
        let params =
            init_parameters(&config, Initializer::MegatronSmall, &mut RandomSource::new(12))
                .unwrap();
        let x = Matrix::zeros(128, 4);
        let err = probe_sublayer_jacobian(
            &params.layers[0],
            SublayerKind::Ffn,
            &x,
            &config,
            &mut RandomSource::new(1),
        );
        assert!(err.is_err());
    }

    #[test]
    fn layer1_ordering_holds_at_every_width() {
        // With identical seeds, the layer-1 FFN bound under scaled-embed and
        // embed-ln sits strictly below vanilla and embed-detach, at every
        // width studied; xavier sits strictly above vanilla.
        for d in [256usize, 1024, 2304] {
            let mut config = ModelConfig::toy();
            config.d = d;
            config.d_ffn = 4 * d;
            config.num_heads = 8;
            config.num_layers = 24;
            config.activation = Activation::Identity;
            let bound = |mode: EmbedMode, init: Initializer| {
                layer1_bound_from_init(&config.clone().with_embed_mode(mode), init, 555).unwrap()
            };
            let vanilla = bound(EmbedMode::Vanilla, Initializer::MegatronSmall);
            let detach = bound(EmbedMode::detach_default(), Initializer::MegatronSmall);
            let scaled = bound(EmbedMode::scaled_default(), Initializer::MegatronSmall);
            let ln = bound(EmbedMode::EmbedLn, Initializer::MegatronSmall);
            let xavier = bound(EmbedMode::Vanilla, Initializer::Xavier);
            for good in [scaled, ln] {
                assert!(good < vanilla && good < detach, "d={d}: {good} vs {vanilla}/{detach}");
            }
            assert!(xavier > vanilla, "d={d}: xavier {xavier} vs vanilla {vanilla}");
            // Detach shares the vanilla forward, hence the vanilla bound.
            assert_eq!(vanilla, detach);
        }
    }

    #[test]
    fn larger_embedding_scales_keep_shrinking_the_bound() {
        // Scaling factors beyond sqrt(d) (embedding std pushed toward 5)
        // are plain configuration; the layer-1 bound keeps falling.
        let mut config = ModelConfig::toy();
        config.d = 256;
        config.d_ffn = 1024;
        config.num_heads = 8;
        config.num_layers = 4;
        config.activation = Activation::Identity;
        let sqrt_d = (config.d as f64).sqrt();
        let mut previous = f64::INFINITY;
        for factor in [1.0, sqrt_d, 5.0 * sqrt_d / (2.0_f64 / 5.0).sqrt()] {
            let cfg = config
                .clone()
                .with_embed_mode(EmbedMode::ScaledEmbed { factor: Some(factor) });
            let bound = layer1_bound_from_init(&cfg, Initializer::MegatronSmall, 77).unwrap();
            assert!(bound < previous, "factor {factor}: {bound} !< {previous}");
            previous = bound;
        }
        // The last factor targets embedding std ~5.
        let mut rng = RandomSource::new(77);
        let cfg = config.clone().with_embed_mode(EmbedMode::ScaledEmbed {
            factor: Some(5.0 * sqrt_d / (2.0_f64 / 5.0).sqrt()),
        });
        let embedding = crate::model::params::init_embedding(&cfg, Initializer::MegatronSmall, &mut rng);
        let std = embedding_shortcut_std(&embedding, &cfg).unwrap();
        assert!((std - 5.0).abs() / 5.0 < 0.05, "embedding std {std}");
    }

    #[test]
    fn layer1_bound_from_init_matches_formula_at_width_256() {
        let mut config = ModelConfig::toy();
        config.d = 256;
        config.d_ffn = 1024;
        config.num_heads = 8;
        config.num_layers = 8;
        config.activation = Activation::Identity;
        let bound =
            layer1_bound_from_init(&config, Initializer::MegatronSmall, 21).unwrap();
        // Nominal evaluation: sigma1 cancels against the embedding std.
        let sigma2 = (2.0 / (5.0 * 256.0_f64)).sqrt() / (16.0_f64).sqrt();
        let nominal = 1.0 + sigma2 * c_ffn(256, 1024);
        assert!(
            (bound - nominal).abs() / nominal < 0.05,
            "measured {bound} vs nominal {nominal}"
        );
    }
}
