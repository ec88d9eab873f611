//! Pre-LN forward pass: embed -> N x (attention, FFN residual blocks) ->
//! final norm -> output projection. Every intermediate needed by the exact
//! backward pass is cached.

use crate::error::{Error, Result};
use crate::model::attention::{attention_forward_cached, AttentionCache, AttentionHeads};
use crate::model::config::{EmbedMode, ModelConfig};
use crate::model::ffn::{ffn_forward_block, FfnCache};
use crate::model::norm::{norm_forward_block, NormCache};
use crate::model::params::{LayerParams, Parameters};
use crate::numerics::{Matrix, RandomSource};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunMode {
    Train,
    Eval,
}

#[derive(Debug, Clone)]
pub struct LayerCache {
    /// Layer input (the attention shortcut), d x L.
    pub x: Matrix,
    pub attn_norm: NormCache,
    pub attn: AttentionCache,
    pub attn_dropout: Option<Matrix>,
    /// Attention-block output (the FFN shortcut), d x L.
    pub x_prime: Matrix,
    pub ffn_norm: NormCache,
    pub ffn: FfnCache,
    pub ffn_dropout: Option<Matrix>,
    /// Layer output, d x L.
    pub y: Matrix,
}

#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub tokens: Vec<usize>,
    /// Raw table lookup (plus positional rows when enabled), d x L.
    pub embed_raw: Matrix,
    /// EmbedLn normalization cache, when that mode is active.
    pub embed_norm: Option<NormCache>,
    /// Embedding-path output before dropout, d x L.
    pub embedded: Matrix,
    pub embed_dropout: Option<Matrix>,
    pub layers: Vec<LayerCache>,
    pub final_norm: NormCache,
    /// Final-norm output fed to the output projection, d x L.
    pub final_out: Matrix,
    /// vocab x L.
    pub logits: Matrix,
}

/// Inverted-dropout mask: entries are `0` or `1/(1-rate)`.
fn dropout_mask(rows: usize, cols: usize, rate: f64, rng: &mut RandomSource) -> Matrix {
    let keep = 1.0 - rate;
    let mut m = Matrix::zeros(rows, cols);
    for v in m.as_mut_slice() {
        *v = if rng.uniform() < keep { 1.0 / keep } else { 0.0 };
    }
    m
}

/// Embedding-path forward: table lookup (plus optional positional rows),
/// then the configured treatment. Returns the layer-0 input and the scale
/// later applied to the embedding-table gradient (`gamma` for EmbedDetach,
/// 1 otherwise).
pub fn embed(tokens: &[usize], params: &Parameters, config: &ModelConfig) -> Result<(Matrix, f64)> {
    let (out, _, _) = embed_cached(tokens, params, config)?;
    Ok((out, config.embed_mode.gradient_scale()))
}

pub(crate) fn embed_cached(
    tokens: &[usize],
    params: &Parameters,
    config: &ModelConfig,
) -> Result<(Matrix, Matrix, Option<NormCache>)> {
    embed_tokens(
        &params.embedding,
        params.pos_embedding.as_ref(),
        params.embed_norm.as_ref(),
        config,
        tokens,
    )
}

/// Embed lookup + treatment from bare tables. The bounds module streams
/// layer tensors without a full `Parameters`, so this takes the pieces.
pub(crate) fn embed_tokens(
    embedding: &Matrix,
    pos_embedding: Option<&Matrix>,
    embed_norm: Option<&crate::model::params::NormParams>,
    config: &ModelConfig,
    tokens: &[usize],
) -> Result<(Matrix, Matrix, Option<NormCache>)> {
    let d = config.d;
    for &t in tokens {
        if t >= config.vocab_size {
            return Err(Error::TokenOutOfRange {
                id: t,
                vocab: config.vocab_size,
            });
        }
    }
    let l = tokens.len();
    let mut raw = Matrix::zeros(d, l);
    for (col, &t) in tokens.iter().enumerate() {
        let row = embedding.row(t);
        for i in 0..d {
            raw.set(i, col, row[i]);
        }
    }
    if let Some(pos) = pos_embedding {
        if l > pos.rows() {
            return Err(Error::InvalidArgument(format!(
                "sequence length {l} exceeds positional table of {}",
                pos.rows()
            )));
        }
        for col in 0..l {
            let row = pos.row(col);
            for i in 0..d {
                raw.set(i, col, raw.get(i, col) + row[i]);
            }
        }
    }

    let (out, cache) = match config.embed_mode {
        EmbedMode::Vanilla | EmbedMode::EmbedDetach { .. } => (raw.clone(), None),
        EmbedMode::ScaledEmbed { .. } => {
            (raw.scale(config.embed_mode.forward_scale(d)), None)
        }
        EmbedMode::EmbedLn => {
            let (out, cache) = norm_forward_block(config.norm_kind, &raw, embed_norm)?;
            (out, Some(cache))
        }
    };
    Ok((out, raw, cache))
}

/// One Pre-LN layer: `x' = x + Attn(LN(x))`, `y = x' + FFN(LN(x'))`,
/// with dropout on each sub-layer output in training mode.
pub fn layer_forward(
    x: &Matrix,
    layer: &LayerParams,
    config: &ModelConfig,
    mode: RunMode,
    rng: &mut RandomSource,
) -> Result<(Matrix, LayerCache)> {
    let use_dropout = mode == RunMode::Train && config.dropout_rate > 0.0;

    let (ln_x, attn_norm) = norm_forward_block(config.norm_kind, x, layer.attn_norm.as_ref())?;
    let heads = AttentionHeads {
        w_q: &layer.w_q,
        w_k: &layer.w_k,
        w_v: &layer.w_v,
        w_o: &layer.w_o,
    };
    let (mut attn_out, attn) = attention_forward_cached(&ln_x, &heads, config.causal_mask)?;
    let attn_dropout = if use_dropout {
        let mask = dropout_mask(attn_out.rows(), attn_out.cols(), config.dropout_rate, rng);
        attn_out = attn_out.hadamard(&mask);
        Some(mask)
    } else {
        None
    };
    let x_prime = x.add(&attn_out);

    let (ln_xp, ffn_norm) =
        norm_forward_block(config.norm_kind, &x_prime, layer.ffn_norm.as_ref())?;
    let (mut ffn_out, ffn) = ffn_forward_block(
        &ln_xp,
        &layer.w1,
        &layer.w2,
        layer.v.as_ref(),
        config.activation,
    )?;
    let ffn_dropout = if use_dropout {
        let mask = dropout_mask(ffn_out.rows(), ffn_out.cols(), config.dropout_rate, rng);
        ffn_out = ffn_out.hadamard(&mask);
        Some(mask)
    } else {
        None
    };
    let y = x_prime.add(&ffn_out);

    let cache = LayerCache {
        x: x.clone(),
        attn_norm,
        attn,
        attn_dropout,
        x_prime: x_prime.clone(),
        ffn_norm,
        ffn,
        ffn_dropout,
        y: y.clone(),
    };
    Ok((y, cache))
}

/// Full forward pass over one sequence of exactly `config.seq_len` tokens.
pub fn model_forward(
    tokens: &[usize],
    params: &Parameters,
    config: &ModelConfig,
    mode: RunMode,
    rng: &mut RandomSource,
) -> Result<(Matrix, ForwardCache)> {
    if tokens.len() != config.seq_len {
        return Err(Error::InvalidArgument(format!(
            "expected {} tokens, got {}",
            config.seq_len,
            tokens.len()
        )));
    }
    let use_dropout = mode == RunMode::Train && config.dropout_rate > 0.0;

    let (embedded, embed_raw, embed_norm) = embed_cached(tokens, params, config)?;
    let mut x = embedded.clone();
    let embed_dropout = if use_dropout {
        let mask = dropout_mask(x.rows(), x.cols(), config.dropout_rate, rng);
        x = x.hadamard(&mask);
        Some(mask)
    } else {
        None
    };

    let mut layers = Vec::with_capacity(config.num_layers);
    for layer in &params.layers {
        let (y, cache) = layer_forward(&x, layer, config, mode, rng)?;
        x = y;
        layers.push(cache);
    }

    let (final_out, final_norm) =
        norm_forward_block(config.norm_kind, &x, params.final_norm.as_ref())?;
    let logits = params.output_proj.matmul_tn(&final_out);

    let cache = ForwardCache {
        tokens: tokens.to_vec(),
        embed_raw,
        embed_norm,
        embedded,
        embed_dropout,
        layers,
        final_norm,
        final_out: final_out.clone(),
        logits: logits.clone(),
    };
    Ok((logits, cache))
}
