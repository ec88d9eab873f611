//! Exact manual backpropagation through the Pre-LN stack.

use crate::error::{Error, Result};
use crate::model::attention::{attention_backward, AttentionHeads};
use crate::model::config::ModelConfig;
use crate::model::ffn::ffn_backward_block;
use crate::model::forward::ForwardCache;
use crate::model::norm::norm_backward_block;
use crate::model::params::{Gradients, Parameters};
use crate::numerics::Matrix;

/// Backward pass for one sequence. `d_logits` is vocab x L. Gradients for
/// every parameter tensor are returned; the embedding-table gradient carries
/// the embed-mode gradient scale (EmbedDetach's gamma).
pub fn model_backward(
    cache: &ForwardCache,
    params: &Parameters,
    config: &ModelConfig,
    d_logits: &Matrix,
) -> Result<Gradients> {
    if d_logits.rows() != config.vocab_size || d_logits.cols() != cache.tokens.len() {
        return Err(Error::ShapeMismatch(format!(
            "d_logits is {}x{}, expected {}x{}",
            d_logits.rows(),
            d_logits.cols(),
            config.vocab_size,
            cache.tokens.len()
        )));
    }
    if cache.layers.len() != params.layers.len() {
        return Err(Error::ShapeMismatch(
            "cache and parameters disagree on layer count".into(),
        ));
    }

    let mut grads = params.zeros_like();

    // logits = P^T H  =>  dP = H dlogits^T, dH = P dlogits
    grads.output_proj = cache.final_out.matmul_nt(d_logits);
    let d_final_out = params.output_proj.matmul(d_logits);

    let mut d_x = norm_backward_block(
        &cache.final_norm,
        &d_final_out,
        params.final_norm.as_ref(),
        grads.final_norm.as_mut(),
    );

    for idx in (0..params.layers.len()).rev() {
        let layer = &params.layers[idx];
        let lc = &cache.layers[idx];
        let g = &mut grads.layers[idx];

        // y = x' + drop(FFN(LN(x')))
        let d_ffn_out = match &lc.ffn_dropout {
            Some(mask) => d_x.hadamard(mask),
            None => d_x.clone(),
        };
        let ffn_grads = ffn_backward_block(
            &lc.ffn,
            &layer.w1,
            &layer.w2,
            layer.v.as_ref(),
            config.activation,
            &d_ffn_out,
        );
        g.w1 = ffn_grads.d_w1;
        g.w2 = ffn_grads.d_w2;
        g.v = ffn_grads.d_v;
        let d_xp_from_ffn = norm_backward_block(
            &lc.ffn_norm,
            &ffn_grads.d_input,
            layer.ffn_norm.as_ref(),
            g.ffn_norm.as_mut(),
        );
        let d_x_prime = d_x.add(&d_xp_from_ffn);

        // x' = x + drop(Attn(LN(x)))
        let d_attn_out = match &lc.attn_dropout {
            Some(mask) => d_x_prime.hadamard(mask),
            None => d_x_prime.clone(),
        };
        let heads = AttentionHeads {
            w_q: &layer.w_q,
            w_k: &layer.w_k,
            w_v: &layer.w_v,
            w_o: &layer.w_o,
        };
        let attn_grads = attention_backward(&lc.attn, &heads, &d_attn_out);
        g.w_q = attn_grads.d_w_q;
        g.w_k = attn_grads.d_w_k;
        g.w_v = attn_grads.d_w_v;
        g.w_o = attn_grads.d_w_o;
        let d_x_from_attn = norm_backward_block(
            &lc.attn_norm,
            &attn_grads.d_input,
            layer.attn_norm.as_ref(),
            g.attn_norm.as_mut(),
        );
        d_x = d_x_prime.add(&d_x_from_attn);
    }

    // Embedding path: dropout, then the embed-mode transform, then the table.
    let d_embedded = match &cache.embed_dropout {
        Some(mask) => d_x.hadamard(mask),
        None => d_x,
    };
    let d_raw = match (&cache.embed_norm, config.embed_mode) {
        (Some(norm_cache), _) => norm_backward_block(
            norm_cache,
            &d_embedded,
            params.embed_norm.as_ref(),
            grads.embed_norm.as_mut(),
        ),
        (None, crate::model::config::EmbedMode::ScaledEmbed { .. }) => {
            d_embedded.scale(config.embed_mode.forward_scale(config.d))
        }
        (None, _) => d_embedded,
    };

    for (col, &tok) in cache.tokens.iter().enumerate() {
        let row = grads.embedding.row_mut(tok);
        for (i, slot) in row.iter_mut().enumerate() {
            *slot += d_raw.get(i, col);
        }
    }
    if let Some(pos_grad) = grads.pos_embedding.as_mut() {
        for col in 0..cache.tokens.len() {
            let row = pos_grad.row_mut(col);
            for (i, slot) in row.iter_mut().enumerate() {
                *slot += d_raw.get(i, col);
            }
        }
    }
    // Applied after accumulation so a detached gradient is exactly
    // gamma times the vanilla one. The positional table is part of the
    // embedding layer and shares the scale.
    let grad_scale = config.embed_mode.gradient_scale();
    if grad_scale != 1.0 {
        grads.embedding.scale_in_place(grad_scale);
        if let Some(pos_grad) = grads.pos_embedding.as_mut() {
            pos_grad.scale_in_place(grad_scale);
        }
    }

    Ok(grads)
}
