//! Layer normalization and RMSNorm, forward and backward.
//!
//! Both are applied per position (per column of a `d x L` activation
//! matrix) and have no epsilon term: a zero-variance input is an error so
//! the degenerate case can never hide behind a fudge constant.

use crate::error::{Error, Result};
use crate::model::config::NormKind;
use crate::model::params::NormParams;
use crate::numerics::Matrix;

/// `(x - mean) / std` with population std. Errors on zero variance.
pub fn layer_norm(x: &[f64]) -> Result<Vec<f64>> {
    if x.len() < 2 {
        return Err(Error::InvalidDimension(format!(
            "layer_norm needs d >= 2, got {}",
            x.len()
        )));
    }
    let d = x.len() as f64;
    let mean = x.iter().sum::<f64>() / d;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d;
    if var == 0.0 {
        return Err(Error::DegenerateNorm(
            "layer_norm input has zero variance".into(),
        ));
    }
    let inv = 1.0 / var.sqrt();
    Ok(x.iter().map(|v| (v - mean) * inv).collect())
}

/// `x / rms(x)`. Errors on a zero vector.
pub fn rms_norm(x: &[f64]) -> Result<Vec<f64>> {
    if x.is_empty() {
        return Err(Error::InvalidDimension("rms_norm needs d >= 1".into()));
    }
    let d = x.len() as f64;
    let ms = x.iter().map(|v| v * v).sum::<f64>() / d;
    if ms == 0.0 {
        return Err(Error::DegenerateNorm("rms_norm input is zero".into()));
    }
    let inv = 1.0 / ms.sqrt();
    Ok(x.iter().map(|v| v * inv).collect())
}

pub fn normalize(kind: NormKind, x: &[f64]) -> Result<Vec<f64>> {
    match kind {
        NormKind::LayerNorm => layer_norm(x),
        NormKind::RmsNorm => rms_norm(x),
    }
}

/// Per-column cache of a normalization over a `d x L` block.
#[derive(Debug, Clone)]
pub struct NormCache {
    pub kind: NormKind,
    /// Normalized (pre-affine) values, d x L.
    pub normalized: Matrix,
    /// Per-column divisor: std for LN, rms for RMSNorm.
    pub scale: Vec<f64>,
}

/// Normalizes each column; applies optional learned affine.
pub fn norm_forward_block(
    kind: NormKind,
    x: &Matrix,
    affine: Option<&NormParams>,
) -> Result<(Matrix, NormCache)> {
    let d = x.rows();
    let l = x.cols();
    let mut normalized = Matrix::zeros(d, l);
    let mut scale = vec![0.0; l];
    for col in 0..l {
        let xc = x.col(col);
        let yc = normalize(kind, &xc)?;
        // Recover the divisor from one representative: ||x|| / (||y||) works
        // for both kinds, but recompute directly for clarity.
        let div = match kind {
            NormKind::LayerNorm => {
                let mean = xc.iter().sum::<f64>() / d as f64;
                (xc.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64).sqrt()
            }
            NormKind::RmsNorm => (xc.iter().map(|v| v * v).sum::<f64>() / d as f64).sqrt(),
        };
        scale[col] = div;
        normalized.set_col(col, &yc);
    }
    let cache = NormCache {
        kind,
        normalized: normalized.clone(),
        scale,
    };
    let out = match affine {
        None => normalized,
        Some(p) => {
            let mut out = normalized;
            for i in 0..d {
                let g = p.gain.get(0, i);
                let b = p.bias.as_ref().map_or(0.0, |bm| bm.get(0, i));
                for col in 0..l {
                    out.set(i, col, g * out.get(i, col) + b);
                }
            }
            out
        }
    };
    Ok((out, cache))
}

/// Backward through the block normalization. Returns `d_input` and
/// accumulates affine gradients into `affine_grads` when present.
pub fn norm_backward_block(
    cache: &NormCache,
    d_out: &Matrix,
    affine: Option<&NormParams>,
    affine_grads: Option<&mut NormParams>,
) -> Matrix {
    let d = cache.normalized.rows();
    let l = cache.normalized.cols();
    debug_assert_eq!((d_out.rows(), d_out.cols()), (d, l));

    // Through the affine first: d_normalized = d_out * gain.
    let mut d_norm = d_out.clone();
    if let Some(p) = affine {
        if let Some(g) = affine_grads {
            for i in 0..d {
                let mut gain_grad = 0.0;
                let mut bias_grad = 0.0;
                for col in 0..l {
                    let dy = d_out.get(i, col);
                    gain_grad += dy * cache.normalized.get(i, col);
                    bias_grad += dy;
                }
                let cur = g.gain.get(0, i);
                g.gain.set(0, i, cur + gain_grad);
                if let Some(b) = &mut g.bias {
                    let cur = b.get(0, i);
                    b.set(0, i, cur + bias_grad);
                }
            }
        }
        for i in 0..d {
            let gain = p.gain.get(0, i);
            for col in 0..l {
                d_norm.set(i, col, d_norm.get(i, col) * gain);
            }
        }
    }

    let df = d as f64;
    let mut d_in = Matrix::zeros(d, l);
    for col in 0..l {
        let sigma = cache.scale[col];
        let inv = 1.0 / sigma;
        match cache.kind {
            NormKind::LayerNorm => {
                // dL/dx = (1/sigma) (dy - mean(dy) - yhat * mean(dy .* yhat))
                let mut mean_dy = 0.0;
                let mut mean_dyy = 0.0;
                for i in 0..d {
                    let dy = d_norm.get(i, col);
                    mean_dy += dy;
                    mean_dyy += dy * cache.normalized.get(i, col);
                }
                mean_dy /= df;
                mean_dyy /= df;
                for i in 0..d {
                    let dy = d_norm.get(i, col);
                    let yhat = cache.normalized.get(i, col);
                    d_in.set(i, col, inv * (dy - mean_dy - yhat * mean_dyy));
                }
            }
            NormKind::RmsNorm => {
                // dL/dx = (1/rms) (dy - yhat * mean(dy .* yhat))
                let mut mean_dyy = 0.0;
                for i in 0..d {
                    mean_dyy += d_norm.get(i, col) * cache.normalized.get(i, col);
                }
                mean_dyy /= df;
                for i in 0..d {
                    let dy = d_norm.get(i, col);
                    let yhat = cache.normalized.get(i, col);
                    d_in.set(i, col, inv * (dy - yhat * mean_dyy));
                }
            }
        }
    }
    d_in
}
