//! Multi-head scaled dot-product self-attention over a packed `d x L`
//! input (positions are columns), heads concatenated then projected by
//! `W_O`. The causal flag masks future positions before the softmax;
//! masked weights are exactly zero.

use crate::error::{Error, Result};
use crate::numerics::Matrix;

#[derive(Debug, Clone)]
pub struct AttentionCache {
    /// The attention input (normalized shortcut), d x L.
    pub input: Matrix,
    pub q: Vec<Matrix>, // per head, d_head x L
    pub k: Vec<Matrix>,
    pub v: Vec<Matrix>,
    /// Pre-softmax scores `Q^T K / sqrt(d_head)`, per head, L x L (unmasked values).
    pub scores: Vec<Matrix>,
    /// Post-softmax attention weights per head, L x L; masked entries are 0.
    pub weights: Vec<Matrix>,
    /// Concatenated head outputs, d x L.
    pub z: Matrix,
}

pub struct AttentionHeads<'a> {
    pub w_q: &'a [Matrix],
    pub w_k: &'a [Matrix],
    pub w_v: &'a [Matrix],
    pub w_o: &'a Matrix,
}

/// Row-wise softmax of `scores` with optional causal masking.
fn masked_softmax(scores: &Matrix, causal: bool) -> Matrix {
    let l = scores.rows();
    let mut out = Matrix::zeros(l, l);
    for k in 0..l {
        let limit = if causal { k } else { l - 1 };
        let mut max = f64::NEG_INFINITY;
        for j in 0..=limit {
            max = max.max(scores.get(k, j));
        }
        let mut denom = 0.0;
        for j in 0..=limit {
            denom += (scores.get(k, j) - max).exp();
        }
        for j in 0..=limit {
            out.set(k, j, (scores.get(k, j) - max).exp() / denom);
        }
    }
    out
}

/// Forward pass; `x` is d x L.
pub fn attention_forward_cached(
    x: &Matrix,
    heads: &AttentionHeads<'_>,
    causal: bool,
) -> Result<(Matrix, AttentionCache)> {
    let h = heads.w_q.len();
    if h == 0 || heads.w_k.len() != h || heads.w_v.len() != h {
        return Err(Error::ShapeMismatch(
            "attention needs matching nonempty head lists".into(),
        ));
    }
    let d = x.rows();
    let l = x.cols();
    let d_head = heads.w_q[0].rows();
    if d_head * h != d || heads.w_o.rows() != d || heads.w_o.cols() != d {
        return Err(Error::ShapeMismatch(format!(
            "attention shapes: d={d}, heads={h}, d_head={d_head}, W_O {}x{}",
            heads.w_o.rows(),
            heads.w_o.cols()
        )));
    }

    let scale = 1.0 / (d_head as f64).sqrt();
    let mut q = Vec::with_capacity(h);
    let mut k = Vec::with_capacity(h);
    let mut v = Vec::with_capacity(h);
    let mut scores = Vec::with_capacity(h);
    let mut weights = Vec::with_capacity(h);
    let mut z = Matrix::zeros(d, l);

    for i in 0..h {
        let qi = heads.w_q[i].matmul(x);
        let ki = heads.w_k[i].matmul(x);
        let vi = heads.w_v[i].matmul(x);
        let si = qi.matmul_tn(&ki).scale(scale); // L x L, row = query position
        let ai = masked_softmax(&si, causal);
        let hi = vi.matmul_nt(&ai); // d_head x L, column k = V a_k
        for r in 0..d_head {
            for c in 0..l {
                z.set(i * d_head + r, c, hi.get(r, c));
            }
        }
        q.push(qi);
        k.push(ki);
        v.push(vi);
        scores.push(si);
        weights.push(ai);
    }

    let out = heads.w_o.matmul(&z);
    let cache = AttentionCache {
        input: x.clone(),
        q,
        k,
        v,
        scores,
        weights,
        z,
    };
    Ok((out, cache))
}

/// Forward pass without retaining the cache.
pub fn attention_forward(x: &Matrix, heads: &AttentionHeads<'_>, causal: bool) -> Result<Matrix> {
    attention_forward_cached(x, heads, causal).map(|(out, _)| out)
}

pub struct AttentionGrads {
    pub d_w_q: Vec<Matrix>,
    pub d_w_k: Vec<Matrix>,
    pub d_w_v: Vec<Matrix>,
    pub d_w_o: Matrix,
    pub d_input: Matrix,
}

/// Backward pass given `d_out` (d x L).
pub fn attention_backward(
    cache: &AttentionCache,
    heads: &AttentionHeads<'_>,
    d_out: &Matrix,
) -> AttentionGrads {
    let h = heads.w_q.len();
    let d = cache.input.rows();
    let l = cache.input.cols();
    let d_head = heads.w_q[0].rows();
    let scale = 1.0 / (d_head as f64).sqrt();

    let d_w_o = d_out.matmul_nt(&cache.z);
    let d_z = heads.w_o.matmul_tn(d_out);

    let mut d_w_q = Vec::with_capacity(h);
    let mut d_w_k = Vec::with_capacity(h);
    let mut d_w_v = Vec::with_capacity(h);
    let mut d_input = Matrix::zeros(d, l);

    for i in 0..h {
        // Slice this head's rows out of dZ.
        let mut d_h = Matrix::zeros(d_head, l);
        for r in 0..d_head {
            for c in 0..l {
                d_h.set(r, c, d_z.get(i * d_head + r, c));
            }
        }

        let a = &cache.weights[i];
        let vi = &cache.v[i];
        // H = V A^T  =>  dV = dH A,  dA = dH^T V
        let d_v = d_h.matmul(a);
        let d_a = d_h.matmul_tn(vi);

        // Softmax backward per row; masked entries have a = 0 so ds = 0.
        let mut d_s = Matrix::zeros(l, l);
        for row in 0..l {
            let mut dot = 0.0;
            for col in 0..l {
                dot += d_a.get(row, col) * a.get(row, col);
            }
            for col in 0..l {
                let av = a.get(row, col);
                if av != 0.0 {
                    d_s.set(row, col, av * (d_a.get(row, col) - dot));
                }
            }
        }
        d_s.scale_in_place(scale);

        // S = Q^T K (scaled): dQ = K dS^T, dK = Q dS.
        let d_q = cache.k[i].matmul_nt(&d_s);
        let d_k = cache.q[i].matmul(&d_s);

        d_input.axpy(1.0, &heads.w_q[i].matmul_tn(&d_q));
        d_input.axpy(1.0, &heads.w_k[i].matmul_tn(&d_k));
        d_input.axpy(1.0, &heads.w_v[i].matmul_tn(&d_v));

        d_w_q.push(d_q.matmul_nt(&cache.input));
        d_w_k.push(d_k.matmul_nt(&cache.input));
        d_w_v.push(d_v.matmul_nt(&cache.input));
    }

    AttentionGrads {
        d_w_q,
        d_w_k,
        d_w_v,
        d_w_o,
        d_input,
    }
}
