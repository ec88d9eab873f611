//! Position-wise feed-forward network: `FFN(x) = W2 F(W1 x)`, and the
//! SwiGLU variant `W2 (Swish(W1 x) .* (V x))`.

use crate::error::{Error, Result};
use crate::model::activation::{relu, relu_prime, silu, silu_prime};
use crate::model::config::Activation;
use crate::numerics::Matrix;

#[derive(Debug, Clone)]
pub struct FfnCache {
    /// `W1 U`, d_ffn x L.
    pub pre: Matrix,
    /// `V U` for SwiGLU, d_ffn x L.
    pub gate: Option<Matrix>,
    /// Post-activation hidden values, d_ffn x L.
    pub hidden: Matrix,
    /// The FFN input (normalized shortcut), d x L.
    pub input: Matrix,
}

/// Applies the FFN to each column of `u` (d x L), caching intermediates.
pub fn ffn_forward_block(
    u: &Matrix,
    w1: &Matrix,
    w2: &Matrix,
    v: Option<&Matrix>,
    activation: Activation,
) -> Result<(Matrix, FfnCache)> {
    if w1.cols() != u.rows() || w2.cols() != w1.rows() {
        return Err(Error::ShapeMismatch(format!(
            "ffn shapes: W1 {}x{}, W2 {}x{}, input {}x{}",
            w1.rows(),
            w1.cols(),
            w2.rows(),
            w2.cols(),
            u.rows(),
            u.cols()
        )));
    }
    let pre = w1.matmul(u);
    let (hidden, gate) = match activation {
        Activation::Identity => (pre.clone(), None),
        Activation::ReLU => {
            let mut h = pre.clone();
            for x in h.as_mut_slice() {
                *x = relu(*x);
            }
            (h, None)
        }
        Activation::SiLU => {
            let mut h = pre.clone();
            for x in h.as_mut_slice() {
                *x = silu(*x);
            }
            (h, None)
        }
        Activation::SwiGLU => {
            let v = v.ok_or_else(|| {
                Error::InvalidArgument("SwiGLU requires the gate matrix V".into())
            })?;
            if v.cols() != u.rows() || v.rows() != w1.rows() {
                return Err(Error::ShapeMismatch("SwiGLU gate shape".into()));
            }
            let g = v.matmul(u);
            let mut h = pre.clone();
            for (x, gv) in h.as_mut_slice().iter_mut().zip(g.as_slice()) {
                *x = silu(*x) * gv;
            }
            (h, Some(g))
        }
    };
    let out = w2.matmul(&hidden);
    let cache = FfnCache {
        pre,
        gate,
        hidden,
        input: u.clone(),
    };
    Ok((out, cache))
}

/// Single-position convenience wrapper over the block path.
pub fn ffn_forward(
    x: &[f64],
    w1: &Matrix,
    w2: &Matrix,
    v: Option<&Matrix>,
    activation: Activation,
) -> Result<Vec<f64>> {
    let u = Matrix::from_vec(x.len(), 1, x.to_vec())
        .map_err(|_| Error::InvalidArgument("ffn input must be finite and nonempty".into()))?;
    let (out, _) = ffn_forward_block(&u, w1, w2, v, activation)?;
    Ok(out.col(0))
}

pub struct FfnGrads {
    pub d_w1: Matrix,
    pub d_w2: Matrix,
    pub d_v: Option<Matrix>,
    pub d_input: Matrix,
}

/// Backward through the FFN block given `d_out` (d x L).
pub fn ffn_backward_block(
    cache: &FfnCache,
    w1: &Matrix,
    w2: &Matrix,
    v: Option<&Matrix>,
    activation: Activation,
    d_out: &Matrix,
) -> FfnGrads {
    // out = W2 h  =>  dW2 = d_out h^T, dh = W2^T d_out
    let d_w2 = d_out.matmul_nt(&cache.hidden);
    let d_hidden = w2.matmul_tn(d_out);

    let (d_pre, d_v, mut d_input_extra) = match activation {
        Activation::Identity => (d_hidden, None, None),
        Activation::ReLU => {
            let mut dp = d_hidden;
            for (g, &p) in dp.as_mut_slice().iter_mut().zip(cache.pre.as_slice()) {
                *g *= relu_prime(p);
            }
            (dp, None, None)
        }
        Activation::SiLU => {
            let mut dp = d_hidden;
            for (g, &p) in dp.as_mut_slice().iter_mut().zip(cache.pre.as_slice()) {
                *g *= silu_prime(p);
            }
            (dp, None, None)
        }
        Activation::SwiGLU => {
            let gate = cache.gate.as_ref().expect("SwiGLU cache has gate");
            let v = v.expect("SwiGLU params have V");
            // h = silu(pre) .* gate
            let mut d_pre = d_hidden.clone();
            let mut d_gate = d_hidden;
            for ((dp, dg), (&p, &g)) in d_pre
                .as_mut_slice()
                .iter_mut()
                .zip(d_gate.as_mut_slice().iter_mut())
                .zip(cache.pre.as_slice().iter().zip(gate.as_slice()))
            {
                let s = silu(p);
                let sp = silu_prime(p);
                let upstream = *dp;
                *dp = upstream * g * sp;
                *dg = upstream * s;
            }
            let d_v = d_gate.matmul_nt(&cache.input);
            let d_in = v.matmul_tn(&d_gate);
            (d_pre, Some(d_v), Some(d_in))
        }
    };

    let d_w1 = d_pre.matmul_nt(&cache.input);
    let mut d_input = w1.matmul_tn(&d_pre);
    if let Some(extra) = d_input_extra.take() {
        d_input.axpy(1.0, &extra);
    }

    FfnGrads {
        d_w1,
        d_w2,
        d_v,
        d_input,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{finite_diff_gradient, gaussian_matrix, vec_dot, RandomSource};

    #[test]
    fn identity_blocks_pass_through() {
        // W1 = [I; 0], W2 = [I 0]: FFN(x) = x for the identity activation.
        let d = 3;
        let d_ffn = 5;
        let mut w1 = Matrix::zeros(d_ffn, d);
        let mut w2 = Matrix::zeros(d, d_ffn);
        for i in 0..d {
            w1.set(i, i, 1.0);
            w2.set(i, i, 1.0);
        }
        let x = vec![0.5, -1.5, 2.0];
        let y = ffn_forward(&x, &w1, &w2, None, Activation::Identity).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn relu_zeroes_all_negative_hidden() {
        let mut rng = RandomSource::new(1);
        let w1 = gaussian_matrix(6, 4, 0.0, 1.0, &mut rng).unwrap().scale(-1.0);
        let w2 = gaussian_matrix(4, 6, 0.0, 1.0, &mut rng).unwrap();
        // Positive input with all-negative W1 rows makes every preactivation negative.
        let mut w1_neg = w1;
        for v in w1_neg.as_mut_slice() {
            *v = -v.abs();
        }
        let x = vec![1.0, 2.0, 0.5, 1.5];
        let y = ffn_forward(&x, &w1_neg, &w2, None, Activation::ReLU).unwrap();
        assert!(y.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn matches_straight_line_reference() {
        // Independent direct-formula evaluation of each variant.
        let mut rng = RandomSource::new(2);
        let d = 5;
        let d_ffn = 7;
        let w1 = gaussian_matrix(d_ffn, d, 0.0, 0.7, &mut rng).unwrap();
        let w2 = gaussian_matrix(d, d_ffn, 0.0, 0.7, &mut rng).unwrap();
        let v = gaussian_matrix(d_ffn, d, 0.0, 0.7, &mut rng).unwrap();
        let x: Vec<f64> = (0..d).map(|_| rng.standard_normal()).collect();

        for act in [
            Activation::Identity,
            Activation::ReLU,
            Activation::SiLU,
            Activation::SwiGLU,
        ] {
            let got = ffn_forward(&x, &w1, &w2, Some(&v), act).unwrap();
            let mut hidden = vec![0.0; d_ffn];
            for i in 0..d_ffn {
                let p = vec_dot(w1.row(i), &x);
                hidden[i] = match act {
                    Activation::Identity => p,
                    Activation::ReLU => relu(p),
                    Activation::SiLU => silu(p),
                    Activation::SwiGLU => silu(p) * vec_dot(v.row(i), &x),
                };
            }
            for i in 0..d {
                let want = vec_dot(w2.row(i), &hidden);
                assert!(
                    (got[i] - want).abs() < 1e-12,
                    "{act:?} output {i}: {} vs {}",
                    got[i],
                    want
                );
            }
        }
    }

    #[test]
    fn swiglu_without_gate_is_an_error() {
        let w1 = Matrix::identity(3);
        let w2 = Matrix::identity(3);
        assert!(ffn_forward(&[1.0, 2.0, 3.0], &w1, &w2, None, Activation::SwiGLU).is_err());
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = RandomSource::new(3);
        let d = 4;
        let d_ffn = 6;
        let l = 3;
        let w1 = gaussian_matrix(d_ffn, d, 0.0, 0.6, &mut rng).unwrap();
        let w2 = gaussian_matrix(d, d_ffn, 0.0, 0.6, &mut rng).unwrap();
        let v = gaussian_matrix(d_ffn, d, 0.0, 0.6, &mut rng).unwrap();
        let u = gaussian_matrix(d, l, 0.0, 1.0, &mut rng).unwrap();
        let cot = gaussian_matrix(d, l, 0.0, 1.0, &mut rng).unwrap();

        for act in [Activation::Identity, Activation::SiLU, Activation::SwiGLU] {
            let (_, cache) = ffn_forward_block(&u, &w1, &w2, Some(&v), act).unwrap();
            let grads = ffn_backward_block(&cache, &w1, &w2, Some(&v), act, &cot);

            // Gradient wrt input.
            let loss_of_input = |flat: &[f64]| {
                let um = Matrix::from_vec(d, l, flat.to_vec()).unwrap();
                let (out, _) = ffn_forward_block(&um, &w1, &w2, Some(&v), act).unwrap();
                vec_dot(out.as_slice(), cot.as_slice())
            };
            let fd_in = finite_diff_gradient(loss_of_input, u.as_slice(), 1e-6).unwrap();
            for (g, f) in grads.d_input.as_slice().iter().zip(fd_in.iter()) {
                assert!((g - f).abs() < 1e-7, "{act:?} d_input {g} vs {f}");
            }

            // Gradient wrt W1.
            let loss_of_w1 = |flat: &[f64]| {
                let w1m = Matrix::from_vec(d_ffn, d, flat.to_vec()).unwrap();
                let (out, _) = ffn_forward_block(&u, &w1m, &w2, Some(&v), act).unwrap();
                vec_dot(out.as_slice(), cot.as_slice())
            };
            let fd_w1 = finite_diff_gradient(loss_of_w1, w1.as_slice(), 1e-6).unwrap();
            for (g, f) in grads.d_w1.as_slice().iter().zip(fd_w1.iter()) {
                assert!((g - f).abs() < 1e-7, "{act:?} d_w1 {g} vs {f}");
            }

            if act == Activation::SwiGLU {
                let loss_of_v = |flat: &[f64]| {
                    let vm = Matrix::from_vec(d_ffn, d, flat.to_vec()).unwrap();
                    let (out, _) = ffn_forward_block(&u, &w1, &w2, Some(&vm), act).unwrap();
                    vec_dot(out.as_slice(), cot.as_slice())
                };
                let fd_v = finite_diff_gradient(loss_of_v, v.as_slice(), 1e-6).unwrap();
                for (g, f) in grads.d_v.as_ref().unwrap().as_slice().iter().zip(fd_v.iter()) {
                    assert!((g - f).abs() < 1e-7, "swiglu d_v {g} vs {f}");
                }
            }
        }
    }
}
