//! Closed-form upper bounds on sub-layer Jacobian spectral norms.
//!
//! The FFN residual block satisfies
//! `||dy/dx'|| <= 1 + (sigma1 sigma2 / sigma_x') C_ffn` with
//! `C_ffn = (sqrt(d) + sqrt(d_ffn))^2`, and the attention block satisfies
//! `||dx'/dx|| <= 1 + (sigma_O / sigma_x) C_attn` with
//! `C_attn = 2 sqrt(d) ||J^Z||`, where `||J^Z||` is bounded under the
//! uniform-attention assumption. Activation variants adjust `C_ffn`:
//! ReLU halves `d_ffn`, SiLU contributes a 1.1 factor (the maximum of its
//! derivative), and SwiGLU uses
//! `C_swiglu = 2.1 (sqrt(d)+sqrt(d_ffn))^2 sqrt(2 d ln d_ffn)` with the
//! gate std `sigma_V` as an extra factor.

use crate::error::{Error, Result};
use crate::model::activation::silu_prime;
use crate::model::config::Activation;
use crate::numerics::Matrix;

/// `(sqrt(d) + sqrt(d_ffn))^2`, the identity-activation FFN constant.
pub fn c_ffn(d: usize, d_ffn: usize) -> f64 {
    let s = (d as f64).sqrt() + (d_ffn as f64).sqrt();
    s * s
}

/// SwiGLU constant `2.1 (sqrt(d)+sqrt(d_ffn))^2 sqrt(2 d ln d_ffn)`.
pub fn c_swiglu(d: usize, d_ffn: usize) -> f64 {
    2.1 * c_ffn(d, d_ffn) * (2.0 * d as f64 * (d_ffn as f64).ln()).sqrt()
}

/// Largest derivative of SiLU (~1.1), kept as the literature constant.
pub const SILU_DERIVATIVE_BOUND: f64 = 1.1;

/// Upper bound on the FFN residual-block Jacobian norm `||dy/dx'||`.
///
/// `sigma_v` is the SwiGLU gate std, required exactly for that activation.
/// For ReLU the internal dimension is halved (integer division): under the
/// zero-mean assumption half the hidden units are cut.
pub fn ffn_upper_bound(
    sigma1: f64,
    sigma2: f64,
    sigma_shortcut: f64,
    d: usize,
    d_ffn: usize,
    activation: Activation,
    sigma_v: Option<f64>,
) -> Result<f64> {
    if !(sigma_shortcut > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "ffn_upper_bound needs a positive shortcut std, got {sigma_shortcut}"
        )));
    }
    if sigma1 < 0.0 || sigma2 < 0.0 {
        return Err(Error::InvalidArgument(
            "parameter stds must be nonnegative".into(),
        ));
    }
    match (activation, sigma_v) {
        (Activation::SwiGLU, None) => Err(Error::InvalidArgument(
            "SwiGLU bound requires sigma_v".into(),
        )),
        (Activation::SwiGLU, Some(sv)) if sv < 0.0 => Err(Error::InvalidArgument(
            "sigma_v must be nonnegative".into(),
        )),
        (Activation::SwiGLU, Some(sv)) => {
            Ok(1.0 + sv * sigma1 * sigma2 / sigma_shortcut * c_swiglu(d, d_ffn))
        }
        (_, Some(_)) => Err(Error::InvalidArgument(
            "sigma_v only applies to the SwiGLU bound".into(),
        )),
        (Activation::Identity, None) => {
            Ok(1.0 + sigma1 * sigma2 / sigma_shortcut * c_ffn(d, d_ffn))
        }
        (Activation::ReLU, None) => {
            Ok(1.0 + sigma1 * sigma2 / sigma_shortcut * c_ffn(d, d_ffn / 2))
        }
        (Activation::SiLU, None) => Ok(1.0
            + SILU_DERIVATIVE_BOUND * sigma1 * sigma2 / sigma_shortcut * c_ffn(d, d_ffn)),
    }
}

/// Upper bound on the attention residual-block Jacobian norm `||dx'/dx||`:
/// `1 + sigma_O (2 sqrt(d)) ||J^Z|| / sigma_x`.
pub fn attn_upper_bound(sigma_o: f64, sigma_shortcut: f64, d: usize, jz_norm: f64) -> Result<f64> {
    if !(sigma_shortcut > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "attn_upper_bound needs a positive shortcut std, got {sigma_shortcut}"
        )));
    }
    if sigma_o < 0.0 || jz_norm < 0.0 {
        return Err(Error::InvalidArgument(
            "sigma_o and jz_norm must be nonnegative".into(),
        ));
    }
    Ok(1.0 + sigma_o * 2.0 * (d as f64).sqrt() * jz_norm / sigma_shortcut)
}

/// Uniform-attention bound on the concatenated-heads Jacobian:
/// `h ((sqrt(L) + 2 + 1/sqrt(L)) sigma^3 sqrt(d^3 d_head) + sigma (sqrt(d) + sqrt(d_head)))`.
pub fn jz_bound(h: usize, l: usize, sigma: f64, d: usize, d_head: usize) -> f64 {
    assert!(h >= 1 && l >= 1 && d >= 1 && d_head >= 1, "positive dims");
    assert!(sigma >= 0.0, "sigma must be nonnegative");
    let lf = l as f64;
    let df = d as f64;
    let dh = d_head as f64;
    let cubic = (lf.sqrt() + 2.0 + 1.0 / lf.sqrt()) * sigma.powi(3) * (df.powi(3) * dh).sqrt();
    let linear = sigma * (df.sqrt() + dh.sqrt());
    h as f64 * (cubic + linear)
}

/// The exact Jacobian of the mean-free normalization `x -> sqrt(d) x / ||x||`:
/// `(sqrt(d)/||x||) (I - x x^T / ||x||^2)`. Its spectral norm is exactly
/// `sqrt(d)/||x||` for d >= 2 (the projector has unit norm).
pub fn ln_jacobian_analytic(x: &[f64]) -> Result<Matrix> {
    let d = x.len();
    if d < 2 {
        return Err(Error::InvalidDimension(format!(
            "ln_jacobian_analytic needs d >= 2, got {d}"
        )));
    }
    let norm_sq: f64 = x.iter().map(|v| v * v).sum();
    if norm_sq == 0.0 {
        return Err(Error::DegenerateNorm(
            "ln_jacobian_analytic of the zero vector".into(),
        ));
    }
    let scale = (d as f64).sqrt() / norm_sq.sqrt();
    let mut jac = Matrix::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            let delta = if i == j { 1.0 } else { 0.0 };
            jac.set(i, j, scale * (delta - x[i] * x[j] / norm_sq));
        }
    }
    Ok(jac)
}

/// Grid search plus ternary refinement for the maximum of `d/dx silu(x)`.
/// The grid must cover `[0, 5]`, where the maximum (~1.0998 at ~2.3994) lies.
pub fn silu_derivative_max(grid_lo: f64, grid_hi: f64, grid_step: f64) -> Result<(f64, f64)> {
    if !(grid_step > 0.0) {
        return Err(Error::InvalidArgument("grid_step must be positive".into()));
    }
    if grid_lo > 0.0 || grid_hi < 5.0 {
        return Err(Error::InvalidArgument(format!(
            "grid [{grid_lo}, {grid_hi}] must cover [0, 5]"
        )));
    }
    let mut best_x = grid_lo;
    let mut best = f64::NEG_INFINITY;
    let mut x = grid_lo;
    while x <= grid_hi {
        let v = silu_prime(x);
        if v > best {
            best = v;
            best_x = x;
        }
        x += grid_step;
    }
    // Ternary refinement in the bracketing interval.
    let mut lo = best_x - grid_step;
    let mut hi = best_x + grid_step;
    for _ in 0..200 {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if silu_prime(m1) < silu_prime(m2) {
            lo = m1;
        } else {
            hi = m2;
        }
    }
    let argmax = 0.5 * (lo + hi);
    Ok((argmax, silu_prime(argmax)))
}
