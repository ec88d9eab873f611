//! Monte-Carlo checks of the distributional facts behind the bounds:
//! the `zz^T` entry variances, the attention-output variance law
//! `var(W_O) var(W_V) var(x) d^2 / L`, and the RMSNorm Jacobian reading.

use crate::error::{Error, Result};
use crate::model::attention::{attention_forward, AttentionHeads};
use crate::model::norm::rms_norm;
use crate::numerics::{
    finite_diff_jacobian, gaussian_matrix, spectral_norm, MomentAccumulator, Matrix, RandomSource,
};

#[derive(Debug, Clone, Copy)]
pub struct ZzVariance {
    /// Monte-Carlo variance of `z_i z_i` (chi-squared with 1 dof: 2).
    pub diag_var: f64,
    /// Monte-Carlo variance of `z_i z_j`, i != j (product of independents: 1).
    pub offdiag_var: f64,
    /// Largest observed `|z_i z_j| / d` over all draws.
    pub max_abs_entry_over_d: f64,
}

/// Samples standardized vectors and measures the entry variances of
/// `z z^T`. Standardization is empirical per vector, mirroring what LN does.
pub fn zz_variance_mc(d: usize, samples: usize, rng: &mut RandomSource) -> Result<ZzVariance> {
    if d < 2 {
        return Err(Error::InvalidDimension("zz_variance_mc needs d >= 2".into()));
    }
    if samples < 1000 {
        return Err(Error::InvalidArgument(format!(
            "zz_variance_mc needs >= 1000 samples, got {samples}"
        )));
    }
    let mut diag = MomentAccumulator::new();
    let mut offdiag = MomentAccumulator::new();
    let mut max_over_d = 0.0_f64;
    let mut z = vec![0.0; d];
    for _ in 0..samples {
        rng.fill_gaussian(&mut z, 0.0, 1.0);
        let mean = z.iter().sum::<f64>() / d as f64;
        let var = z.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
        let inv = 1.0 / var.sqrt();
        let mut max_abs = 0.0_f64;
        for v in &mut z {
            *v = (*v - mean) * inv;
            max_abs = max_abs.max(v.abs());
        }
        for &v in &z {
            diag.push(v * v);
        }
        // Disjoint consecutive pairs: independent products within the draw.
        for pair in z.chunks_exact(2) {
            offdiag.push(pair[0] * pair[1]);
        }
        max_over_d = max_over_d.max(max_abs * max_abs / d as f64);
    }
    Ok(ZzVariance {
        diag_var: diag.stats().std.powi(2),
        offdiag_var: offdiag.stats().std.powi(2),
        max_abs_entry_over_d: max_over_d,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct AttnVarianceRow {
    pub len: usize,
    pub mc_variance: f64,
    pub analytic: f64,
}

/// Monte-Carlo variance of single-head attention output under uniform
/// attention (`W_Q = 0`), next to the analytic `d^2 / L` law.
pub fn attn_variance_vs_length(
    d: usize,
    var_wo: f64,
    var_wv: f64,
    var_x: f64,
    lengths: &[usize],
    samples: usize,
    rng: &mut RandomSource,
) -> Result<Vec<AttnVarianceRow>> {
    if d == 0 || lengths.is_empty() || samples == 0 {
        return Err(Error::InvalidArgument(
            "attn_variance_vs_length needs d, lengths, samples".into(),
        ));
    }
    let mut rows = Vec::with_capacity(lengths.len());
    for &l in lengths {
        if l == 0 {
            return Err(Error::InvalidArgument("zero sequence length".into()));
        }
        let mut acc = MomentAccumulator::new();
        for _ in 0..samples {
            let w_q = vec![Matrix::zeros(d, d)];
            let w_k = vec![Matrix::zeros(d, d)];
            let w_v = vec![gaussian_matrix(d, d, 0.0, var_wv.sqrt(), rng)?];
            let w_o = gaussian_matrix(d, d, 0.0, var_wo.sqrt(), rng)?;
            let x = gaussian_matrix(d, l, 0.0, var_x.sqrt(), rng)?;
            let heads = AttentionHeads {
                w_q: &w_q,
                w_k: &w_k,
                w_v: &w_v,
                w_o: &w_o,
            };
            let out = attention_forward(&x, &heads, false)?;
            // Uniform attention makes all columns equal; one column carries
            // all the information of this draw.
            acc.extend(&out.col(0));
        }
        let mc_variance = acc.stats().std.powi(2);
        let analytic = var_wo * var_wv * var_x * (d as f64).powi(2) / l as f64;
        rows.push(AttnVarianceRow {
            len: l,
            mc_variance,
            analytic,
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy)]
pub struct RmsNormJacobianCheck {
    pub dim: usize,
    /// Population std of the probe input.
    pub sigma: f64,
    /// Spectral norm of the finite-difference Jacobian; this is the quantity
    /// the gradient bounds consume, and it approaches `1/sigma`.
    pub jacobian_norm: f64,
    /// `|| J - (1/sigma) I ||_2 / (1/sigma)`. This does NOT vanish with
    /// width: the Jacobian annihilates the input direction, so the
    /// difference always carries a rank-one component of size ~`1/sigma`.
    /// Recorded for honesty; nothing downstream relies on it being small.
    pub spectral_rel_deviation: f64,
    /// `|| J - (1/sigma) I ||_F / || (1/sigma) I ||_F`, the sense in which
    /// the identity-scaling reading becomes exact: shrinks like `1/sqrt(d)`.
    pub frobenius_rel_deviation: f64,
}

/// Compares the finite-difference Jacobian of RMSNorm against the
/// `(1/sigma) I` reading used by the bounds.
pub fn rmsnorm_jacobian_check(x: &[f64], rng: &mut RandomSource) -> Result<RmsNormJacobianCheck> {
    let d = x.len();
    if d < 2 {
        return Err(Error::InvalidDimension(
            "rmsnorm_jacobian_check needs d >= 2".into(),
        ));
    }
    let mean = x.iter().sum::<f64>() / d as f64;
    let sigma = (x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64).sqrt();
    if sigma == 0.0 {
        return Err(Error::DegenerateNorm("constant probe input".into()));
    }
    let jac = finite_diff_jacobian(|v| rms_norm(v).unwrap(), x, 1e-6)?;
    let jac_norm = spectral_norm(&jac, 1e-8, 2000, rng)?.value;

    let mut diff = jac.clone();
    let inv_sigma = 1.0 / sigma;
    for i in 0..d {
        diff.set(i, i, diff.get(i, i) - inv_sigma);
    }
    let diff_spectral = spectral_norm(&diff, 1e-8, 2000, rng)?.value;
    let identity_fro = (d as f64).sqrt() * inv_sigma;
    Ok(RmsNormJacobianCheck {
        dim: d,
        sigma,
        jacobian_norm: jac_norm,
        spectral_rel_deviation: diff_spectral / inv_sigma,
        frobenius_rel_deviation: diff.frobenius_norm() / identity_fro,
    })
}
