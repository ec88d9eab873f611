//! Shared test oracles, independent of the library's implementation paths.

#![allow(dead_code)]

use gradbound::numerics::Matrix;

/// Singular values by one-sided Jacobi rotations, descending. Independent
/// oracle for the power-iteration spectral norm; intended for sizes <= 512.
pub fn jacobi_singular_values(m: &Matrix) -> Vec<f64> {
    // Orient so columns are the short side; singular values are invariant.
    let work = if m.cols() > m.rows() {
        m.transpose()
    } else {
        m.clone()
    };
    let rows = work.rows();
    let cols = work.cols();
    // Column-major copy for cache-friendly column rotations.
    let mut a: Vec<Vec<f64>> = (0..cols).map(|j| work.col(j)).collect();

    let tol = 1e-12;
    for _sweep in 0..60 {
        let mut off = 0.0_f64;
        for p in 0..cols {
            for q in (p + 1)..cols {
                let mut alpha = 0.0;
                let mut beta = 0.0;
                let mut gamma = 0.0;
                for i in 0..rows {
                    alpha += a[p][i] * a[p][i];
                    beta += a[q][i] * a[q][i];
                    gamma += a[p][i] * a[q][i];
                }
                if alpha == 0.0 || beta == 0.0 {
                    continue;
                }
                off = off.max(gamma.abs() / (alpha * beta).sqrt());
                if gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..rows {
                    let ap = a[p][i];
                    let aq = a[q][i];
                    a[p][i] = c * ap - s * aq;
                    a[q][i] = s * ap + c * aq;
                }
            }
        }
        if off <= tol {
            break;
        }
    }

    let mut singular: Vec<f64> = a
        .iter()
        .map(|col| col.iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    singular.sort_by(|x, y| y.partial_cmp(x).expect("finite singular values"));
    singular
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}
