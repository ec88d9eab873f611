//! Central-difference Jacobians: the numerical oracle every analytic
//! derivative in this crate is checked against.

use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// Jacobian of `f` at `x` by central differences; column `i` is
/// `(f(x + eps e_i) - f(x - eps e_i)) / (2 eps)`.
pub fn finite_diff_jacobian<F>(f: F, x: &[f64], eps: f64) -> Result<Matrix>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "finite_diff_jacobian eps must be positive, got {eps}"
        )));
    }
    if x.is_empty() {
        return Err(Error::InvalidDimension(
            "finite_diff_jacobian needs a nonempty input".into(),
        ));
    }
    let out_dim = f(x).len();
    if out_dim == 0 {
        return Err(Error::InvalidDimension(
            "finite_diff_jacobian: f returned an empty vector".into(),
        ));
    }

    let mut jac = Matrix::zeros(out_dim, x.len());
    let mut probe = x.to_vec();
    for j in 0..x.len() {
        let orig = probe[j];
        probe[j] = orig + eps;
        let plus = f(&probe);
        probe[j] = orig - eps;
        let minus = f(&probe);
        probe[j] = orig;
        assert_eq!(plus.len(), out_dim, "f output dimension changed");
        assert_eq!(minus.len(), out_dim, "f output dimension changed");
        for i in 0..out_dim {
            jac.set(i, j, (plus[i] - minus[i]) / (2.0 * eps));
        }
    }
    Ok(jac)
}

/// Central-difference gradient of a scalar function.
pub fn finite_diff_gradient<F>(f: F, x: &[f64], eps: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> f64,
{
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "finite_diff_gradient eps must be positive, got {eps}"
        )));
    }
    let mut grad = vec![0.0; x.len()];
    let mut probe = x.to_vec();
    for j in 0..x.len() {
        let orig = probe[j];
        probe[j] = orig + eps;
        let plus = f(&probe);
        probe[j] = orig - eps;
        let minus = f(&probe);
        probe[j] = orig;
        grad[j] = (plus - minus) / (2.0 * eps);
    }
    Ok(grad)
}
