//! Token-level cross entropy with a numerically stable log-softmax.

use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// Mean negative log-likelihood over positions. `logits` is vocab x L,
/// one target id per column. Returns the loss and `d loss / d logits`
/// (`(softmax - onehot) / L` per column).
pub fn cross_entropy(logits: &Matrix, targets: &[usize]) -> Result<(f64, Matrix)> {
    let vocab = logits.rows();
    let l = logits.cols();
    if targets.len() != l {
        return Err(Error::ShapeMismatch(format!(
            "{} targets for {} logit columns",
            targets.len(),
            l
        )));
    }
    for &t in targets {
        if t >= vocab {
            return Err(Error::TokenOutOfRange { id: t, vocab });
        }
    }

    let inv_l = 1.0 / l as f64;
    let mut loss = 0.0;
    let mut d_logits = Matrix::zeros(vocab, l);
    for col in 0..l {
        let mut max = f64::NEG_INFINITY;
        for row in 0..vocab {
            max = max.max(logits.get(row, col));
        }
        let mut denom = 0.0;
        for row in 0..vocab {
            denom += (logits.get(row, col) - max).exp();
        }
        let log_denom = denom.ln();
        let target = targets[col];
        loss += -(logits.get(target, col) - max - log_denom);
        for row in 0..vocab {
            let p = (logits.get(row, col) - max).exp() / denom;
            let onehot = if row == target { 1.0 } else { 0.0 };
            d_logits.set(row, col, (p - onehot) * inv_l);
        }
    }
    Ok((loss * inv_l, d_logits))
}
