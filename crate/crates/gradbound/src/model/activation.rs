//! FFN activation functions and their derivatives.

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `x * sigmoid(x)` (a.k.a. Swish).
pub fn silu(x: f64) -> f64 {
    x * sigmoid(x)
}

/// `d/dx silu(x) = sigmoid(x) (1 + x (1 - sigmoid(x)))`.
pub fn silu_prime(x: f64) -> f64 {
    let s = sigmoid(x);
    s * (1.0 + x * (1.0 - s))
}

pub fn relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

pub fn relu_prime(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        0.0
    }
}
