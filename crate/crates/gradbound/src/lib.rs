//! Spectral-norm analysis of Pre-LN transformer sub-layers.
//!
//! This crate implements, at desk scale, the machinery to study why language
//! models hit loss spikes during pre-training:
//!
//! - [`numerics`]: deterministic dense linear algebra, seeded sampling,
//!   power-iteration spectral norms, moment statistics, and the
//!   finite-difference oracle everything else is checked against.
//! - [`model`]: a Pre-LN transformer with exact manual backpropagation,
//!   the initialization schemes and embedding treatments under study, and
//!   LayerNorm/RMSNorm plus four FFN activations.
//! - [`bounds`]: analytic per-layer upper bounds on sub-layer Jacobian
//!   spectral norms, plus empirical probes that measure the actual norms
//!   and shortcut statistics to verify each inequality.
//! - [`trainer`]: a toy pre-training loop (Adam, warmup+cosine schedule,
//!   gradient clipping) with per-step gradient-norm logging and spike
//!   detection.
//! - [`data`]: byte-level token streams over synthetic corpora.
//! - [`verify`]: a registry of runnable self-checks behind the CLI's
//!   `verify` subcommand.

// Index-heavy numeric kernels read better as explicit loops, and the
// negated comparisons (`!(x > 0.0)`) are deliberate NaN guards.
#![allow(clippy::needless_range_loop)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod data;
mod error;
pub mod model;
pub mod numerics;
pub mod scheme;
pub mod trainer;
pub mod verify;

pub use error::{Error, Result};
