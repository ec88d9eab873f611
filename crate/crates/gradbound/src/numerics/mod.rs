//! Deterministic dense linear algebra, seeded sampling, spectral-norm
//! estimation, moment statistics, and the finite-difference oracle.
//!
//! Everything here is a pure function of its inputs; matrices are immutable
//! after construction and safe to share across threads.

mod finite_diff;
mod matrix;
mod rng;
mod spectral;
mod stats;

pub use finite_diff::{finite_diff_gradient, finite_diff_jacobian};
pub use matrix::{vec_dot, vec_norm, Matrix};
pub use rng::{gaussian_matrix, RandomSource};
pub use spectral::{
    expected_spectral_norm, spectral_norm, SpectralNormEstimate, DEFAULT_SPECTRAL_MAX_ITERS,
    DEFAULT_SPECTRAL_TOL,
};
pub use stats::{
    column_std, pooled_std, pooled_std_many, sample_stats, stats_of, MomentAccumulator,
    SampleStats,
};
