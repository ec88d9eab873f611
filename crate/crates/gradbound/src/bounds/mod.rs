//! Analytic upper bounds on sub-layer Jacobian spectral norms, the
//! Monte-Carlo checks behind them, and empirical probes that verify the
//! inequalities on real models.

mod formulas;
mod mc;
mod probes;

pub use formulas::{
    attn_upper_bound, c_ffn, c_swiglu, ffn_upper_bound, jz_bound, ln_jacobian_analytic,
    silu_derivative_max, SILU_DERIVATIVE_BOUND,
};
pub use mc::{
    attn_variance_vs_length, rmsnorm_jacobian_check, zz_variance_mc, AttnVarianceRow,
    RmsNormJacobianCheck, ZzVariance,
};
pub use probes::{
    embedding_shortcut_std, layer1_bound_from_init, layerwise_bound_report,
    measure_shortcut_stats, probe_sublayer_jacobian, probe_token_batches,
    streamed_bound_reports, BoundReport, JacobianProbe, LayerBound, SublayerKind, SublayerStats,
};
