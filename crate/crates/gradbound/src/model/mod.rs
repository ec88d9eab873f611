//! The Pre-LN transformer under study: `x' = x + Attn(LN(x))`,
//! `y = x' + FFN(LN(x'))`, with exact manual backpropagation, the
//! initialization schemes and embedding treatments being compared, and
//! RMSNorm / ReLU / SiLU / SwiGLU variants.
//!
//! Normalization carries no learned affine by default (`norm_affine`
//! turns it on), there are no biases anywhere, and weights are untied.

pub mod activation;
pub mod attention;
pub mod backward;
pub mod checkpoint;
pub mod config;
pub mod ffn;
pub mod forward;
pub mod gradcheck;
pub mod loss;
pub mod norm;
pub mod params;

pub use attention::{attention_forward, AttentionHeads};
pub use backward::model_backward;
pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use config::{Activation, EmbedMode, ModelConfig, NormKind};
pub use ffn::ffn_forward;
pub use forward::{embed, layer_forward, model_forward, ForwardCache, RunMode};
pub use gradcheck::{run_gradcheck, GradcheckReport};
pub use loss::cross_entropy;
pub use norm::{layer_norm, rms_norm};
pub use params::{init_parameters, Gradients, Initializer, LayerParams, NormParams, Parameters};
