//! Architecture configuration and embedding treatments.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Identity,
    ReLU,
    SiLU,
    SwiGLU,
}

impl Activation {
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "identity" => Ok(Self::Identity),
            "relu" => Ok(Self::ReLU),
            "silu" => Ok(Self::SiLU),
            "swiglu" => Ok(Self::SwiGLU),
            other => Err(Error::Config(format!("unknown activation '{other}'"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Identity => "identity",
            Self::ReLU => "relu",
            Self::SiLU => "silu",
            Self::SwiGLU => "swiglu",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormKind {
    LayerNorm,
    RmsNorm,
}

impl NormKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "layernorm" | "ln" => Ok(Self::LayerNorm),
            "rmsnorm" | "rms" => Ok(Self::RmsNorm),
            other => Err(Error::Config(format!("unknown norm kind '{other}'"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::LayerNorm => "layernorm",
            Self::RmsNorm => "rmsnorm",
        }
    }
}

/// How token embeddings enter the first layer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum EmbedMode {
    /// Plain lookup.
    Vanilla,
    /// Lookup multiplied by a constant; `None` means the default `sqrt(d)`.
    ScaledEmbed { factor: Option<f64> },
    /// Layer normalization applied to each embedding position.
    EmbedLn,
    /// Forward identical to Vanilla; the embedding-table gradient is
    /// multiplied by `gamma` (shrink embedding gradient).
    EmbedDetach { gamma: f64 },
}

pub const DEFAULT_DETACH_GAMMA: f64 = 0.1;

impl EmbedMode {
    pub fn scaled_default() -> Self {
        Self::ScaledEmbed { factor: None }
    }

    pub fn detach_default() -> Self {
        Self::EmbedDetach {
            gamma: DEFAULT_DETACH_GAMMA,
        }
    }

    /// Multiplier applied to the embedding lookup in the forward pass.
    pub fn forward_scale(&self, d: usize) -> f64 {
        match self {
            Self::ScaledEmbed { factor } => factor.unwrap_or((d as f64).sqrt()),
            _ => 1.0,
        }
    }

    /// Multiplier applied to the embedding-table gradient.
    pub fn gradient_scale(&self) -> f64 {
        match self {
            Self::EmbedDetach { gamma } => *gamma,
            _ => 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::ScaledEmbed { factor: Some(f) } if !(*f > 0.0 && f.is_finite()) => Err(
                Error::Config(format!("scaled-embed factor must be positive, got {f}")),
            ),
            Self::EmbedDetach { gamma } if !(*gamma > 0.0 && *gamma <= 1.0) => Err(Error::Config(
                format!("embed-detach gamma must be in (0, 1], got {gamma}"),
            )),
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Vanilla => "vanilla",
            Self::ScaledEmbed { .. } => "scaled-embed",
            Self::EmbedLn => "embed-ln",
            Self::EmbedDetach { .. } => "embed-detach",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub num_layers: usize,
    pub d: usize,
    pub d_ffn: usize,
    pub num_heads: usize,
    pub seq_len: usize,
    pub vocab_size: usize,
    pub activation: Activation,
    pub norm_kind: NormKind,
    pub embed_mode: EmbedMode,
    pub causal_mask: bool,
    pub dropout_rate: f64,
    /// Learned gain/bias on every normalization. Off by default: the
    /// analysis treats normalization as pure scaling.
    pub norm_affine: bool,
    /// Learned absolute positional embedding, off by default (the analysis
    /// carries no positional information).
    pub pos_embedding: bool,
}

impl ModelConfig {
    /// Head dimension; `d` must be divisible by `num_heads`.
    pub fn d_head(&self) -> usize {
        self.d / self.num_heads
    }

    pub fn validate(&self) -> Result<()> {
        if self.d < 2 {
            return Err(Error::Config(format!(
                "d must be >= 2 for normalization, got {}",
                self.d
            )));
        }
        if self.num_heads == 0 || self.d % self.num_heads != 0 {
            return Err(Error::Config(format!(
                "d ({}) must be a positive multiple of num_heads ({})",
                self.d, self.num_heads
            )));
        }
        if self.d_ffn == 0 {
            return Err(Error::Config("d_ffn must be >= 1".into()));
        }
        if self.seq_len == 0 {
            return Err(Error::Config("seq_len must be >= 1".into()));
        }
        if self.vocab_size == 0 {
            return Err(Error::Config("vocab_size must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::Config(format!(
                "dropout_rate must be in [0, 1), got {}",
                self.dropout_rate
            )));
        }
        self.embed_mode.validate()
    }

    /// A small byte-LM shape used throughout the tests and as the CLI
    /// template default.
    pub fn toy() -> Self {
        Self {
            num_layers: 2,
            d: 64,
            d_ffn: 256,
            num_heads: 2,
            seq_len: 32,
            vocab_size: 256,
            activation: Activation::ReLU,
            norm_kind: NormKind::LayerNorm,
            embed_mode: EmbedMode::Vanilla,
            causal_mask: true,
            dropout_rate: 0.0,
            norm_affine: false,
            pos_embedding: false,
        }
    }

    /// The 1.7B-parameter shape (layers 24, d 2304, d_ffn 9216, heads 24).
    /// Only used for bound reports; never trained here.
    pub fn shape_1p7b() -> Self {
        Self {
            num_layers: 24,
            d: 2304,
            d_ffn: 9216,
            num_heads: 24,
            seq_len: 2048,
            vocab_size: 256,
            activation: Activation::Identity,
            norm_kind: NormKind::LayerNorm,
            embed_mode: EmbedMode::Vanilla,
            causal_mask: true,
            dropout_rate: 0.1,
            norm_affine: false,
            pos_embedding: false,
        }
    }

    pub fn with_embed_mode(mut self, mode: EmbedMode) -> Self {
        self.embed_mode = mode;
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validate_catches_bad_shapes() {
        let mut c = ModelConfig::toy();
        assert!(c.validate().is_ok());
        c.num_heads = 3; // 64 % 3 != 0
        assert!(c.validate().is_err());
        c = ModelConfig::toy();
        c.dropout_rate = 1.0;
        assert!(c.validate().is_err());
        c = ModelConfig::toy();
        c.embed_mode = EmbedMode::EmbedDetach { gamma: 0.0 };
        assert!(c.validate().is_err());
        c.embed_mode = EmbedMode::ScaledEmbed { factor: Some(-2.0) };
        assert!(c.validate().is_err());
    }

    #[test]
    fn scaled_embed_defaults_to_sqrt_d() {
        let mode = EmbedMode::scaled_default();
        assert_eq!(mode.forward_scale(2304), (2304.0_f64).sqrt());
        let fixed = EmbedMode::ScaledEmbed { factor: Some(3.0) };
        assert_eq!(fixed.forward_scale(2304), 3.0);
        assert_eq!(EmbedMode::Vanilla.forward_scale(16), 1.0);
    }

    #[test]
    fn gradient_scale_only_for_detach() {
        assert_eq!(EmbedMode::Vanilla.gradient_scale(), 1.0);
        assert_eq!(EmbedMode::detach_default().gradient_scale(), 0.1);
        assert_eq!(EmbedMode::EmbedLn.gradient_scale(), 1.0);
    }
}
