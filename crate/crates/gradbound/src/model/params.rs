//! Weight tensors, their initialization schemes, and uniform traversal.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::config::{Activation, ModelConfig, NormKind};
use crate::numerics::{gaussian_matrix, Matrix, RandomSource};

/// Initialization scheme for every weight tensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Initializer {
    /// `N(0, 2/(5d))` for all tensors, then `W2` and `W_O` scaled by
    /// `sqrt(1/(2N))`. The widely used LLM initialization.
    MegatronSmall,
    /// `N(0, 2/(fan_in + fan_out))` per tensor, no depth scaling.
    Xavier,
}

impl Initializer {
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "megatron-small" | "megatronsmall" | "megatron" => Ok(Self::MegatronSmall),
            "xavier" => Ok(Self::Xavier),
            other => Err(Error::Config(format!("unknown initializer '{other}'"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::MegatronSmall => "megatron-small",
            Self::Xavier => "xavier",
        }
    }
}

/// Learned gain (and, for LayerNorm, bias) of one normalization site.
/// Stored as 1 x d matrices so optimizer/checkpoint traversal is uniform.
#[derive(Debug, Clone, PartialEq)]
pub struct NormParams {
    pub gain: Matrix,
    pub bias: Option<Matrix>,
}

impl NormParams {
    pub fn new(d: usize, kind: NormKind) -> Self {
        Self {
            gain: Matrix::from_vec_unchecked(1, d, vec![1.0; d]),
            bias: match kind {
                NormKind::LayerNorm => Some(Matrix::zeros(1, d)),
                NormKind::RmsNorm => None,
            },
        }
    }

    fn zeros_like(&self) -> Self {
        Self {
            gain: Matrix::zeros(1, self.gain.cols()),
            bias: self.bias.as_ref().map(|b| Matrix::zeros(1, b.cols())),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub w1: Matrix,        // d_ffn x d
    pub w2: Matrix,        // d x d_ffn
    pub v: Option<Matrix>, // d_ffn x d, SwiGLU gate
    pub w_q: Vec<Matrix>,  // h blocks of d_head x d
    pub w_k: Vec<Matrix>,
    pub w_v: Vec<Matrix>,
    pub w_o: Matrix, // d x d
    pub attn_norm: Option<NormParams>,
    pub ffn_norm: Option<NormParams>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Parameters {
    pub embedding: Matrix,             // vocab x d
    pub pos_embedding: Option<Matrix>, // seq_len x d
    pub layers: Vec<LayerParams>,
    pub final_norm: Option<NormParams>,
    /// Affine state of the embedding LN (EmbedLn mode with norm_affine on).
    pub embed_norm: Option<NormParams>,
    pub output_proj: Matrix, // d x vocab
}

/// Gradients mirror `Parameters` tensor for tensor.
pub type Gradients = Parameters;

fn megatron_sigma(d: usize) -> f64 {
    (2.0 / (5.0 * d as f64)).sqrt()
}

fn xavier_sigma(rows: usize, cols: usize) -> f64 {
    (2.0 / (rows + cols) as f64).sqrt()
}

/// Samples one layer's tensors. Exposed within the crate so bound reports on
/// large shapes can stream layer by layer without materializing the full
/// model; the rng consumption order matches `init_parameters` exactly.
pub(crate) fn init_layer(
    config: &ModelConfig,
    scheme: Initializer,
    rng: &mut RandomSource,
) -> LayerParams {
    let d = config.d;
    let d_head = config.d_head();
    let depth_scale = (1.0 / (2.0 * config.num_layers as f64)).sqrt();
    let sample = |rows: usize, cols: usize, rng: &mut RandomSource| {
        let sigma = match scheme {
            Initializer::MegatronSmall => megatron_sigma(d),
            Initializer::Xavier => xavier_sigma(rows, cols),
        };
        gaussian_matrix(rows, cols, 0.0, sigma, rng).expect("valid init shape")
    };

    let w1 = sample(config.d_ffn, d, rng);
    let mut w2 = sample(d, config.d_ffn, rng);
    // V follows the W1 statistics and is not depth-rescaled.
    let v = match config.activation {
        Activation::SwiGLU => Some(sample(config.d_ffn, d, rng)),
        _ => None,
    };
    let w_q: Vec<Matrix> = (0..config.num_heads)
        .map(|_| sample(d_head, d, rng))
        .collect();
    let w_k: Vec<Matrix> = (0..config.num_heads)
        .map(|_| sample(d_head, d, rng))
        .collect();
    let w_v: Vec<Matrix> = (0..config.num_heads)
        .map(|_| sample(d_head, d, rng))
        .collect();
    let mut w_o = sample(d, d, rng);

    if scheme == Initializer::MegatronSmall {
        w2.scale_in_place(depth_scale);
        w_o.scale_in_place(depth_scale);
    }

    let affine = |kind| {
        if config.norm_affine {
            Some(NormParams::new(d, kind))
        } else {
            None
        }
    };
    LayerParams {
        w1,
        w2,
        v,
        w_q,
        w_k,
        w_v,
        w_o,
        attn_norm: affine(config.norm_kind),
        ffn_norm: affine(config.norm_kind),
    }
}

pub(crate) fn init_embedding(
    config: &ModelConfig,
    scheme: Initializer,
    rng: &mut RandomSource,
) -> Matrix {
    let sigma = match scheme {
        Initializer::MegatronSmall => megatron_sigma(config.d),
        Initializer::Xavier => xavier_sigma(config.vocab_size, config.d),
    };
    gaussian_matrix(config.vocab_size, config.d, 0.0, sigma, rng).expect("valid embedding shape")
}

/// Samples all weight tensors for `config` under `scheme`.
pub fn init_parameters(
    config: &ModelConfig,
    scheme: Initializer,
    rng: &mut RandomSource,
) -> Result<Parameters> {
    config.validate()?;
    let d = config.d;

    let embedding = init_embedding(config, scheme, rng);
    let pos_embedding = if config.pos_embedding {
        let sigma = match scheme {
            Initializer::MegatronSmall => megatron_sigma(d),
            Initializer::Xavier => xavier_sigma(config.seq_len, d),
        };
        Some(gaussian_matrix(config.seq_len, d, 0.0, sigma, rng)?)
    } else {
        None
    };

    let layers = (0..config.num_layers)
        .map(|_| init_layer(config, scheme, rng))
        .collect();

    let sigma_out = match scheme {
        Initializer::MegatronSmall => megatron_sigma(d),
        Initializer::Xavier => xavier_sigma(d, config.vocab_size),
    };
    let output_proj = gaussian_matrix(d, config.vocab_size, 0.0, sigma_out, rng)?;

    let affine = |kind| {
        if config.norm_affine {
            Some(NormParams::new(d, kind))
        } else {
            None
        }
    };
    Ok(Parameters {
        embedding,
        pos_embedding,
        layers,
        final_norm: affine(config.norm_kind),
        embed_norm: if config.norm_affine && config.embed_mode.name() == "embed-ln" {
            affine(config.norm_kind)
        } else {
            None
        },
        output_proj,
    })
}

/// One named tensor slot, with its weight-decay eligibility (embeddings and
/// norms are excluded from decoupled weight decay).
pub struct TensorSlot<'a> {
    pub name: String,
    pub tensor: &'a Matrix,
    pub decay: bool,
}

impl Parameters {
    /// Zero-filled tensors with the shapes `config` implies. Used by the
    /// checkpoint reader as a skeleton to fill.
    pub fn shaped(config: &ModelConfig) -> Result<Parameters> {
        config.validate()?;
        let d = config.d;
        let d_head = config.d_head();
        let affine = |kind| {
            if config.norm_affine {
                Some(NormParams::new(d, kind))
            } else {
                None
            }
        };
        let layers = (0..config.num_layers)
            .map(|_| LayerParams {
                w1: Matrix::zeros(config.d_ffn, d),
                w2: Matrix::zeros(d, config.d_ffn),
                v: match config.activation {
                    Activation::SwiGLU => Some(Matrix::zeros(config.d_ffn, d)),
                    _ => None,
                },
                w_q: (0..config.num_heads).map(|_| Matrix::zeros(d_head, d)).collect(),
                w_k: (0..config.num_heads).map(|_| Matrix::zeros(d_head, d)).collect(),
                w_v: (0..config.num_heads).map(|_| Matrix::zeros(d_head, d)).collect(),
                w_o: Matrix::zeros(d, d),
                attn_norm: affine(config.norm_kind),
                ffn_norm: affine(config.norm_kind),
            })
            .collect();
        Ok(Parameters {
            embedding: Matrix::zeros(config.vocab_size, d),
            pos_embedding: if config.pos_embedding {
                Some(Matrix::zeros(config.seq_len, d))
            } else {
                None
            },
            layers,
            final_norm: affine(config.norm_kind),
            embed_norm: if config.norm_affine && config.embed_mode.name() == "embed-ln" {
                affine(config.norm_kind)
            } else {
                None
            },
            output_proj: Matrix::zeros(d, config.vocab_size),
        })
    }

    /// Zero-filled gradients with congruent shapes.
    pub fn zeros_like(&self) -> Gradients {
        Parameters {
            embedding: Matrix::zeros(self.embedding.rows(), self.embedding.cols()),
            pos_embedding: self
                .pos_embedding
                .as_ref()
                .map(|p| Matrix::zeros(p.rows(), p.cols())),
            layers: self
                .layers
                .iter()
                .map(|l| LayerParams {
                    w1: Matrix::zeros(l.w1.rows(), l.w1.cols()),
                    w2: Matrix::zeros(l.w2.rows(), l.w2.cols()),
                    v: l.v.as_ref().map(|m| Matrix::zeros(m.rows(), m.cols())),
                    w_q: l
                        .w_q
                        .iter()
                        .map(|m| Matrix::zeros(m.rows(), m.cols()))
                        .collect(),
                    w_k: l
                        .w_k
                        .iter()
                        .map(|m| Matrix::zeros(m.rows(), m.cols()))
                        .collect(),
                    w_v: l
                        .w_v
                        .iter()
                        .map(|m| Matrix::zeros(m.rows(), m.cols()))
                        .collect(),
                    w_o: Matrix::zeros(l.w_o.rows(), l.w_o.cols()),
                    attn_norm: l.attn_norm.as_ref().map(|n| n.zeros_like()),
                    ffn_norm: l.ffn_norm.as_ref().map(|n| n.zeros_like()),
                })
                .collect(),
            final_norm: self.final_norm.as_ref().map(|n| n.zeros_like()),
            embed_norm: self.embed_norm.as_ref().map(|n| n.zeros_like()),
            output_proj: Matrix::zeros(self.output_proj.rows(), self.output_proj.cols()),
        }
    }

    pub fn num_values(&self) -> usize {
        self.tensors().iter().map(|s| s.tensor.len()).sum()
    }

    /// All tensors in declaration order. This order defines the checkpoint
    /// layout and the optimizer state layout.
    pub fn tensors(&self) -> Vec<TensorSlot<'_>> {
        let mut out = Vec::new();
        self.for_each_tensor(|name, tensor, decay| {
            out.push(TensorSlot {
                name,
                tensor,
                decay,
            })
        });
        out
    }

    fn for_each_tensor<'a>(&'a self, mut f: impl FnMut(String, &'a Matrix, bool)) {
        f("embedding".into(), &self.embedding, false);
        if let Some(p) = &self.pos_embedding {
            f("pos_embedding".into(), p, false);
        }
        for (n, l) in self.layers.iter().enumerate() {
            f(format!("layer{n}.w1"), &l.w1, true);
            f(format!("layer{n}.w2"), &l.w2, true);
            if let Some(v) = &l.v {
                f(format!("layer{n}.v"), v, true);
            }
            for (h, m) in l.w_q.iter().enumerate() {
                f(format!("layer{n}.w_q{h}"), m, true);
            }
            for (h, m) in l.w_k.iter().enumerate() {
                f(format!("layer{n}.w_k{h}"), m, true);
            }
            for (h, m) in l.w_v.iter().enumerate() {
                f(format!("layer{n}.w_v{h}"), m, true);
            }
            f(format!("layer{n}.w_o"), &l.w_o, true);
            if let Some(nrm) = &l.attn_norm {
                f(format!("layer{n}.attn_norm.gain"), &nrm.gain, false);
                if let Some(b) = &nrm.bias {
                    f(format!("layer{n}.attn_norm.bias"), b, false);
                }
            }
            if let Some(nrm) = &l.ffn_norm {
                f(format!("layer{n}.ffn_norm.gain"), &nrm.gain, false);
                if let Some(b) = &nrm.bias {
                    f(format!("layer{n}.ffn_norm.bias"), b, false);
                }
            }
        }
        if let Some(nrm) = &self.final_norm {
            f("final_norm.gain".into(), &nrm.gain, false);
            if let Some(b) = &nrm.bias {
                f("final_norm.bias".into(), b, false);
            }
        }
        if let Some(nrm) = &self.embed_norm {
            f("embed_norm.gain".into(), &nrm.gain, false);
            if let Some(b) = &nrm.bias {
                f("embed_norm.bias".into(), b, false);
            }
        }
        f("output_proj".into(), &self.output_proj, true);
    }

    /// Mutable traversal in the same order as [`Parameters::tensors`].
    pub fn tensors_mut(&mut self) -> Vec<(String, &mut Matrix, bool)> {
        let mut out: Vec<(String, &mut Matrix, bool)> = Vec::new();
        out.push(("embedding".into(), &mut self.embedding, false));
        if let Some(p) = &mut self.pos_embedding {
            out.push(("pos_embedding".into(), p, false));
        }
        for (n, l) in self.layers.iter_mut().enumerate() {
            out.push((format!("layer{n}.w1"), &mut l.w1, true));
            out.push((format!("layer{n}.w2"), &mut l.w2, true));
            if let Some(v) = &mut l.v {
                out.push((format!("layer{n}.v"), v, true));
            }
            for (h, m) in l.w_q.iter_mut().enumerate() {
                out.push((format!("layer{n}.w_q{h}"), m, true));
            }
            for (h, m) in l.w_k.iter_mut().enumerate() {
                out.push((format!("layer{n}.w_k{h}"), m, true));
            }
            for (h, m) in l.w_v.iter_mut().enumerate() {
                out.push((format!("layer{n}.w_v{h}"), m, true));
            }
            out.push((format!("layer{n}.w_o"), &mut l.w_o, true));
            if let Some(nrm) = &mut l.attn_norm {
                out.push((format!("layer{n}.attn_norm.gain"), &mut nrm.gain, false));
                if let Some(b) = &mut nrm.bias {
                    out.push((format!("layer{n}.attn_norm.bias"), b, false));
                }
            }
            if let Some(nrm) = &mut l.ffn_norm {
                out.push((format!("layer{n}.ffn_norm.gain"), &mut nrm.gain, false));
                if let Some(b) = &mut nrm.bias {
                    out.push((format!("layer{n}.ffn_norm.bias"), b, false));
                }
            }
        }
        if let Some(nrm) = &mut self.final_norm {
            out.push(("final_norm.gain".into(), &mut nrm.gain, false));
            if let Some(b) = &mut nrm.bias {
                out.push(("final_norm.bias".into(), b, false));
            }
        }
        if let Some(nrm) = &mut self.embed_norm {
            out.push(("embed_norm.gain".into(), &mut nrm.gain, false));
            if let Some(b) = &mut nrm.bias {
                out.push(("embed_norm.bias".into(), b, false));
            }
        }
        out.push(("output_proj".into(), &mut self.output_proj, true));
        out
    }

    pub fn all_finite(&self) -> bool {
        self.tensors().iter().all(|s| s.tensor.all_finite())
    }

    /// Rounds every value to its nearest f32 (single-precision storage).
    pub fn quantize_f32(&mut self) {
        for (_, t, _) in self.tensors_mut() {
            for v in t.as_mut_slice() {
                *v = *v as f32 as f64;
            }
        }
    }

    /// Tensor-wise `self += other`; shapes must mirror.
    pub fn accumulate(&mut self, other: &Parameters) {
        let others = other.tensors();
        for ((name, t, _), slot) in self.tensors_mut().into_iter().zip(others.iter()) {
            assert_eq!(name, slot.name, "parameter traversal mismatch");
            t.axpy(1.0, slot.tensor);
        }
    }

    /// Tensor-wise scaling of every value.
    pub fn scale_all(&mut self, s: f64) {
        for (_, t, _) in self.tensors_mut() {
            t.scale_in_place(s);
        }
    }
}
