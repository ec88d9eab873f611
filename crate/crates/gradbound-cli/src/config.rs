//! Run configuration: line-oriented `key = value` text with dotted
//! sections. `#` starts a comment; unknown keys are rejected; parsing
//! starts from defaults so partial files work. Serializing a config and
//! re-parsing it yields the identical config.

use std::path::PathBuf;

use gradbound::data::CorpusKind;
use gradbound::model::{Activation, EmbedMode, ModelConfig, NormKind};
use gradbound::scheme::SchemeSpec;
use gradbound::trainer::{Precision, TrainConfig};
use gradbound::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Synthetic { kind: CorpusKind, length: usize, noise: f64 },
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundsSettings {
    /// Probe sequence length; `None` means the model's seq_len.
    pub probe_len: Option<usize>,
    pub probe_batches: usize,
}

impl Default for BoundsSettings {
    fn default() -> Self {
        Self {
            probe_len: None,
            probe_batches: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub scheme: SchemeSpec,
    pub data: DataSource,
    pub bounds: BoundsSettings,
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: ModelConfig::toy(),
            train: TrainConfig::default(),
            scheme: SchemeSpec::vanilla(),
            data: DataSource::Synthetic {
                kind: CorpusKind::RepeatingPattern,
                length: 65536,
                noise: 0.05,
            },
            bounds: BoundsSettings::default(),
            out_dir: PathBuf::from("runs"),
        }
    }
}

fn parse_usize(key: &str, v: &str) -> Result<usize> {
    v.parse()
        .map_err(|_| Error::Config(format!("{key}: expected an integer, got '{v}'")))
}

fn parse_u64(key: &str, v: &str) -> Result<u64> {
    v.parse()
        .map_err(|_| Error::Config(format!("{key}: expected an integer, got '{v}'")))
}

fn parse_f64(key: &str, v: &str) -> Result<f64> {
    v.parse()
        .map_err(|_| Error::Config(format!("{key}: expected a number, got '{v}'")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(Error::Config(format!("{key}: expected true/false, got '{v}'"))),
    }
}

impl RunConfig {
    /// Parses config text over the defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut config = Self::default();
        // The scheme may be assembled from explicit fields.
        let mut scheme_embed_factor: Option<f64> = None;
        let mut scheme_embed_gamma: Option<f64> = None;
        let mut scheme_embed_mode: Option<String> = None;

        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected 'key = value'", lineno + 1))
            })?;
            let key = key.trim();
            let value = value.trim();
            match key {
                "model.num_layers" => config.model.num_layers = parse_usize(key, value)?,
                "model.d" => config.model.d = parse_usize(key, value)?,
                "model.d_ffn" => config.model.d_ffn = parse_usize(key, value)?,
                "model.num_heads" => config.model.num_heads = parse_usize(key, value)?,
                "model.seq_len" => config.model.seq_len = parse_usize(key, value)?,
                "model.vocab_size" => config.model.vocab_size = parse_usize(key, value)?,
                "model.activation" => config.model.activation = Activation::parse(value)?,
                "model.norm" => config.model.norm_kind = NormKind::parse(value)?,
                "model.causal_mask" => config.model.causal_mask = parse_bool(key, value)?,
                "model.dropout_rate" => config.model.dropout_rate = parse_f64(key, value)?,
                "model.norm_affine" => config.model.norm_affine = parse_bool(key, value)?,
                "model.pos_embedding" => config.model.pos_embedding = parse_bool(key, value)?,

                "train.lr_peak" => config.train.lr_peak = parse_f64(key, value)?,
                "train.warmup_fraction" => config.train.warmup_fraction = parse_f64(key, value)?,
                "train.total_steps" => config.train.total_steps = parse_usize(key, value)?,
                "train.batch_size" => config.train.batch_size = parse_usize(key, value)?,
                "train.adam_beta1" => config.train.adam_beta1 = parse_f64(key, value)?,
                "train.adam_beta2" => config.train.adam_beta2 = parse_f64(key, value)?,
                "train.weight_decay" => config.train.weight_decay = parse_f64(key, value)?,
                "train.clip_norm" => config.train.clip_norm = parse_f64(key, value)?,
                "train.seed" => config.train.seed = parse_u64(key, value)?,
                "train.precision" => config.train.precision = Precision::parse(value)?,
                "train.log_every" => config.train.log_every = parse_usize(key, value)?,

                "scheme" => config.scheme = SchemeSpec::parse(value)?,
                "scheme.name" => config.scheme.name = value.to_string(),
                "scheme.initializer" => {
                    config.scheme.initializer =
                        gradbound::model::Initializer::parse(value)?
                }
                "scheme.embed_mode" => scheme_embed_mode = Some(value.to_string()),
                "scheme.embed_factor" => scheme_embed_factor = Some(parse_f64(key, value)?),
                "scheme.embed_gamma" => scheme_embed_gamma = Some(parse_f64(key, value)?),

                "data.kind" => match value {
                    "file" => {
                        config.data = DataSource::File(PathBuf::new());
                    }
                    _ => {
                        let kind = CorpusKind::parse(value)?;
                        config.data = match config.data {
                            DataSource::Synthetic { length, noise, .. } => {
                                DataSource::Synthetic { kind, length, noise }
                            }
                            DataSource::File(_) => DataSource::Synthetic {
                                kind,
                                length: 65536,
                                noise: 0.05,
                            },
                        };
                    }
                },
                "data.length" => {
                    if let DataSource::Synthetic { length, .. } = &mut config.data {
                        *length = parse_usize(key, value)?;
                    } else {
                        return Err(Error::Config(
                            "data.length only applies to synthetic corpora".into(),
                        ));
                    }
                }
                "data.noise" => {
                    if let DataSource::Synthetic { noise, .. } = &mut config.data {
                        *noise = parse_f64(key, value)?;
                    } else {
                        return Err(Error::Config(
                            "data.noise only applies to synthetic corpora".into(),
                        ));
                    }
                }
                "data.path" => config.data = DataSource::File(PathBuf::from(value)),

                "bounds.probe_len" => config.bounds.probe_len = Some(parse_usize(key, value)?),
                "bounds.probe_batches" => {
                    config.bounds.probe_batches = parse_usize(key, value)?
                }

                "out.dir" => config.out_dir = PathBuf::from(value),

                other => {
                    return Err(Error::Config(format!(
                        "line {}: unknown key '{other}'",
                        lineno + 1
                    )))
                }
            }
        }

        if let Some(mode) = scheme_embed_mode {
            config.scheme.embed_mode = match mode.as_str() {
                "vanilla" => EmbedMode::Vanilla,
                "scaled-embed" => EmbedMode::ScaledEmbed {
                    factor: scheme_embed_factor,
                },
                "embed-ln" => EmbedMode::EmbedLn,
                "embed-detach" => EmbedMode::EmbedDetach {
                    gamma: scheme_embed_gamma.unwrap_or(0.1),
                },
                other => {
                    return Err(Error::Config(format!("unknown embed mode '{other}'")))
                }
            };
        } else {
            if let (Some(f), EmbedMode::ScaledEmbed { factor }) =
                (scheme_embed_factor, &mut config.scheme.embed_mode)
            {
                *factor = Some(f);
            }
            if let (Some(g), EmbedMode::EmbedDetach { gamma }) =
                (scheme_embed_gamma, &mut config.scheme.embed_mode)
            {
                *gamma = g;
            }
        }

        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.train.validate()?;
        if let DataSource::Synthetic { length, noise, .. } = &self.data {
            if *length < self.model.seq_len + 1 {
                return Err(Error::Config(format!(
                    "data.length {} too short for seq_len {}",
                    length, self.model.seq_len
                )));
            }
            if !(0.0..=1.0).contains(noise) {
                return Err(Error::Config(format!("data.noise {noise} not in [0,1]")));
            }
        }
        if self.bounds.probe_batches == 0 {
            return Err(Error::Config("bounds.probe_batches must be >= 1".into()));
        }
        if let DataSource::File(p) = &self.data {
            if p.as_os_str().is_empty() {
                return Err(Error::Config(
                    "data.kind = file requires data.path".into(),
                ));
            }
        }
        Ok(())
    }

    /// Canonical config text; `parse(to_config_text())` round-trips exactly.
    pub fn to_config_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            s.push_str(k);
            s.push_str(" = ");
            s.push_str(&v);
            s.push('\n');
        };
        kv("model.num_layers", self.model.num_layers.to_string());
        kv("model.d", self.model.d.to_string());
        kv("model.d_ffn", self.model.d_ffn.to_string());
        kv("model.num_heads", self.model.num_heads.to_string());
        kv("model.seq_len", self.model.seq_len.to_string());
        kv("model.vocab_size", self.model.vocab_size.to_string());
        kv("model.activation", self.model.activation.name().into());
        kv("model.norm", self.model.norm_kind.name().into());
        kv("model.causal_mask", self.model.causal_mask.to_string());
        kv("model.dropout_rate", format!("{:?}", self.model.dropout_rate));
        kv("model.norm_affine", self.model.norm_affine.to_string());
        kv("model.pos_embedding", self.model.pos_embedding.to_string());

        kv("train.lr_peak", format!("{:?}", self.train.lr_peak));
        kv(
            "train.warmup_fraction",
            format!("{:?}", self.train.warmup_fraction),
        );
        kv("train.total_steps", self.train.total_steps.to_string());
        kv("train.batch_size", self.train.batch_size.to_string());
        kv("train.adam_beta1", format!("{:?}", self.train.adam_beta1));
        kv("train.adam_beta2", format!("{:?}", self.train.adam_beta2));
        kv("train.weight_decay", format!("{:?}", self.train.weight_decay));
        kv("train.clip_norm", format!("{:?}", self.train.clip_norm));
        kv("train.seed", self.train.seed.to_string());
        kv("train.precision", self.train.precision.name().into());
        kv("train.log_every", self.train.log_every.to_string());

        kv("scheme.name", self.scheme.name.clone());
        kv("scheme.initializer", self.scheme.initializer.name().into());
        kv("scheme.embed_mode", self.scheme.embed_mode.name().into());
        if let EmbedMode::ScaledEmbed { factor: Some(f) } = self.scheme.embed_mode {
            kv("scheme.embed_factor", format!("{f:?}"));
        }
        if let EmbedMode::EmbedDetach { gamma } = self.scheme.embed_mode {
            kv("scheme.embed_gamma", format!("{gamma:?}"));
        }

        match &self.data {
            DataSource::Synthetic { kind, length, noise } => {
                kv("data.kind", kind.name().into());
                kv("data.length", length.to_string());
                kv("data.noise", format!("{noise:?}"));
            }
            DataSource::File(path) => {
                kv("data.path", path.display().to_string());
            }
        }

        if let Some(p) = self.bounds.probe_len {
            kv("bounds.probe_len", p.to_string());
        }
        kv(
            "bounds.probe_batches",
            self.bounds.probe_batches.to_string(),
        );
        kv("out.dir", self.out_dir.display().to_string());
        s
    }
}
