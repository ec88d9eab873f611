//! Parameter checkpoints.
//!
//! A checkpoint is a single file:
//!
//! ```text
//! gradbound-checkpoint v1\n
//! <key> = <value>\n        (ModelConfig fields, one per line)
//! ...
//! end_header\n
//! <tensors>
//! ```
//!
//! Tensors follow as raw little-endian 64-bit floats in declaration order
//! ([`Parameters::tensors`]): embedding, positional table (if enabled),
//! then per layer `w1, w2, v (SwiGLU only), w_q[0..h], w_k[0..h],
//! w_v[0..h], w_o`, each layer's norm gains/biases (if `norm_affine`),
//! the final-norm affine, the embedding-norm affine (EmbedLn + affine),
//! and the output projection. Shapes are implied by the header config,
//! so the payload carries no per-tensor framing.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::config::{Activation, EmbedMode, ModelConfig, NormKind};
use crate::model::params::Parameters;

const MAGIC: &str = "gradbound-checkpoint v1";

fn header_lines(config: &ModelConfig) -> String {
    let mut s = String::new();
    s.push_str(MAGIC);
    s.push('\n');
    let mut kv = |k: &str, v: String| {
        s.push_str(k);
        s.push_str(" = ");
        s.push_str(&v);
        s.push('\n');
    };
    kv("num_layers", config.num_layers.to_string());
    kv("d", config.d.to_string());
    kv("d_ffn", config.d_ffn.to_string());
    kv("num_heads", config.num_heads.to_string());
    kv("seq_len", config.seq_len.to_string());
    kv("vocab_size", config.vocab_size.to_string());
    kv("activation", config.activation.name().to_string());
    kv("norm_kind", config.norm_kind.name().to_string());
    kv("embed_mode", config.embed_mode.name().to_string());
    if let EmbedMode::ScaledEmbed { factor: Some(f) } = config.embed_mode {
        kv("embed_factor", format!("{f:?}"));
    }
    if let EmbedMode::EmbedDetach { gamma } = config.embed_mode {
        kv("embed_gamma", format!("{gamma:?}"));
    }
    kv("causal_mask", config.causal_mask.to_string());
    kv("dropout_rate", format!("{:?}", config.dropout_rate));
    kv("norm_affine", config.norm_affine.to_string());
    kv("pos_embedding", config.pos_embedding.to_string());
    s.push_str("end_header\n");
    s
}

pub fn save_checkpoint(path: &Path, config: &ModelConfig, params: &Parameters) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(header_lines(config).as_bytes())?;
    for slot in params.tensors() {
        for &v in slot.tensor.as_slice() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

fn parse_header(text: &str) -> Result<ModelConfig> {
    let mut fields = std::collections::HashMap::new();
    for line in text.lines().skip(1) {
        if line == "end_header" {
            break;
        }
        let (k, v) = line
            .split_once(" = ")
            .ok_or_else(|| Error::Checkpoint(format!("bad header line '{line}'")))?;
        fields.insert(k.to_string(), v.to_string());
    }
    let get = |k: &str| -> Result<String> {
        fields
            .get(k)
            .cloned()
            .ok_or_else(|| Error::Checkpoint(format!("missing header field '{k}'")))
    };
    let parse_usize = |k: &str| -> Result<usize> {
        get(k)?
            .parse()
            .map_err(|_| Error::Checkpoint(format!("bad integer for '{k}'")))
    };
    let parse_bool = |k: &str| -> Result<bool> {
        get(k)?
            .parse()
            .map_err(|_| Error::Checkpoint(format!("bad bool for '{k}'")))
    };
    let parse_f64 = |k: &str| -> Result<f64> {
        get(k)?
            .parse()
            .map_err(|_| Error::Checkpoint(format!("bad float for '{k}'")))
    };

    let embed_mode = match get("embed_mode")?.as_str() {
        "vanilla" => EmbedMode::Vanilla,
        "embed-ln" => EmbedMode::EmbedLn,
        "scaled-embed" => EmbedMode::ScaledEmbed {
            factor: match fields.get("embed_factor") {
                Some(v) => Some(v.parse().map_err(|_| {
                    Error::Checkpoint("bad float for 'embed_factor'".into())
                })?),
                None => None,
            },
        },
        "embed-detach" => EmbedMode::EmbedDetach {
            gamma: parse_f64("embed_gamma")?,
        },
        other => return Err(Error::Checkpoint(format!("unknown embed_mode '{other}'"))),
    };

    let config = ModelConfig {
        num_layers: parse_usize("num_layers")?,
        d: parse_usize("d")?,
        d_ffn: parse_usize("d_ffn")?,
        num_heads: parse_usize("num_heads")?,
        seq_len: parse_usize("seq_len")?,
        vocab_size: parse_usize("vocab_size")?,
        activation: Activation::parse(&get("activation")?)
            .map_err(|e| Error::Checkpoint(e.to_string()))?,
        norm_kind: NormKind::parse(&get("norm_kind")?)
            .map_err(|e| Error::Checkpoint(e.to_string()))?,
        embed_mode,
        causal_mask: parse_bool("causal_mask")?,
        dropout_rate: parse_f64("dropout_rate")?,
        norm_affine: parse_bool("norm_affine")?,
        pos_embedding: parse_bool("pos_embedding")?,
    };
    config.validate().map_err(|e| Error::Checkpoint(e.to_string()))?;
    Ok(config)
}

pub fn load_checkpoint(path: &Path) -> Result<(ModelConfig, Parameters)> {
    let mut r = BufReader::new(File::open(path)?);
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;

    let header_end = find_header_end(&bytes)?;
    let header = std::str::from_utf8(&bytes[..header_end])
        .map_err(|_| Error::Checkpoint("header is not UTF-8".into()))?;
    if !header.starts_with(MAGIC) {
        return Err(Error::Checkpoint("missing magic line".into()));
    }
    let config = parse_header(header)?;

    let mut params = Parameters::shaped(&config)?;
    let expected = params.num_values() * 8;
    let payload = &bytes[header_end..];
    if payload.len() != expected {
        return Err(Error::Checkpoint(format!(
            "payload is {} bytes, expected {expected}",
            payload.len()
        )));
    }
    let mut offset = 0;
    for (_, tensor, _) in params.tensors_mut() {
        for v in tensor.as_mut_slice() {
            let mut buf = [0u8; 8];
            buf.copy_from_slice(&payload[offset..offset + 8]);
            *v = f64::from_le_bytes(buf);
            offset += 8;
        }
    }
    Ok((config, params))
}

fn find_header_end(bytes: &[u8]) -> Result<usize> {
    let needle = b"end_header\n";
    bytes
        .windows(needle.len())
        .position(|w| w == needle)
        .map(|p| p + needle.len())
        .ok_or_else(|| Error::Checkpoint("missing end_header".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::params::{init_parameters, Initializer};
    use crate::numerics::RandomSource;

    #[test]
    fn roundtrip_is_bit_identical() {
        let mut config = ModelConfig::toy();
        config.activation = Activation::SwiGLU;
        config.norm_affine = true;
        config.embed_mode = EmbedMode::EmbedDetach { gamma: 0.1 };
        let params =
            init_parameters(&config, Initializer::MegatronSmall, &mut RandomSource::new(7))
                .unwrap();

        let dir = std::env::temp_dir().join(format!("gradbound-ckpt-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("roundtrip.ckpt");
        save_checkpoint(&path, &config, &params).unwrap();
        let (config2, params2) = load_checkpoint(&path).unwrap();
        assert_eq!(config, config2);
        assert_eq!(params, params2);
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn truncated_payload_is_rejected() {
        let config = ModelConfig::toy();
        let params =
            init_parameters(&config, Initializer::MegatronSmall, &mut RandomSource::new(8))
                .unwrap();
        let dir = std::env::temp_dir().join(format!("gradbound-ckpt-t-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("trunc.ckpt");
        save_checkpoint(&path, &config, &params).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 9]).unwrap();
        assert!(load_checkpoint(&path).is_err());
        std::fs::remove_dir_all(&dir).ok();
    }
}
