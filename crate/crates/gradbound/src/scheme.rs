//! Named combinations of initializer and embedding treatment.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::config::EmbedMode;
use crate::model::params::Initializer;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeSpec {
    pub name: String,
    pub initializer: Initializer,
    pub embed_mode: EmbedMode,
}

impl SchemeSpec {
    pub fn vanilla() -> Self {
        Self {
            name: "vanilla".into(),
            initializer: Initializer::MegatronSmall,
            embed_mode: EmbedMode::Vanilla,
        }
    }

    pub fn embed_detach() -> Self {
        Self {
            name: "embed-detach".into(),
            initializer: Initializer::MegatronSmall,
            embed_mode: EmbedMode::detach_default(),
        }
    }

    pub fn embed_ln() -> Self {
        Self {
            name: "embed-ln".into(),
            initializer: Initializer::MegatronSmall,
            embed_mode: EmbedMode::EmbedLn,
        }
    }

    pub fn scaled_embed() -> Self {
        Self {
            name: "scaled-embed".into(),
            initializer: Initializer::MegatronSmall,
            embed_mode: EmbedMode::scaled_default(),
        }
    }

    pub fn xavier() -> Self {
        Self {
            name: "xavier".into(),
            initializer: Initializer::Xavier,
            embed_mode: EmbedMode::Vanilla,
        }
    }

    pub fn xavier_scaled() -> Self {
        Self {
            name: "xavier-scaled".into(),
            initializer: Initializer::Xavier,
            embed_mode: EmbedMode::scaled_default(),
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "vanilla" => Ok(Self::vanilla()),
            "embed-detach" => Ok(Self::embed_detach()),
            "embed-ln" => Ok(Self::embed_ln()),
            "scaled-embed" => Ok(Self::scaled_embed()),
            "xavier" => Ok(Self::xavier()),
            "xavier-scaled" => Ok(Self::xavier_scaled()),
            other => Err(Error::Config(format!(
                "unknown scheme '{other}' (expected one of vanilla, embed-detach, embed-ln, \
                 scaled-embed, xavier, xavier-scaled)"
            ))),
        }
    }

    pub fn parse_list(csv: &str) -> Result<Vec<Self>> {
        csv.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(Self::parse)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn the_six_named_schemes_parse() {
        for name in [
            "vanilla",
            "embed-detach",
            "embed-ln",
            "scaled-embed",
            "xavier",
            "xavier-scaled",
        ] {
            let s = SchemeSpec::parse(name).unwrap();
            assert_eq!(s.name, name);
        }
        assert!(SchemeSpec::parse("nonsense").is_err());
        let list = SchemeSpec::parse_list("vanilla, scaled-embed").unwrap();
        assert_eq!(list.len(), 2);
    }

    #[test]
    fn xavier_schemes_skip_depth_scaling() {
        assert_eq!(SchemeSpec::xavier().initializer, Initializer::Xavier);
        assert_eq!(
            SchemeSpec::xavier_scaled().embed_mode,
            EmbedMode::scaled_default()
        );
        assert_eq!(
            SchemeSpec::embed_detach().embed_mode,
            EmbedMode::EmbedDetach { gamma: 0.1 }
        );
    }
}
