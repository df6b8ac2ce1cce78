//! Versioned JSON run configuration.

use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::loss::LossWeights;
use crate::pipeline::{Ablation, ModelConfig};

pub const CONFIG_VERSION: u32 = 1;
pub const DEFAULT_SEED: u64 = 42;

#[derive(Clone, Debug, Default, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IoPaths {
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    /// Directory holding a parameter dump; generated from the seed if unset.
    pub params: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub ablation: Ablation,
    #[serde(default)]
    pub loss: LossWeights,
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(default)]
    pub io: IoPaths,
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            version: CONFIG_VERSION,
            seed: DEFAULT_SEED,
            model: ModelConfig::default(),
            ablation: Ablation::default(),
            loss: LossWeights::default(),
            threads: None,
            io: IoPaths::default(),
        }
    }
}

impl RunConfig {
    /// Parses and validates. Unknown fields are rejected.
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text)
            .map_err(|e| Error::invalid(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(Error::invalid(format!(
                "config field `version`: expected {CONFIG_VERSION}, got {}",
                self.version
            )));
        }
        if self.threads == Some(0) {
            return Err(Error::invalid("config field `threads` must be at least 1"));
        }
        self.model.validate()?;
        self.ablation.validate()?;
        self.loss
            .validate()
            .map_err(|e| Error::invalid(format!("field `loss.alpha`: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_document_takes_defaults() {
        let cfg = RunConfig::from_json(r#"{"version": 1}"#).unwrap();
        assert_eq!(cfg, RunConfig::default());
        let back = RunConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn nested_overrides() {
        let cfg = RunConfig::from_json(
            r#"{"version": 1, "seed": 7, "threads": 2,
                "model": {"fr_widths": [8, 8, 8], "fr": {"mask_activation": "sigmoid"}},
                "ablation": {"no_fr": true}}"#,
        )
        .unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.model.fr_widths, [8, 8, 8]);
        assert!(cfg.ablation.no_fr);
    }

    #[test]
    fn violations_name_the_field() {
        let cases = [
            (r#"{"seed": 1}"#, "version"),
            (r#"{"version": 2}"#, "version"),
            (r#"{"version": 1, "threads": 0}"#, "threads"),
            (r#"{"version": 1, "colour": 1}"#, "colour"),
            (r#"{"version": 1, "model": {"face_side": 6}}"#, "face_side"),
            (r#"{"version": 1, "model": {"encoder_channels": [8, 0, 8, 8, 8]}}"#, "encoder_channels"),
            (r#"{"version": 1, "ablation": {"no_cu": true, "six_faces": true}}"#, "no_cu"),
            (r#"{"version": 1, "loss": {"alpha": [1, -1, 1]}}"#, "loss.alpha"),
        ];
        for (text, field) in cases {
            let err = RunConfig::from_json(text).unwrap_err().to_string();
            assert!(err.contains(field), "{text}: {err}");
        }
    }
}
