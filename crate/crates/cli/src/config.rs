use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use moco_core::train::TrainConfig;
use serde::{Deserialize, Serialize};

/// `moco train --config` document.
///
/// ```json
/// { "data": "sim", "output": "run", "train": { "max_steps": 2000, ... } }
/// ```
///
/// Relative paths resolve against the config file's directory. Unknown keys
/// are rejected at every level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Directory holding `manifest.json` from `moco simulate`.
    pub data: PathBuf,
    pub output: PathBuf,
    pub train: TrainConfig,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.train.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg = Self::parse(&text).with_context(|| format!("invalid config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.data = base.join(&cfg.data);
        cfg.output = base.join(&cfg.output);
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_document_uses_defaults() {
        let c = RunConfig::parse(r#"{"data": "d", "output": "o", "train": {"max_steps": 3}}"#).unwrap();
        assert_eq!(c.train.max_steps, 3);
        assert_eq!(c.train.batch_size, 5);
        assert_eq!(c.train.adam.lr, 2e-4);
    }

    #[test]
    fn unknown_keys_are_named() {
        let e = RunConfig::parse(r#"{"data": "d", "output": "o", "train": {}, "epochs": 3}"#).unwrap_err();
        assert!(e.to_string().contains("unknown field `epochs`"), "{e}");
        let e = RunConfig::parse(r#"{"data": "d", "output": "o", "train": {"generator": {"growth": 8}}}"#).unwrap_err();
        assert!(e.to_string().contains("unknown field `growth`"), "{e}");
    }

    #[test]
    fn required_keys() {
        let e = RunConfig::parse(r#"{"data": "d", "train": {}}"#).unwrap_err();
        assert!(e.to_string().contains("missing field `output`"), "{e}");
    }

    #[test]
    fn invalid_values() {
        assert!(RunConfig::parse(r#"{"data": "d", "output": "o", "train": {"batch_size": 0}}"#).is_err());
        assert!(RunConfig::parse(r#"{"data": "d", "output": "o", "train": {"flip_probability": 2}}"#).is_err());
    }
}
