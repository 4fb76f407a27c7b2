use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use moco_core::kspace::MotionParams;
use serde::{Deserialize, Serialize};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestRecord {
    pub index: u64,
    pub source: String,
    pub stem: String,
    /// `seed ^ index`
    pub seed: u64,
    pub motion: MotionParams,
    /// File names relative to the manifest's directory.
    pub clean: String,
    pub corrupt: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub version: u32,
    /// Image axis that carries phase encoding.
    pub phase_encode_axis: String,
    pub seed: u64,
    pub records: Vec<ManifestRecord>,
}

impl DatasetManifest {
    pub fn new(seed: u64) -> Self {
        Self { version: MANIFEST_VERSION, phase_encode_axis: "rows".into(), seed, records: Vec::new() }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::write(dir.join(MANIFEST_FILE), self.to_json()?)?;
        Ok(())
    }

    /// Loads `dir/manifest.json` and checks every referenced file exists.
    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        let m: Self = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        if m.version != MANIFEST_VERSION {
            bail!("{}: unsupported manifest version {}", path.display(), m.version);
        }
        for r in &m.records {
            for f in [&r.clean, &r.corrupt] {
                if !dir.join(f).is_file() {
                    bail!("{}: record {} references missing file {f}", path.display(), r.index);
                }
            }
        }
        Ok(m)
    }

    pub fn paths(&self, dir: &Path) -> Vec<(PathBuf, PathBuf)> {
        self.records.iter().map(|r| (dir.join(&r.corrupt), dir.join(&r.clean))).collect()
    }
}
