use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::FormatError;

pub const MANIFEST_VERSION: u32 = 1;

/// Root of a generated dataset tree. Paths are relative to the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub format_version: u32,
    pub preset: String,
    pub seed: u64,
    pub generator: serde_json::Value,
    pub samples: Vec<ManifestEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub sample_id: String,
    #[serde(default)]
    pub label: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<String>,
    pub paths: BTreeMap<String, String>,
}

impl Manifest {
    pub fn read(path: &Path) -> Result<Self, FormatError> {
        let text = super::read_text(path)?;
        let m: Manifest = serde_json::from_str(&text).map_err(|e| FormatError::parse(path, e.line() as u64, e.to_string()))?;
        if m.format_version != MANIFEST_VERSION {
            return Err(FormatError::invalid(
                path,
                format!("unsupported manifest format_version {}", m.format_version),
            ));
        }
        Ok(m)
    }

    pub fn write(&self, path: &Path) -> Result<(), FormatError> {
        let mut text = serde_json::to_string_pretty(self).expect("plain data serializes");
        text.push('\n');
        super::write_text(path, &text)
    }

    /// Absolute location of `entry`'s file `key`.
    pub fn resolve(manifest_path: &Path, entry: &ManifestEntry, key: &str) -> Result<PathBuf, FormatError> {
        let rel = entry.paths.get(key).ok_or_else(|| {
            FormatError::invalid(manifest_path, format!("sample '{}' has no '{key}' path", entry.sample_id))
        })?;
        Ok(manifest_path.parent().unwrap_or(Path::new(".")).join(rel))
    }
}
