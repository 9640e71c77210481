//! Run configuration: one JSON document, every section optional, unknown
//! keys rejected. Command-line flags override whatever is set here.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calibration::KalmanConfig;
use crate::features::AlignmentMode;
use crate::flow::FlowConfig;
use crate::pipeline::TrainConfig;
use crate::synth::{RegressionConfig, TrajectoryConfig};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureSettings {
    pub alignment: AlignmentMode,
}

impl Default for FeatureSettings {
    fn default() -> Self {
        Self {
            alignment: AlignmentMode::Similarity,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSettings {
    pub calibration_bench: Option<TrajectoryConfig>,
    pub regression_dataset: Option<RegressionConfig>,
}

/// Paths a command may take from the file instead of its flags.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IoSettings {
    pub frames: Option<PathBuf>,
    pub landmarks: Option<PathBuf>,
    pub manifest: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Global seed; replaces every component seed when set.
    pub seed: Option<u64>,
    pub flow: FlowConfig,
    pub kalman: KalmanConfig,
    pub features: FeatureSettings,
    pub train: TrainConfig,
    pub synth: SynthSettings,
    pub io: IoSettings,
}

impl RunConfig {
    pub fn from_json(text: &str, path: &Path) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|e| ConfigError::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text, path)
    }

    /// Defaults when no file is given.
    pub fn load_optional(path: Option<&Path>) -> Result<Self, ConfigError> {
        path.map_or_else(|| Ok(Self::default()), Self::load)
    }

    /// Training settings with the global seed applied.
    pub fn train_config(&self) -> TrainConfig {
        let mut t = self.train.clone();
        if let Some(s) = self.seed {
            t.seed = s;
        }
        t
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<RunConfig, ConfigError> {
        RunConfig::from_json(text, Path::new("run.json"))
    }

    #[test]
    fn empty_document_gives_defaults() {
        let c = parse("{}").unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(c.train.epochs, 500);
        assert_eq!(c.flow.fb_threshold_tau, 1.0);
    }

    #[test]
    fn partial_sections_merge_with_defaults() {
        let c = parse(r#"{"seed": 9, "flow": {"window_n": 21}, "train": {"epochs": 3}}"#).unwrap();
        assert_eq!(c.flow.window_n, 21);
        assert_eq!(c.flow.num_levels, FlowConfig::default().num_levels);
        assert_eq!(c.train_config().epochs, 3);
        assert_eq!(c.train_config().seed, 9);
    }

    #[test]
    fn unknown_keys_are_named() {
        for (doc, key) in [
            (r#"{"sede": 1}"#, "sede"),
            (r#"{"flow": {"windw_n": 3}}"#, "windw_n"),
            (r#"{"train": {"epoch": 3}}"#, "epoch"),
            (r#"{"synth": {"regression_dataset": {"trajectory": {"jiter_sigma": 1}}}}"#, "jiter_sigma"),
        ] {
            let e = parse(doc).unwrap_err().to_string();
            assert!(e.contains(key) && e.contains("run.json"), "{e}");
        }
    }
}
