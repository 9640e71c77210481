//! On-disk formats: PGM frames, landmark and feature CSVs, dataset
//! manifests, loss logs and evaluation reports.

mod features;
mod landmarks;
mod manifest;
mod pgm;
mod reports;

pub use features::{read_feature_csv, write_feature_csv};
pub use landmarks::{read_landmarks_csv, write_landmarks_csv, LANDMARK_HEADER};
pub use manifest::{Manifest, ManifestEntry, MANIFEST_VERSION};
pub use pgm::{decode_pgm, encode_pgm, read_frame_dir, read_pgm, write_pgm};
pub use reports::{
    read_value_csv, write_evaluation_report, write_loss_log, write_value_csv, EVAL_HEADER,
    LOSS_HEADER,
};

use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },
    #[error("{path}: {message}")]
    Invalid { path: PathBuf, message: String },
}

impl FormatError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        FormatError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub(crate) fn parse(path: &Path, line: u64, message: impl Into<String>) -> Self {
        FormatError::Parse {
            path: path.to_path_buf(),
            line,
            message: message.into(),
        }
    }

    pub(crate) fn invalid(path: &Path, message: impl Into<String>) -> Self {
        FormatError::Invalid {
            path: path.to_path_buf(),
            message: message.into(),
        }
    }
}

pub(crate) fn read_text(path: &Path) -> Result<String, FormatError> {
    std::fs::read_to_string(path).map_err(|e| FormatError::io(path, e))
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<(), FormatError> {
    std::fs::write(path, text).map_err(|e| FormatError::io(path, e))
}

pub(crate) fn parse_real(path: &Path, line: u64, field: &str, what: &str) -> Result<f64, FormatError> {
    let v: f64 = field
        .trim()
        .parse()
        .map_err(|_| FormatError::parse(path, line, format!("{what}: '{field}' is not a number")))?;
    if !v.is_finite() {
        return Err(FormatError::parse(path, line, format!("{what}: '{field}' is not finite")));
    }
    Ok(v)
}
