//! Per-run manifest.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{to_toml, ExperimentConfig, ExperimentError};
use crate::io::write_atomic;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorInfo {
    pub kind: String,
    pub message: String,
    pub exit_code: i32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub tool_version: String,
    pub scenario: String,
    pub wall_time_s: f64,
    /// `FinalTime`, `Steady`, `Completed` or `Error`.
    pub termination: String,
    pub error: Option<ErrorInfo>,
    /// Named scalar results, all finite.
    pub final_diagnostics: BTreeMap<String, f64>,
}

impl RunManifest {
    pub fn write(&self, dir: &Path) -> Result<(), ExperimentError> {
        let path = dir.join(MANIFEST_FILE);
        let mut text = serde_json::to_string_pretty(self).expect("manifest serialises");
        text.push('\n');
        write_atomic(&path, text.as_bytes()).map_err(|e| ExperimentError::Io {
            path,
            message: e.to_string(),
        })
    }

    pub fn read(dir: &Path) -> Result<Self, ExperimentError> {
        let path = dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| ExperimentError::Io {
            path: path.clone(),
            message: e.to_string(),
        })?;
        serde_json::from_str(&text).map_err(|e| ExperimentError::Io {
            path,
            message: e.to_string(),
        })
    }
}

/// SHA-256 of the canonical TOML form of `config`. The output directory is
/// left out so the same experiment hashes alike wherever it is written.
pub fn config_hash(config: &ExperimentConfig) -> String {
    let mut canonical = config.clone();
    canonical.output_dir = PathBuf::new();
    hex::encode(Sha256::digest(to_toml(&canonical).as_bytes()))
}
