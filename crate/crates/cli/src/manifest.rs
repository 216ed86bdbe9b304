//! Run manifests: everything needed to re-execute a run.

use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};
use sgru_core::train::TrainConfig;
use sgru_core::{Error, Result};

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    /// Subcommand that produced this run.
    pub command: String,
    /// Full effective configuration, after file and flag merging.
    pub config: TrainConfig,
    pub seeds: Vec<u64>,
    pub dataset_path: String,
    /// SHA-256 of the raw dataset bytes.
    pub dataset_sha256: String,
    pub version: String,
    pub duration_seconds: f64,
    /// Trainable scalar count; absent for multi-model runs.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub parameter_count: Option<usize>,
    pub outputs: Vec<String>,
}

pub fn tool_version() -> String {
    format!("sgru {}", env!("CARGO_PKG_VERSION"))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path)?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    Ok(out)
}

/// Writes `value` as pretty JSON via a temp file and rename, so readers
/// never observe a half-written manifest.
pub fn write_json_atomic<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    let tmp: PathBuf = match path.file_name() {
        Some(name) => {
            let mut n = name.to_os_string();
            n.push(".tmp");
            path.with_file_name(n)
        }
        None => return Err(Error::Config(format!("not a file path: {}", path.display()))),
    };
    std::fs::write(&tmp, text)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}
