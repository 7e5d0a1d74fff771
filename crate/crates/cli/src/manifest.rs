use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Artifact {
    pub path: String,
    pub sha256: String,
}

impl Artifact {
    pub fn of_file(path: &Path) -> Result<Artifact> {
        let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
        Ok(Artifact {
            path: path.display().to_string(),
            sha256: sha256_hex(&bytes),
        })
    }
}

/// Provenance record written next to every command's outputs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub command: String,
    pub tool_version: String,
    pub started_at_ms: u128,
    pub finished_at_ms: u128,
    pub config_digest: String,
    pub inputs: Vec<Artifact>,
    pub artifacts: Vec<Artifact>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn now_ms() -> u128 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0)
}

/// Digest of the config and the input digests, independent of input order
/// and paths.
pub fn run_id(config_digest: &str, inputs: &[Artifact]) -> String {
    let mut digests: Vec<&str> = inputs.iter().map(|a| a.sha256.as_str()).collect();
    digests.sort_unstable();
    let mut h = Sha256::new();
    h.update(config_digest.as_bytes());
    for d in digests {
        h.update(b"\n");
        h.update(d.as_bytes());
    }
    hex::encode(h.finalize())[..16].to_string()
}

impl RunManifest {
    pub fn new(command: &str, config_digest: &str, inputs: Vec<Artifact>, started_at_ms: u128) -> Self {
        RunManifest {
            run_id: run_id(config_digest, &inputs),
            command: command.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            started_at_ms,
            finished_at_ms: started_at_ms,
            config_digest: config_digest.to_string(),
            inputs,
            artifacts: Vec::new(),
        }
    }

    pub fn record(&mut self, path: &Path) -> Result<()> {
        self.artifacts.push(Artifact::of_file(path)?);
        Ok(())
    }

    pub fn write(&mut self, dir: &Path) -> Result<PathBuf> {
        self.finished_at_ms = now_ms();
        let path = dir.join("manifest.json");
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        write_atomic(&path, text.as_bytes())?;
        Ok(path)
    }
}

/// Writes through a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| CliError::io(path, e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn art(d: &str) -> Artifact {
        Artifact {
            path: format!("/x/{d}"),
            sha256: d.to_string(),
        }
    }

    #[test]
    fn run_id_ignores_input_order_and_paths() {
        let a = run_id("cfg", &[art("aa"), art("bb")]);
        let b = run_id("cfg", &[art("bb"), art("aa")]);
        assert_eq!(a, b);
        assert_eq!(a.len(), 16);
        assert_ne!(a, run_id("cfg2", &[art("aa"), art("bb")]));
    }
}
