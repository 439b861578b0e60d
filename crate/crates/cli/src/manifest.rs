//! Run manifests: spec hash, tool version, wall times, artifact checksums.
//! Written last via atomic rename, so a killed run leaves either no manifest
//! or a complete, truthful one.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::Result;
use crate::spec::ResolvedSpec;

#[derive(Serialize)]
pub struct ArtifactEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Serialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub spec_hash: String,
    pub started_unix_ms: u128,
    pub finished_unix_ms: u128,
    pub resolved_spec: ResolvedSpec,
    pub artifacts: Vec<ArtifactEntry>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

pub fn now_ms() -> u128 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0)
}

pub struct ManifestBuilder {
    out_dir: PathBuf,
    spec_hash: String,
    started: u128,
    artifacts: Vec<ArtifactEntry>,
}

impl ManifestBuilder {
    pub fn new(out_dir: &Path, spec_text: &str) -> Self {
        ManifestBuilder {
            out_dir: out_dir.to_path_buf(),
            spec_hash: sha256_hex(spec_text.as_bytes()),
            started: now_ms(),
            artifacts: Vec::new(),
        }
    }

    /// Writes an artifact under the output directory and records its checksum.
    pub fn write_artifact(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.out_dir.join(name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(&path, bytes)?;
        self.artifacts.push(ArtifactEntry {
            path: name.to_string(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len() as u64,
        });
        Ok(())
    }

    /// Records a file that was already produced on disk (e.g. streamed).
    pub fn record_existing(&mut self, name: &str) -> Result<()> {
        let bytes = std::fs::read(self.out_dir.join(name))?;
        self.artifacts.push(ArtifactEntry {
            path: name.to_string(),
            sha256: sha256_hex(&bytes),
            bytes: bytes.len() as u64,
        });
        Ok(())
    }

    /// Finalizes `manifest.json` atomically and returns its path.
    pub fn finish(mut self, resolved: &ResolvedSpec) -> Result<PathBuf> {
        self.artifacts.sort_by(|a, b| a.path.cmp(&b.path));
        let manifest = RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            spec_hash: self.spec_hash,
            started_unix_ms: self.started,
            finished_unix_ms: now_ms(),
            resolved_spec: resolved.clone(),
            artifacts: self.artifacts,
        };
        let text = serde_json::to_string_pretty(&manifest)
            .map_err(|e| crate::error::CliError::Other(e.to_string()))?;
        let tmp = self.out_dir.join("manifest.json.tmp");
        let final_path = self.out_dir.join("manifest.json");
        std::fs::write(&tmp, text)?;
        std::fs::rename(&tmp, &final_path)?;
        Ok(final_path)
    }
}
