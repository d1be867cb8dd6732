//! `manifest.json`: what was run, with which seeds, and checksums of every
//! file it produced. Written once before the run starts and again at the end.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::ExperimentSpec;
use crate::run::RunError;

pub const FILE_NAME: &str = "manifest.json";

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Running,
    Complete,
    /// Finished, but some seeds or sweep children failed.
    Partial,
    Failed,
}

#[derive(Debug, Clone, Serialize)]
pub struct FileEntry {
    /// Relative to the output directory.
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub status: Status,
    pub config_path: Option<PathBuf>,
    pub config: ExperimentSpec,
    pub seeds: Vec<u64>,
    pub workers: usize,
    pub started_unix_s: f64,
    pub wall_clock_s: Option<f64>,
    pub files: Vec<FileEntry>,
    pub failures: Vec<String>,
}

fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0.0, |d| d.as_secs_f64())
}

impl Manifest {
    pub fn start(spec: &ExperimentSpec, config_path: Option<&Path>, workers: usize) -> Self {
        Self {
            tool: "evapsim",
            version: env!("CARGO_PKG_VERSION"),
            status: Status::Running,
            config_path: config_path.map(Path::to_path_buf),
            config: spec.clone(),
            seeds: spec.seeds(),
            workers,
            started_unix_s: unix_now(),
            wall_clock_s: None,
            files: Vec::new(),
            failures: Vec::new(),
        }
    }

    pub fn finish(&mut self, out: &Path, status: Status, failures: Vec<String>) -> Result<(), RunError> {
        self.status = status;
        self.failures = failures;
        self.wall_clock_s = Some(unix_now() - self.started_unix_s);
        self.files = checksums(out)?;
        Ok(())
    }

    pub fn write(&self, out: &Path) -> Result<(), RunError> {
        let path = out.join(FILE_NAME);
        let text = serde_json::to_string_pretty(self).map_err(|e| RunError::Sim(e.to_string()))?;
        fs::write(&path, text + "\n").map_err(|source| RunError::Io { path, source })
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Every file under `root` except the manifest, sorted by path.
pub fn checksums(root: &Path) -> Result<Vec<FileEntry>, RunError> {
    let mut paths = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        let entries = fs::read_dir(&dir).map_err(|source| RunError::Io { path: dir.clone(), source })?;
        for entry in entries {
            let path = entry.map_err(|source| RunError::Io { path: dir.clone(), source })?.path();
            if path.is_dir() {
                stack.push(path);
            } else if path != root.join(FILE_NAME) {
                paths.push(path);
            }
        }
    }
    paths.sort();
    paths
        .into_iter()
        .map(|p| {
            let bytes = fs::read(&p).map_err(|source| RunError::Io { path: p.clone(), source })?;
            let rel = p.strip_prefix(root).unwrap_or(&p);
            Ok(FileEntry {
                path: rel.to_string_lossy().replace('\\', "/"),
                bytes: bytes.len() as u64,
                sha256: sha256_hex(&bytes),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_of_known_input() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
