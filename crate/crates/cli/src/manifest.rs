//! Run directories and their manifest, written last as the completion
//! marker.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};
use crate::io::{ensure_dir, write_atomic};

pub const MANIFEST_NAME: &str = "MANIFEST.txt";

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifact {
    /// Path relative to the run directory.
    pub name: String,
    pub sha256: String,
    pub bytes: u64,
}

/// An output directory that tracks every artifact it receives.
#[derive(Debug)]
pub struct RunDir {
    root: PathBuf,
    command: String,
    config_text: String,
    artifacts: Vec<String>,
    timings: Vec<(String, f64)>,
    started: Instant,
}

impl RunDir {
    /// Creates the directory and removes any stale manifest, so an aborted
    /// rerun cannot look complete.
    pub fn create(root: &Path, command: &str, config_text: &str) -> CliResult<Self> {
        ensure_dir(root)?;
        let stale = root.join(MANIFEST_NAME);
        if stale.exists() {
            fs::remove_file(&stale).map_err(|e| CliError::io(&stale, e))?;
        }
        Ok(Self {
            root: root.to_path_buf(),
            command: command.to_string(),
            config_text: config_text.to_string(),
            artifacts: Vec::new(),
            timings: Vec::new(),
            started: Instant::now(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Absolute path for `name`, registering it as an artifact.
    pub fn artifact(&mut self, name: &str) -> CliResult<PathBuf> {
        let path = self.root.join(name);
        if let Some(parent) = path.parent() {
            ensure_dir(parent)?;
        }
        if !self.artifacts.iter().any(|a| a == name) {
            self.artifacts.push(name.to_string());
        }
        Ok(path)
    }

    pub fn record_timing(&mut self, stage: &str, seconds: f64) {
        self.timings.push((stage.to_string(), seconds));
    }

    /// Hashes every artifact and writes the manifest.
    pub fn finish(mut self) -> CliResult<Vec<Artifact>> {
        self.artifacts.sort();
        let mut list = Vec::with_capacity(self.artifacts.len());
        for name in &self.artifacts {
            let path = self.root.join(name);
            let bytes = fs::read(&path).map_err(|e| CliError::io(&path, e))?;
            list.push(Artifact {
                name: name.clone(),
                sha256: sha256_hex(&bytes),
                bytes: bytes.len() as u64,
            });
        }
        let mut s = String::new();
        s.push_str(&format!("command = {}\n", self.command));
        s.push_str(&format!("code_version = {}\n", env!("CARGO_PKG_VERSION")));
        s.push_str(&format!("config_sha256 = {}\n", sha256_hex(self.config_text.as_bytes())));
        for a in &list {
            s.push_str(&format!("artifact.{} = {} {}\n", a.name, a.sha256, a.bytes));
        }
        // timings vary between runs and stay out of the artifact checksums
        for (stage, secs) in &self.timings {
            s.push_str(&format!("timing.{stage}_seconds = {secs:.3}\n"));
        }
        s.push_str(&format!("timing.total_seconds = {:.3}\n", self.started.elapsed().as_secs_f64()));
        write_atomic(&self.root.join(MANIFEST_NAME), s.as_bytes())?;
        Ok(list)
    }
}

/// Parses `artifact.*` lines of a manifest into `(name, sha256)` pairs.
pub fn read_manifest_checksums(root: &Path) -> CliResult<Vec<(String, String)>> {
    let path = root.join(MANIFEST_NAME);
    let text = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
    Ok(text
        .lines()
        .filter_map(|l| l.strip_prefix("artifact."))
        .filter_map(|l| {
            let (name, rest) = l.split_once(" = ")?;
            Some((name.to_string(), rest.split_whitespace().next()?.to_string()))
        })
        .collect())
}
