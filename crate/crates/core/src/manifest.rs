//! Per-run record of inputs, outputs and settings.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::digest::sha256_hex;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

impl FileDigest {
    /// Hashes `path`, recording it relative to `base` when possible.
    pub fn of(path: &Path, base: &Path) -> io::Result<Self> {
        let bytes = fs::read(path)?;
        let shown = path.strip_prefix(base).unwrap_or(path);
        Ok(FileDigest {
            path: shown.to_string_lossy().replace('\\', "/"),
            sha256: sha256_hex(&bytes),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub timestamp: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub backend_config_digest: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt_version: Option<u32>,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
}

impl RunManifest {
    pub fn new(command: impl Into<String>) -> Self {
        RunManifest {
            command: command.into(),
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true),
            seed: None,
            backend_config_digest: None,
            prompt_version: None,
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn add_input(&mut self, path: &Path, base: &Path) -> io::Result<()> {
        self.inputs.push(FileDigest::of(path, base)?);
        Ok(())
    }

    pub fn add_output(&mut self, path: &Path, base: &Path) -> io::Result<()> {
        self.outputs.push(FileDigest::of(path, base)?);
        Ok(())
    }

    /// Everything except the timestamp; equal for reproduced runs.
    pub fn fingerprint(&self) -> RunManifest {
        RunManifest {
            timestamp: String::new(),
            ..self.clone()
        }
    }

    pub fn write(&self, path: &Path) -> io::Result<()> {
        let mut text = serde_json::to_string_pretty(self).map_err(io::Error::other)?;
        text.push('\n');
        fs::write(path, text)
    }

    pub fn load(path: &Path) -> io::Result<Self> {
        serde_json::from_str(&fs::read_to_string(path)?).map_err(io::Error::other)
    }
}

/// Files under `dir` (recursively), sorted, skipping `exclude`.
pub fn list_files(dir: &Path, exclude: &[&Path]) -> io::Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d)? {
            let path = entry?.path();
            if exclude.iter().any(|e| *e == path) {
                continue;
            }
            if path.is_dir() {
                stack.push(path);
            } else {
                out.push(path);
            }
        }
    }
    out.sort();
    Ok(out)
}
