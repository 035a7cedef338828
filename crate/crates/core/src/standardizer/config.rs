use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{BackendError, CompletionBackend, LiveBackend, ReplayBackend, RuleBackend};
use crate::digest::sha256_hex;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Live,
    Replay,
    Rule,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReplayMode {
    #[default]
    Strict,
    Capture,
}

fn default_inflight() -> usize {
    4
}

/// Backend settings, read from JSON or TOML.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendConfig {
    pub kind: BackendKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cache_path: Option<PathBuf>,
    #[serde(default)]
    pub mode: ReplayMode,
    /// Backend consulted on cache misses in capture mode (live by default).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub capture_backend: Option<BackendKind>,
    #[serde(default = "default_inflight")]
    pub max_inflight: usize,
}

impl BackendConfig {
    pub fn rule() -> Self {
        BackendConfig {
            kind: BackendKind::Rule,
            endpoint: None,
            model: None,
            cache_path: None,
            mode: ReplayMode::Strict,
            capture_backend: None,
            max_inflight: default_inflight(),
        }
    }

    pub fn replay(cache_path: impl Into<PathBuf>) -> Self {
        BackendConfig {
            kind: BackendKind::Replay,
            cache_path: Some(cache_path.into()),
            ..Self::rule()
        }
    }

    /// JSON when the file ends in `.json`, TOML otherwise. Relative cache
    /// paths resolve against the config file's directory.
    pub fn load(path: &Path) -> Result<Self, BackendError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| BackendError::Config(format!("{}: {e}", path.display())))?;
        let mut config: BackendConfig = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| BackendError::Config(e.to_string()))?
        } else {
            toml::from_str(&text).map_err(|e| BackendError::Config(e.to_string()))?
        };
        if let (Some(cache), Some(dir)) = (&config.cache_path, path.parent()) {
            if cache.is_relative() {
                config.cache_path = Some(dir.join(cache));
            }
        }
        Ok(config)
    }

    /// Stable digest of the settings, for run manifests. Paths are excluded
    /// so the same settings hash equally from any working directory.
    pub fn digest(&self) -> String {
        let stable = serde_json::json!({
            "kind": self.kind,
            "endpoint": self.endpoint,
            "model": self.model,
            "mode": self.mode,
            "capture_backend": self.capture_backend,
            "max_inflight": self.max_inflight,
        });
        sha256_hex(stable.to_string().as_bytes())
    }
}

pub fn build_backend(config: &BackendConfig) -> Result<Box<dyn CompletionBackend>, BackendError> {
    let live = || -> Result<Box<dyn CompletionBackend>, BackendError> {
        let endpoint = config
            .endpoint
            .clone()
            .ok_or_else(|| BackendError::Config("live backend needs `endpoint`".into()))?;
        let model = config
            .model
            .clone()
            .ok_or_else(|| BackendError::Config("live backend needs `model`".into()))?;
        Ok(Box::new(LiveBackend::from_env(endpoint, model)?))
    };
    match config.kind {
        BackendKind::Rule => Ok(Box::new(RuleBackend)),
        BackendKind::Live => live(),
        BackendKind::Replay => {
            let dir = config
                .cache_path
                .clone()
                .ok_or_else(|| BackendError::Config("replay backend needs `cache_path`".into()))?;
            Ok(Box::new(match config.mode {
                ReplayMode::Strict => ReplayBackend::strict(dir),
                ReplayMode::Capture => {
                    let inner = match config.capture_backend.unwrap_or(BackendKind::Live) {
                        BackendKind::Live => live()?,
                        BackendKind::Rule => Box::new(RuleBackend),
                        BackendKind::Replay => {
                            return Err(BackendError::Config(
                                "capture_backend cannot itself be replay".into(),
                            ))
                        }
                    };
                    ReplayBackend::capture(dir, inner)
                }
            }))
        }
    }
}
