//! Recorded responses keyed by the SHA-256 of the prompt text, one file per
//! prompt (`<hash>.txt`).

use std::fs;
use std::path::{Path, PathBuf};

use super::{BackendError, CompletionBackend, CompletionRequest};

pub struct ReplayBackend {
    dir: PathBuf,
    // capture mode: misses are forwarded here and the response recorded
    inner: Option<Box<dyn CompletionBackend>>,
}

impl ReplayBackend {
    /// Errors on any prompt without a recorded response.
    pub fn strict(dir: impl Into<PathBuf>) -> Self {
        ReplayBackend {
            dir: dir.into(),
            inner: None,
        }
    }

    pub fn capture(dir: impl Into<PathBuf>, inner: Box<dyn CompletionBackend>) -> Self {
        ReplayBackend {
            dir: dir.into(),
            inner: Some(inner),
        }
    }

    pub fn entry_path(&self, prompt_hash: &str) -> PathBuf {
        entry_path(&self.dir, prompt_hash)
    }
}

pub fn entry_path(dir: &Path, prompt_hash: &str) -> PathBuf {
    dir.join(format!("{prompt_hash}.txt"))
}

impl CompletionBackend for ReplayBackend {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, BackendError> {
        let hash = request.prompt.hash();
        let path = self.entry_path(&hash);
        match fs::read_to_string(&path) {
            Ok(text) => return Ok(text),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
            Err(e) => return Err(BackendError::Io(format!("{}: {e}", path.display()))),
        }
        let Some(inner) = &self.inner else {
            return Err(BackendError::CacheMiss(hash));
        };
        let text = inner.complete(request)?;
        let io = |e: std::io::Error| BackendError::Io(format!("{}: {e}", path.display()));
        fs::create_dir_all(&self.dir).map_err(io)?;
        // write-then-rename so concurrent readers never see a partial file
        let tmp = self.dir.join(format!(".{hash}.{}.tmp", std::process::id()));
        fs::write(&tmp, &text).map_err(io)?;
        fs::rename(&tmp, &path).map_err(io)?;
        Ok(text)
    }

    fn name(&self) -> &'static str {
        "replay"
    }
}
