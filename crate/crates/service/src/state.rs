//! Data directory loading. Everything is read and indexed once at startup.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use fairmeta_core::digest::sha256_hex;
use fairmeta_core::labeler::{assign_tissue_label, TissueLabel};
use fairmeta_core::manifest::RunManifest;
use fairmeta_core::record::{deserialize_corpus, Cohort, Condition, Corpus, RecordError, RecordId, Source};
use fairmeta_core::search::{build_index, Index};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Corpus { path: PathBuf, source: RecordError },
    #[error("{name} has two {condition} corpora ({first} and {second})")]
    Duplicate {
        name: String,
        condition: Condition,
        first: PathBuf,
        second: PathBuf,
    },
    #[error("{name}: corpora disagree on source or cohort")]
    Inconsistent { name: String },
}

pub struct LoadedCorpus {
    pub corpus: Corpus,
    pub index: Index,
    pub content_hash: String,
    pub path: PathBuf,
}

pub struct CorpusGroup {
    pub name: String,
    pub source: Source,
    pub cohort: Cohort,
    pub versions: BTreeMap<Condition, LoadedCorpus>,
    /// Gold labels from the baseline version, or from each version itself
    /// when no baseline is loaded.
    pub gold: HashMap<RecordId, TissueLabel>,
}

impl CorpusGroup {
    pub fn gold_label(&self, version: &Corpus, id: &RecordId) -> TissueLabel {
        if let Some(label) = self.gold.get(id) {
            return *label;
        }
        version.get(id).map(assign_tissue_label).unwrap_or(TissueLabel::Unknown)
    }
}

pub struct StoredReport {
    pub run: String,
    pub timestamp: Option<chrono::DateTime<chrono::FixedOffset>>,
    pub body: Vec<u8>,
}

pub struct AppState {
    pub corpora: BTreeMap<String, CorpusGroup>,
    pub latest_report: Option<StoredReport>,
    pub data_dir: PathBuf,
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> LoadError + '_ {
    move |source| LoadError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn walk(dir: &Path, out: &mut Vec<PathBuf>) -> Result<(), LoadError> {
    for entry in fs::read_dir(dir).map_err(io_err(dir))? {
        let path = entry.map_err(io_err(dir))?.path();
        if path.is_dir() {
            walk(&path, out)?;
        } else {
            out.push(path);
        }
    }
    Ok(())
}

impl AppState {
    /// Loads `<data_dir>/corpora/**` (files starting with a `#corpus` header)
    /// and the newest `<data_dir>/reports/<run>/report.json`.
    pub fn load(data_dir: &Path) -> Result<Self, LoadError> {
        let mut corpora: BTreeMap<String, CorpusGroup> = BTreeMap::new();
        let corpora_dir = data_dir.join("corpora");
        let mut files = Vec::new();
        if corpora_dir.is_dir() {
            walk(&corpora_dir, &mut files)?;
        }
        files.sort();
        for path in files {
            let bytes = fs::read(&path).map_err(io_err(&path))?;
            if !bytes.starts_with(b"#corpus ") {
                continue;
            }
            let text = String::from_utf8_lossy(&bytes);
            let corpus = deserialize_corpus(&text).map_err(|source| LoadError::Corpus {
                path: path.clone(),
                source,
            })?;
            let name = corpus.name().to_string();
            let group = corpora.entry(name.clone()).or_insert_with(|| CorpusGroup {
                name: name.clone(),
                source: corpus.source(),
                cohort: corpus.cohort(),
                versions: BTreeMap::new(),
                gold: HashMap::new(),
            });
            if group.source != corpus.source() || group.cohort != corpus.cohort() {
                return Err(LoadError::Inconsistent { name });
            }
            let condition = corpus.condition();
            if let Some(existing) = group.versions.get(&condition) {
                return Err(LoadError::Duplicate {
                    name,
                    condition,
                    first: existing.path.clone(),
                    second: path,
                });
            }
            tracing::info!(path = %path.display(), %name, %condition, records = corpus.len(), "loaded corpus");
            group.versions.insert(
                condition,
                LoadedCorpus {
                    index: build_index(&corpus),
                    content_hash: sha256_hex(&bytes),
                    corpus,
                    path,
                },
            );
        }
        for group in corpora.values_mut() {
            if let Some(base) = group.versions.get(&Condition::Baseline) {
                group.gold = base
                    .corpus
                    .records()
                    .iter()
                    .map(|r| (r.id.clone(), assign_tissue_label(r)))
                    .collect();
            }
        }
        Ok(AppState {
            corpora,
            latest_report: latest_report(&data_dir.join("reports"))?,
            data_dir: data_dir.to_path_buf(),
        })
    }
}

fn latest_report(dir: &Path) -> Result<Option<StoredReport>, LoadError> {
    if !dir.is_dir() {
        return Ok(None);
    }
    let mut best: Option<StoredReport> = None;
    for entry in fs::read_dir(dir).map_err(io_err(dir))? {
        let run_dir = entry.map_err(io_err(dir))?.path();
        let report_path = run_dir.join("report.json");
        if !report_path.is_file() {
            continue;
        }
        let timestamp = RunManifest::load(&run_dir.join("manifest.json"))
            .ok()
            .and_then(|m| chrono::DateTime::parse_from_rfc3339(&m.timestamp).ok());
        let run = run_dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        let newer = match &best {
            None => true,
            // runs without a readable manifest sort before any dated run
            Some(b) => (timestamp, &run) > (b.timestamp, &b.run),
        };
        if newer {
            let body = fs::read(&report_path).map_err(io_err(&report_path))?;
            best = Some(StoredReport {
                run,
                timestamp,
                body,
            });
        }
    }
    Ok(best)
}
