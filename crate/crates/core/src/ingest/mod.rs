//! Corpus construction: repository queries, raw payload fetching and
//! caching, and seeded uniform sampling of well-formed records.

mod client;

use std::collections::HashSet;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::record::{
    parse_biosample_record, parse_geo_record, Cohort, Condition, Corpus, CorpusHeader, MetadataRecord,
    RecordError, Source,
};

pub use client::{
    fetch_raw, EntrezClient, FetchOutcome, FixtureClient, HttpResponse, HttpTransport, RawPayload,
    RepositoryClient, ReqwestTransport, DEFAULT_EUTILS_BASE,
};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("network error: {0}")]
    Network(String),
    #[error("quota or authorization error (HTTP {status}): {message}")]
    Quota { status: u16, message: String },
    #[error("unexpected response: {0}")]
    Response(String),
    #[error("only {available} well-formed records, {target} requested")]
    InsufficientRecords { available: usize, target: usize },
    #[error("invalid sampling plan: {0}")]
    InvalidPlan(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Record(#[from] RecordError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CohortQuery {
    pub cohort: Cohort,
    pub source: Source,
    pub query_string: String,
}

pub fn build_query(cohort: Cohort, source: Source) -> CohortQuery {
    let topic = match cohort {
        Cohort::Lung => "lung",
        Cohort::Liver => "liver",
        Cohort::Ovarian => "ovarian",
    };
    let query_string = match source {
        Source::BioSample => format!("{topic} cancer[All Fields] AND \"human 1 0\"[filter]"),
        Source::Geo => format!("{topic} cancer[All Fields] AND human[Organism]"),
    };
    CohortQuery {
        cohort,
        source,
        query_string,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplingPlan {
    pub initial_count: usize,
    pub target_count: usize,
    pub seed: u64,
}

impl SamplingPlan {
    pub fn new(initial_count: usize, target_count: usize, seed: u64) -> Result<Self, IngestError> {
        let plan = SamplingPlan {
            initial_count,
            target_count,
            seed,
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn with_seed(seed: u64) -> Self {
        SamplingPlan {
            initial_count: 1000,
            target_count: 800,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), IngestError> {
        if self.initial_count == 0 || self.target_count == 0 {
            return Err(IngestError::InvalidPlan("counts must be positive".into()));
        }
        if self.target_count > self.initial_count {
            return Err(IngestError::InvalidPlan(format!(
                "target {} exceeds initial count {}",
                self.target_count, self.initial_count
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SampleReport {
    pub input: usize,
    pub malformed: usize,
    pub duplicates: usize,
    pub sampled: usize,
}

pub fn parse_raw(source: Source, raw: &str) -> Result<MetadataRecord, RecordError> {
    match source {
        Source::BioSample => parse_biosample_record(raw),
        Source::Geo => parse_geo_record(raw),
    }
}

/// Parses every payload, drops malformed ones and repeated ids, shuffles
/// the survivors with `plan.seed` and keeps the first `plan.target_count`.
pub fn sample_uniform(
    raw: &[String],
    plan: &SamplingPlan,
    source: Source,
    cohort: Cohort,
) -> Result<(Corpus, SampleReport), IngestError> {
    plan.validate()?;
    let mut malformed = 0;
    let mut duplicates = 0;
    let mut seen = HashSet::new();
    let mut survivors = Vec::new();
    for text in raw {
        match parse_raw(source, text) {
            Ok(record) => {
                if seen.insert(record.id.clone()) {
                    survivors.push(record);
                } else {
                    duplicates += 1;
                }
            }
            Err(err) => {
                tracing::debug!(%err, "dropping malformed record");
                malformed += 1;
            }
        }
    }
    if survivors.len() < plan.target_count {
        return Err(IngestError::InsufficientRecords {
            available: survivors.len(),
            target: plan.target_count,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    survivors.shuffle(&mut rng);
    survivors.truncate(plan.target_count);
    let report = SampleReport {
        input: raw.len(),
        malformed,
        duplicates,
        sampled: survivors.len(),
    };
    let header = CorpusHeader {
        name: corpus_name(source, cohort),
        source,
        cohort,
        condition: Condition::Baseline,
        seed: Some(plan.seed),
    };
    Ok((Corpus::new(header, survivors)?, report))
}

/// `biosample-lung`, `geo-ovarian`, ...
pub fn corpus_name(source: Source, cohort: Cohort) -> String {
    format!("{source}-{cohort}")
}

/// `<root>/raw/<source>/<cohort>`
pub fn raw_cache_dir(root: &Path, source: Source, cohort: Cohort) -> PathBuf {
    root.join("raw").join(source.as_str()).join(cohort.as_str())
}

fn safe_file_name(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' { c } else { '_' })
        .collect()
}

pub fn write_raw_cache(
    root: &Path,
    source: Source,
    cohort: Cohort,
    payloads: &[RawPayload],
) -> Result<(), IngestError> {
    let dir = raw_cache_dir(root, source, cohort);
    fs::create_dir_all(&dir).map_err(|source| IngestError::Io {
        path: dir.clone(),
        source,
    })?;
    for payload in payloads {
        let path = dir.join(safe_file_name(&payload.id));
        fs::write(&path, &payload.text).map_err(|source| IngestError::Io { path, source })?;
    }
    Ok(())
}

/// Cached payloads for one cohort, ordered by file name.
pub fn read_raw_cache(root: &Path, source: Source, cohort: Cohort) -> Result<Vec<RawPayload>, IngestError> {
    read_payload_dir(&raw_cache_dir(root, source, cohort))
}

pub(crate) fn read_payload_dir(dir: &Path) -> Result<Vec<RawPayload>, IngestError> {
    let io_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| IngestError::Io { path, source }
    };
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io_err(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .collect();
    entries.sort();
    entries
        .into_iter()
        .map(|path| {
            let text = fs::read_to_string(&path).map_err(io_err(&path))?;
            let id = path
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default();
            Ok(RawPayload { id, text })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn query_strings() {
        assert_eq!(
            build_query(Cohort::Lung, Source::Geo).query_string,
            "lung cancer[All Fields] AND human[Organism]"
        );
        assert_eq!(
            build_query(Cohort::Liver, Source::BioSample).query_string,
            "liver cancer[All Fields] AND \"human 1 0\"[filter]"
        );
        assert_eq!(
            build_query(Cohort::Ovarian, Source::Geo).query_string,
            "ovarian cancer[All Fields] AND human[Organism]"
        );
    }

    fn geo_payload(i: usize) -> String {
        format!("geo_accession: GSM{i}\ntissue: lung\n")
    }

    #[test]
    fn sample_counts_and_malformed() {
        let mut raw: Vec<String> = (0..1000).map(geo_payload).collect();
        for slot in raw.iter_mut().step_by(20) {
            *slot = "no pairs here".into();
        }
        let plan = SamplingPlan::new(1000, 800, 7).unwrap();
        let (corpus, report) = sample_uniform(&raw, &plan, Source::Geo, Cohort::Lung).unwrap();
        assert_eq!(
            report,
            SampleReport { input: 1000, malformed: 50, duplicates: 0, sampled: 800 }
        );
        assert_eq!(corpus.len(), 800);
        assert_eq!(corpus.header().seed, Some(7));
    }

    #[test]
    fn all_records_shuffled_and_deterministic() {
        let raw: Vec<String> = (0..10).map(geo_payload).collect();
        let plan = SamplingPlan::new(10, 10, 42).unwrap();
        let (a, _) = sample_uniform(&raw, &plan, Source::Geo, Cohort::Lung).unwrap();
        let (b, _) = sample_uniform(&raw, &plan, Source::Geo, Cohort::Lung).unwrap();
        assert_eq!(a, b);
        let mut ids: Vec<&str> = a.records().iter().map(|r| r.id.as_str()).collect();
        let original: Vec<String> = (0..10).map(|i| format!("GSM{i}")).collect();
        assert_ne!(ids, original.iter().map(String::as_str).collect::<Vec<_>>());
        ids.sort();
        let mut expected = original.clone();
        expected.sort();
        assert_eq!(ids, expected);
    }

    #[test]
    fn insufficient_and_invalid_plans() {
        let raw: Vec<String> = (0..5).map(geo_payload).collect();
        let plan = SamplingPlan::new(8, 8, 1).unwrap();
        assert!(matches!(
            sample_uniform(&raw, &plan, Source::Geo, Cohort::Lung),
            Err(IngestError::InsufficientRecords { available: 5, target: 8 })
        ));
        assert!(SamplingPlan::new(10, 11, 1).is_err());
        assert!(SamplingPlan::new(0, 0, 1).is_err());
    }

    #[test]
    fn duplicates_are_dropped() {
        let raw = vec![geo_payload(1), geo_payload(1), geo_payload(2)];
        let plan = SamplingPlan::new(3, 2, 0).unwrap();
        let (_, report) = sample_uniform(&raw, &plan, Source::Geo, Cohort::Lung).unwrap();
        assert_eq!(report.duplicates, 1);
        assert_eq!(report.sampled, 2);
    }

    #[test]
    fn raw_cache_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let payloads = vec![
            RawPayload { id: "SAMN2".into(), text: "b".into() },
            RawPayload { id: "SAMN1".into(), text: "a".into() },
        ];
        write_raw_cache(dir.path(), Source::BioSample, Cohort::Liver, &payloads).unwrap();
        assert!(dir.path().join("raw/biosample/liver/SAMN1").is_file());
        let back = read_raw_cache(dir.path(), Source::BioSample, Cohort::Liver).unwrap();
        assert_eq!(back.iter().map(|p| p.id.as_str()).collect::<Vec<_>>(), ["SAMN1", "SAMN2"]);
    }
}
