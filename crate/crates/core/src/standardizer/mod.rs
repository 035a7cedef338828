//! Guidance-conditioned record correction.
//!
//! A prompt combines the inline rendering of a record with the full data
//! dictionary (DD) or template (CEDAR) rendering. A [`CompletionBackend`]
//! answers it with `name: value` lines, which are parsed back into a record
//! that keeps the original id. Failed records pass through unchanged.

mod config;
mod live;
mod replay;
mod rule;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{LazyLock, Mutex};

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::digest::sha256_hex;
use crate::record::{
    Condition, Corpus, CorpusHeader, FieldValuePair, MetadataRecord, RecordId, Source,
};
use crate::schema::{DataDictionary, MetadataTemplate, GEO_FIELDS};

pub use config::{build_backend, BackendConfig, BackendKind, ReplayMode};
pub use live::LiveBackend;
pub use replay::ReplayBackend;
pub use rule::RuleBackend;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StandardizeError {
    #[error("{0} condition needs guidance that was not supplied")]
    MissingGuidance(Condition),
    #[error("model output contained no `name: value` lines")]
    ParseFailed,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BackendError {
    #[error("no recorded response for prompt {0}")]
    CacheMiss(String),
    #[error("HTTP transport error: {0}")]
    Transport(String),
    #[error("HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("backend rejected the prompt: {0}")]
    Rejected(String),
    #[error("malformed backend response: {0}")]
    Response(String),
    #[error("backend configuration: {0}")]
    Config(String),
    #[error("I/O: {0}")]
    Io(String),
}

#[derive(Deserialize)]
struct PromptAsset {
    version: u32,
    dd: String,
    cedar: String,
    retry_reminder: String,
}

static PROMPTS: LazyLock<PromptAsset> = LazyLock::new(|| {
    toml::from_str(include_str!("../../assets/prompts.toml")).expect("bundled prompt asset is valid")
});

/// Version of the bundled prompt wording.
pub fn prompt_version() -> u32 {
    PROMPTS.version
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Prompt {
    pub text: String,
    pub record_id: RecordId,
    pub condition: Condition,
    pub guidance_digest: String,
}

impl Prompt {
    /// Hash used to key replay caches.
    pub fn hash(&self) -> String {
        sha256_hex(self.text.as_bytes())
    }

    fn with_reminder(&self) -> Prompt {
        Prompt {
            text: format!("{}\n\n{}", self.text, PROMPTS.retry_reminder),
            ..self.clone()
        }
    }
}

/// `name:value` pairs joined by ` — `, in record order.
pub fn render_record_inline(record: &MetadataRecord) -> String {
    record
        .fields
        .iter()
        .map(|p| format!("{}:{}", p.name, p.value.as_str()))
        .collect::<Vec<_>>()
        .join(" — ")
}

pub fn build_prompt(
    record: &MetadataRecord,
    condition: Condition,
    dictionary: Option<&DataDictionary>,
    template: Option<&MetadataTemplate>,
) -> Result<Prompt, StandardizeError> {
    let (shape, guidance) = match condition {
        Condition::Baseline => return Err(StandardizeError::MissingGuidance(condition)),
        Condition::Dd => (
            &PROMPTS.dd,
            dictionary
                .ok_or(StandardizeError::MissingGuidance(condition))?
                .render(),
        ),
        Condition::Cedar => (
            &PROMPTS.cedar,
            template
                .ok_or(StandardizeError::MissingGuidance(condition))?
                .render(),
        ),
    };
    // guidance goes in first so braces in record values are never expanded
    let text = shape
        .replace("{guidance}", &guidance)
        .replace("{record}", &render_record_inline(record));
    Ok(Prompt {
        text,
        record_id: record.id.clone(),
        condition,
        guidance_digest: sha256_hex(guidance.as_bytes()),
    })
}

static OUTPUT_LINE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^\s*(?:[-*•]\s+)?([^:\s][^:]*?)\s*:\s*(\S.*?)\s*$").expect("valid regex")
});

/// Parses `name: value` lines into a record with the given id. Other lines
/// are ignored; `NA` values become missing markers.
pub fn parse_model_output(
    text: &str,
    id: &RecordId,
    source: Source,
) -> Result<MetadataRecord, StandardizeError> {
    let fields: Vec<FieldValuePair> = text
        .lines()
        .filter_map(|line| OUTPUT_LINE.captures(line))
        .filter_map(|c| {
            let name = c[1].trim_matches(|ch| ch == '*' || ch == '`').trim();
            let value = c[2].trim_matches(|ch| ch == '*' || ch == '`').trim();
            FieldValuePair::new(name, value).ok()
        })
        .collect();
    if fields.is_empty() {
        return Err(StandardizeError::ParseFailed);
    }
    Ok(MetadataRecord::new(id.clone(), source, fields))
}

/// Dictionary and template used for one source. GEO reuses the relevant
/// BioSample fields.
#[derive(Debug, Clone)]
pub struct Guidance {
    pub dictionary: DataDictionary,
    pub template: MetadataTemplate,
}

impl Guidance {
    pub fn new(dictionary: DataDictionary, template: MetadataTemplate) -> Self {
        Guidance {
            dictionary,
            template,
        }
    }

    pub fn bundled(source: Source) -> Self {
        Self::new(DataDictionary::bundled_biosample(), MetadataTemplate::bundled_biosample())
            .for_source(source)
    }

    /// Restricts GEO guidance to the shared field subset.
    pub fn for_source(self, source: Source) -> Self {
        match source {
            Source::BioSample => self,
            Source::Geo => Guidance {
                dictionary: self.dictionary.restricted_to(GEO_FIELDS),
                template: self.template.restricted_to(GEO_FIELDS),
            },
        }
    }
}

/// Everything a backend may look at. Text backends only read the prompt;
/// the rule backend works from the structured record and guidance.
pub struct CompletionRequest<'a> {
    pub prompt: &'a Prompt,
    pub record: &'a MetadataRecord,
    pub dictionary: Option<&'a DataDictionary>,
    pub template: Option<&'a MetadataTemplate>,
}

pub trait CompletionBackend: Send + Sync {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, BackendError>;
    fn name(&self) -> &'static str;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeStatus {
    Corrected,
    ParseFailed,
    BackendFailed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StandardizationOutcome {
    pub record_id: RecordId,
    pub status: OutcomeStatus,
    #[serde(skip)]
    pub corrected: Option<MetadataRecord>,
    pub attempts: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl StandardizationOutcome {
    pub fn is_corrected(&self) -> bool {
        self.status == OutcomeStatus::Corrected
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BatchOptions {
    pub max_inflight: usize,
}

impl Default for BatchOptions {
    fn default() -> Self {
        BatchOptions { max_inflight: 4 }
    }
}

/// Corrects one record, retrying once with a format reminder when the
/// response has no parsable lines.
pub fn standardize_record(
    record: &MetadataRecord,
    condition: Condition,
    guidance: &Guidance,
    backend: &dyn CompletionBackend,
) -> StandardizationOutcome {
    let failed = |status, attempts, error: String| StandardizationOutcome {
        record_id: record.id.clone(),
        status,
        corrected: None,
        attempts,
        error: Some(error),
    };
    if condition == Condition::Baseline {
        return StandardizationOutcome {
            record_id: record.id.clone(),
            status: OutcomeStatus::Corrected,
            corrected: Some(record.clone()),
            attempts: 0,
            error: None,
        };
    }
    let prompt = match build_prompt(record, condition, Some(&guidance.dictionary), Some(&guidance.template)) {
        Ok(p) => p,
        Err(e) => return failed(OutcomeStatus::BackendFailed, 0, e.to_string()),
    };
    let retry_prompt = prompt.with_reminder();
    for (attempt, prompt) in [&prompt, &retry_prompt].into_iter().enumerate() {
        let attempts = attempt as u32 + 1;
        let request = CompletionRequest {
            prompt,
            record,
            dictionary: (condition == Condition::Dd).then_some(&guidance.dictionary),
            template: (condition == Condition::Cedar).then_some(&guidance.template),
        };
        let text = match backend.complete(&request) {
            Ok(t) => t,
            Err(e) => return failed(OutcomeStatus::BackendFailed, attempts, e.to_string()),
        };
        match parse_model_output(&text, &record.id, record.source) {
            Ok(corrected) => {
                return StandardizationOutcome {
                    record_id: record.id.clone(),
                    status: OutcomeStatus::Corrected,
                    corrected: Some(corrected),
                    attempts,
                    error: None,
                }
            }
            Err(e) if attempts == 2 => return failed(OutcomeStatus::ParseFailed, attempts, e.to_string()),
            Err(_) => tracing::debug!(id = %record.id.as_str(), "unparsable output, retrying with reminder"),
        }
    }
    unreachable!("second attempt always returns")
}

/// Standardizes every record. The output corpus has the same records in the
/// same order, with corrected ones replaced and failed ones kept as they were.
pub fn standardize_batch(
    corpus: &Corpus,
    condition: Condition,
    guidance: &Guidance,
    backend: &dyn CompletionBackend,
    options: BatchOptions,
) -> (Corpus, Vec<StandardizationOutcome>) {
    let records = corpus.records();
    let slots: Vec<Mutex<Option<StandardizationOutcome>>> =
        records.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = options.max_inflight.clamp(1, records.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(record) = records.get(i) else { break };
                let outcome = standardize_record(record, condition, guidance, backend);
                *slots[i].lock().expect("outcome slot") = Some(outcome);
            });
        }
    });
    let outcomes: Vec<StandardizationOutcome> = slots
        .into_iter()
        .map(|s| s.into_inner().expect("outcome slot").expect("every record processed"))
        .collect();
    let out_records: Vec<MetadataRecord> = records
        .iter()
        .zip(&outcomes)
        .map(|(original, outcome)| outcome.corrected.clone().unwrap_or_else(|| original.clone()))
        .collect();
    let header = CorpusHeader {
        condition,
        ..corpus.header().clone()
    };
    let out = Corpus::new(header, out_records).expect("ids and sources are preserved");
    (out, outcomes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::record::Cohort;

    fn example_record() -> MetadataRecord {
        MetadataRecord::from_pairs(
            "SAMN0001",
            Source::BioSample,
            [("age", "67"), ("sex", "female"), ("tissue", "lung cancer")],
        )
        .unwrap()
    }

    #[test]
    fn inline_rendering() {
        assert_eq!(render_record_inline(&example_record()), "age:67 — sex:female — tissue:lung cancer");
        let one = MetadataRecord::from_pairs("x", Source::Geo, [("tissue", "lung")]).unwrap();
        assert_eq!(render_record_inline(&one), "tissue:lung");
        let empty = MetadataRecord::new("e", Source::Geo, vec![]);
        assert_eq!(render_record_inline(&empty), "");
    }

    #[test]
    fn dd_and_cedar_prompts() {
        let g = Guidance::bundled(Source::BioSample);
        let dd = build_prompt(&example_record(), Condition::Dd, Some(&g.dictionary), None).unwrap();
        assert!(dd.text.starts_with(
            "Convert the record: \"age:67 — sex:female — tissue:lung cancer\" to the format given by the BioSample data dictionary"
        ));
        assert!(dd.text.contains("tissue — Type of tissue the sample was taken from — {term}"));
        let cedar = build_prompt(&example_record(), Condition::Cedar, None, Some(&g.template)).unwrap();
        assert!(cedar.text.contains("Must be from Uberon ontology"));
        assert!(cedar.text.contains("Must be from Disease Ontology (DO) ontology"));
        assert_ne!(dd.guidance_digest, cedar.guidance_digest);
        let again = build_prompt(&example_record(), Condition::Cedar, None, Some(&g.template)).unwrap();
        assert_eq!(cedar, again);
    }

    #[test]
    fn missing_guidance() {
        let g = Guidance::bundled(Source::BioSample);
        assert_eq!(
            build_prompt(&example_record(), Condition::Baseline, Some(&g.dictionary), Some(&g.template)),
            Err(StandardizeError::MissingGuidance(Condition::Baseline))
        );
        assert_eq!(
            build_prompt(&example_record(), Condition::Dd, None, Some(&g.template)),
            Err(StandardizeError::MissingGuidance(Condition::Dd))
        );
        assert!(build_prompt(&example_record(), Condition::Cedar, Some(&g.dictionary), None).is_err());
    }

    #[test]
    fn parse_output_lines() {
        let id = RecordId::from("r");
        let text = "biosample accession: NA\norganism: Homo sapiens\nage: 67\nsex: female\ntissue: lung\ndisease: lung cancer\n...\n";
        let r = parse_model_output(text, &id, Source::BioSample).unwrap();
        assert_eq!(r.lookup("tissue").unwrap().text(), Some("lung"));
        assert_eq!(r.lookup("disease").unwrap().text(), Some("lung cancer"));
        assert_eq!(r.lookup("sex").unwrap().text(), Some("female"));
        assert!(r.lookup("biosample accession").unwrap().is_missing());

        let r = parse_model_output("biosample provider: NA", &id, Source::BioSample).unwrap();
        assert!(r.lookup("biosample provider").unwrap().is_missing());
        assert_eq!(
            parse_model_output("no colon anywhere", &id, Source::BioSample),
            Err(StandardizeError::ParseFailed)
        );
        let bulleted = parse_model_output("- **Tissue**: Lung\n", &id, Source::Geo).unwrap();
        assert_eq!(bulleted.lookup("tissue").unwrap().text(), Some("Lung"));
    }

    struct Scripted(Vec<Result<String, BackendError>>, Mutex<usize>);

    impl CompletionBackend for Scripted {
        fn complete(&self, _: &CompletionRequest<'_>) -> Result<String, BackendError> {
            let mut n = self.1.lock().unwrap();
            let r = self.0[(*n).min(self.0.len() - 1)].clone();
            *n += 1;
            r
        }
        fn name(&self) -> &'static str {
            "scripted"
        }
    }

    fn corpus() -> Corpus {
        Corpus::new(
            CorpusHeader {
                name: "biosample-lung".into(),
                source: Source::BioSample,
                cohort: Cohort::Lung,
                condition: Condition::Baseline,
                seed: Some(1),
            },
            vec![
                example_record(),
                MetadataRecord::from_pairs("SAMN0002", Source::BioSample, [("tissue", "PBMC")]).unwrap(),
            ],
        )
        .unwrap()
    }

    #[test]
    fn baseline_is_identity() {
        let c = corpus();
        let g = Guidance::bundled(Source::BioSample);
        let backend = Scripted(vec![Err(BackendError::Transport("unused".into()))], Mutex::new(0));
        let (out, outcomes) = standardize_batch(&c, Condition::Baseline, &g, &backend, BatchOptions::default());
        assert_eq!(out, c);
        assert!(outcomes.iter().all(|o| o.is_corrected() && o.attempts == 0));
        assert_eq!(*backend.1.lock().unwrap(), 0);
    }

    #[test]
    fn failing_backend_keeps_records() {
        let c = corpus();
        let g = Guidance::bundled(Source::BioSample);
        let backend = Scripted(vec![Err(BackendError::Transport("down".into()))], Mutex::new(0));
        let (out, outcomes) = standardize_batch(&c, Condition::Dd, &g, &backend, BatchOptions::default());
        assert_eq!(out.records(), c.records());
        assert_eq!(out.condition(), Condition::Dd);
        assert!(outcomes.iter().all(|o| o.status == OutcomeStatus::BackendFailed && o.corrected.is_none()));
    }

    #[test]
    fn parse_failure_retried_once() {
        let g = Guidance::bundled(Source::BioSample);
        let backend = Scripted(
            vec![Ok("sorry".into()), Ok("tissue: lung".into())],
            Mutex::new(0),
        );
        let o = standardize_record(&example_record(), Condition::Cedar, &g, &backend);
        assert_eq!((o.status, o.attempts), (OutcomeStatus::Corrected, 2));

        let backend = Scripted(vec![Ok("sorry".into())], Mutex::new(0));
        let o = standardize_record(&example_record(), Condition::Cedar, &g, &backend);
        assert_eq!((o.status, o.attempts), (OutcomeStatus::ParseFailed, 2));
        assert!(o.corrected.is_none());
    }
}
