//! `field:value` queries answered by exact matching on one field.
//!
//! A record is retrieved when the first value of the named field equals the
//! query value after canonicalization (trim, lowercase, collapse whitespace).
//! There is no partial matching, stemming or synonym expansion, and the
//! missing marker never matches. [`MatchMode::StrictCase`] compares the
//! trimmed stored bytes instead.
//!
//! [`execute`] is a linear scan and serves as the reference for the
//! inverted [`Index`].

use std::collections::HashMap;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::record::{canonical_field_name, canonical_text, Corpus, FieldValue, MetadataRecord, RecordId};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SearchError {
    #[error("invalid query `{query}`: {reason}")]
    InvalidQuery { query: String, reason: &'static str },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchMode {
    #[default]
    Canonical,
    StrictCase,
}

impl MatchMode {
    fn key(self, value: &FieldValue) -> Option<String> {
        match self {
            MatchMode::Canonical => value.canonical(),
            MatchMode::StrictCase => value.text().map(str::to_string),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct SearchQuery {
    pub field: String,
    pub value: String,
}

impl fmt::Display for SearchQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.field, self.value)
    }
}

pub fn parse_query(text: &str) -> Result<SearchQuery, SearchError> {
    parse_query_with(text, MatchMode::Canonical)
}

/// Splits at the first colon. The field is always canonicalized; the value
/// is canonicalized in [`MatchMode::Canonical`] and only trimmed otherwise.
pub fn parse_query_with(text: &str, mode: MatchMode) -> Result<SearchQuery, SearchError> {
    let invalid = |reason| SearchError::InvalidQuery {
        query: text.to_string(),
        reason,
    };
    let (field, value) = text
        .split_once(':')
        .ok_or_else(|| invalid("expected `field:value`"))?;
    let field = canonical_field_name(field);
    let value = match mode {
        MatchMode::Canonical => canonical_text(value),
        MatchMode::StrictCase => value.trim().to_string(),
    };
    if field.is_empty() {
        return Err(invalid("empty field name"));
    }
    if value.is_empty() {
        return Err(invalid("empty value"));
    }
    Ok(SearchQuery { field, value })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct QueryResult {
    pub query: SearchQuery,
    pub corpus_name: String,
    pub retrieved_ids: Vec<RecordId>,
}

fn record_matches(record: &MetadataRecord, query: &SearchQuery, mode: MatchMode) -> bool {
    record
        .lookup(&query.field)
        .and_then(|value| mode.key(value))
        .is_some_and(|key| key == query.value)
}

pub fn execute(query: &SearchQuery, corpus: &Corpus) -> QueryResult {
    execute_with(query, corpus, MatchMode::Canonical)
}

pub fn execute_with(query: &SearchQuery, corpus: &Corpus, mode: MatchMode) -> QueryResult {
    QueryResult {
        query: query.clone(),
        corpus_name: corpus.name().to_string(),
        retrieved_ids: corpus
            .records()
            .iter()
            .filter(|r| record_matches(r, query, mode))
            .map(|r| r.id.clone())
            .collect(),
    }
}

/// Immutable inverted index from `(field, value key)` to record ids in corpus order.
#[derive(Debug, Clone)]
pub struct Index {
    corpus_name: String,
    mode: MatchMode,
    postings: HashMap<(String, String), Vec<RecordId>>,
}

impl Index {
    pub fn build(corpus: &Corpus, mode: MatchMode) -> Self {
        let mut postings: HashMap<(String, String), Vec<RecordId>> = HashMap::new();
        for record in corpus.records() {
            let mut seen_fields: Vec<&str> = Vec::with_capacity(record.fields.len());
            for pair in &record.fields {
                // only the first occurrence of a name is searchable
                if seen_fields.contains(&pair.name.as_str()) {
                    continue;
                }
                seen_fields.push(&pair.name);
                if let Some(key) = mode.key(&pair.value) {
                    postings
                        .entry((pair.name.clone(), key))
                        .or_default()
                        .push(record.id.clone());
                }
            }
        }
        Index {
            corpus_name: corpus.name().to_string(),
            mode,
            postings,
        }
    }

    pub fn mode(&self) -> MatchMode {
        self.mode
    }

    pub fn execute(&self, query: &SearchQuery) -> QueryResult {
        let retrieved_ids = self
            .postings
            .get(&(query.field.clone(), query.value.clone()))
            .cloned()
            .unwrap_or_default();
        QueryResult {
            query: query.clone(),
            corpus_name: self.corpus_name.clone(),
            retrieved_ids,
        }
    }
}

pub fn build_index(corpus: &Corpus) -> Index {
    Index::build(corpus, MatchMode::Canonical)
}

pub fn execute_indexed(query: &SearchQuery, index: &Index) -> QueryResult {
    index.execute(query)
}
