//! Metadata records and corpora.
//!
//! A record is an ordered list of field-name/field-value pairs. Field names
//! are stored in canonical form (trimmed, lowercased, whitespace collapsed,
//! synonyms folded); values are stored trimmed, with the literal `NA` (any
//! case) turned into an explicit missing marker.

mod biosample;
mod corpus_file;
mod geo;

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use biosample::parse_biosample_record;
pub use corpus_file::{deserialize_corpus, serialize_corpus};
pub use geo::parse_geo_record;

/// Serialized form of a missing value.
pub const MISSING_MARKER: &str = "NA";

const FIELD_SYNONYMS: &[(&str, &str)] = &[
    ("tissue type", "tissue"),
    ("tissue_type", "tissue"),
    ("organism name", "organism"),
];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RecordError {
    #[error("malformed record: {0}")]
    MalformedRecord(String),
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("field name is empty after canonicalization")]
    EmptyFieldName,
    #[error("duplicate record id `{0}`")]
    DuplicateId(String),
    #[error("record `{id}` has source {found}, corpus source is {expected}")]
    SourceMismatch {
        id: String,
        expected: Source,
        found: Source,
    },
}

/// Trims, lowercases and collapses internal whitespace runs to one space.
pub fn canonical_text(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for word in text.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.extend(word.chars().flat_map(char::to_lowercase));
    }
    out
}

/// Canonical field name: [`canonical_text`] followed by the synonym map.
pub fn canonical_field_name(name: &str) -> String {
    let canon = canonical_text(name);
    FIELD_SYNONYMS
        .iter()
        .find(|(alias, _)| *alias == canon)
        .map(|(_, target)| (*target).to_string())
        .unwrap_or(canon)
}

macro_rules! text_enum {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        pub enum $name {
            $(#[serde(rename = $text)] $variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = String;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                let canon = canonical_text(s);
                $name::ALL
                    .iter()
                    .copied()
                    .find(|v| v.as_str() == canon)
                    .ok_or_else(|| format!(
                        "unknown {} `{}` (expected one of: {})",
                        stringify!($name).to_lowercase(),
                        s,
                        $name::ALL.iter().map(|v| v.as_str()).collect::<Vec<_>>().join(", ")
                    ))
            }
        }
    };
}

text_enum!(
    /// Repository a record was drawn from.
    Source { BioSample => "biosample", Geo => "geo" }
);
text_enum!(
    /// Cancer cohort a corpus was retrieved for.
    Cohort { Lung => "lung", Liver => "liver", Ovarian => "ovarian" }
);
text_enum!(
    /// Which guidance produced a corpus: none, the data dictionary, or the template.
    Condition { Baseline => "baseline", Dd => "dd", Cedar => "cedar" }
);

/// A field value: trimmed text or the explicit missing marker.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum FieldValue {
    Text(String),
    Missing,
}

impl FieldValue {
    pub fn new(raw: &str) -> Self {
        let trimmed = raw.trim();
        if trimmed.eq_ignore_ascii_case(MISSING_MARKER) {
            FieldValue::Missing
        } else {
            FieldValue::Text(trimmed.to_string())
        }
    }

    pub fn is_missing(&self) -> bool {
        matches!(self, FieldValue::Missing)
    }

    /// The stored text, `None` for the missing marker.
    pub fn text(&self) -> Option<&str> {
        match self {
            FieldValue::Text(t) => Some(t),
            FieldValue::Missing => None,
        }
    }

    /// Canonical form used for matching, `None` for the missing marker.
    pub fn canonical(&self) -> Option<String> {
        self.text().map(canonical_text)
    }

    /// Serialized form (`NA` for missing).
    pub fn as_str(&self) -> &str {
        self.text().unwrap_or(MISSING_MARKER)
    }
}

impl fmt::Display for FieldValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for FieldValue {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for FieldValue {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        Ok(FieldValue::new(&raw))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawPair")]
pub struct FieldValuePair {
    pub name: String,
    pub value: FieldValue,
}

#[derive(Deserialize)]
struct RawPair {
    name: String,
    value: FieldValue,
}

impl TryFrom<RawPair> for FieldValuePair {
    type Error = RecordError;

    fn try_from(raw: RawPair) -> Result<Self, Self::Error> {
        let name = canonical_field_name(&raw.name);
        if name.is_empty() {
            return Err(RecordError::EmptyFieldName);
        }
        Ok(FieldValuePair {
            name,
            value: raw.value,
        })
    }
}

impl FieldValuePair {
    pub fn new(name: &str, value: &str) -> Result<Self, RecordError> {
        Self::with_value(name, FieldValue::new(value))
    }

    pub fn with_value(name: &str, value: FieldValue) -> Result<Self, RecordError> {
        FieldValuePair::try_from(RawPair {
            name: name.to_string(),
            value,
        })
    }
}

/// Opaque record identifier, unique within a corpus.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RecordId(String);

impl RecordId {
    pub fn new(id: impl Into<String>) -> Self {
        RecordId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for RecordId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for RecordId {
    fn from(s: &str) -> Self {
        RecordId(s.to_string())
    }
}

impl From<String> for RecordId {
    fn from(s: String) -> Self {
        RecordId(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MetadataRecord {
    pub id: RecordId,
    pub source: Source,
    pub fields: Vec<FieldValuePair>,
    pub raw_text: Option<String>,
}

impl MetadataRecord {
    pub fn new(id: impl Into<RecordId>, source: Source, fields: Vec<FieldValuePair>) -> Self {
        MetadataRecord {
            id: id.into(),
            source,
            fields,
            raw_text: None,
        }
    }

    /// Builds a record from `(name, value)` string pairs.
    pub fn from_pairs<'a>(
        id: impl Into<RecordId>,
        source: Source,
        pairs: impl IntoIterator<Item = (&'a str, &'a str)>,
    ) -> Result<Self, RecordError> {
        let fields = pairs
            .into_iter()
            .map(|(n, v)| FieldValuePair::new(n, v))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(MetadataRecord::new(id, source, fields))
    }

    /// First value stored under `name` (compared canonically).
    pub fn lookup(&self, name: &str) -> Option<&FieldValue> {
        let canon = canonical_field_name(name);
        self.fields
            .iter()
            .find(|pair| pair.name == canon)
            .map(|pair| &pair.value)
    }
}

/// Returns the first value of `name` in `record`; the missing marker is returned as-is.
pub fn lookup_field<'r>(record: &'r MetadataRecord, name: &str) -> Option<&'r FieldValue> {
    record.lookup(name)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusHeader {
    pub name: String,
    pub source: Source,
    pub cohort: Cohort,
    pub condition: Condition,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// A named collection of records from one source, cohort and condition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    header: CorpusHeader,
    records: Vec<MetadataRecord>,
}

impl Corpus {
    pub fn new(header: CorpusHeader, records: Vec<MetadataRecord>) -> Result<Self, RecordError> {
        let mut seen = HashSet::with_capacity(records.len());
        for record in &records {
            if record.source != header.source {
                return Err(RecordError::SourceMismatch {
                    id: record.id.to_string(),
                    expected: header.source,
                    found: record.source,
                });
            }
            if !seen.insert(&record.id) {
                return Err(RecordError::DuplicateId(record.id.to_string()));
            }
        }
        Ok(Corpus { header, records })
    }

    pub fn header(&self) -> &CorpusHeader {
        &self.header
    }

    pub fn name(&self) -> &str {
        &self.header.name
    }

    pub fn source(&self) -> Source {
        self.header.source
    }

    pub fn cohort(&self) -> Cohort {
        self.header.cohort
    }

    pub fn condition(&self) -> Condition {
        self.header.condition
    }

    pub fn records(&self) -> &[MetadataRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, id: &RecordId) -> Option<&MetadataRecord> {
        self.records.iter().find(|r| &r.id == id)
    }

    /// Same records under a different condition.
    pub fn with_condition(mut self, condition: Condition) -> Self {
        self.header.condition = condition;
        self
    }

    pub fn into_records(self) -> Vec<MetadataRecord> {
        self.records
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn canonical_text_collapses_and_lowercases() {
        assert_eq!(canonical_text("  Biomaterial \t Provider  "), "biomaterial provider");
        assert_eq!(canonical_text(""), "");
    }

    #[test]
    fn synonyms_fold_to_canonical_names() {
        assert_eq!(canonical_field_name("Tissue Type"), "tissue");
        assert_eq!(canonical_field_name("tissue_type"), "tissue");
        assert_eq!(canonical_field_name("Organism  name"), "organism");
        assert_eq!(canonical_field_name("description"), "description");
    }

    #[test]
    fn na_in_any_case_is_missing() {
        assert!(FieldValue::new("NA").is_missing());
        assert!(FieldValue::new(" na ").is_missing());
        assert!(FieldValue::new("nA").is_missing());
        assert_eq!(FieldValue::new(" nab "), FieldValue::Text("nab".into()));
    }

    #[test]
    fn empty_field_name_rejected() {
        assert_eq!(
            FieldValuePair::new("   ", "x").unwrap_err(),
            RecordError::EmptyFieldName
        );
    }

    #[test]
    fn lookup_returns_first_duplicate() {
        let record = MetadataRecord::from_pairs(
            "r1",
            Source::BioSample,
            [("tissue", "lung"), ("sex", "female"), ("Tissue", "liver")],
        )
        .unwrap();
        assert_eq!(record.lookup("TISSUE ").and_then(FieldValue::text), Some("lung"));
        assert_eq!(record.lookup("strain"), None);
    }

    #[test]
    fn corpus_rejects_duplicate_ids_and_foreign_sources() {
        let header = CorpusHeader {
            name: "c".into(),
            source: Source::Geo,
            cohort: Cohort::Lung,
            condition: Condition::Baseline,
            seed: None,
        };
        let a = MetadataRecord::from_pairs("a", Source::Geo, [("tissue", "lung")]).unwrap();
        let b = MetadataRecord::from_pairs("b", Source::BioSample, [("tissue", "lung")]).unwrap();
        assert!(matches!(
            Corpus::new(header.clone(), vec![a.clone(), a.clone()]),
            Err(RecordError::DuplicateId(_))
        ));
        assert!(matches!(
            Corpus::new(header, vec![a, b]),
            Err(RecordError::SourceMismatch { .. })
        ));
    }

    #[test]
    fn enums_parse_case_insensitively() {
        assert_eq!("CEDAR".parse::<Condition>().unwrap(), Condition::Cedar);
        assert_eq!("BioSample".parse::<Source>().unwrap(), Source::BioSample);
        assert!("kidney".parse::<Cohort>().is_err());
    }

    proptest! {
        #[test]
        fn canonicalization_is_idempotent(s in "[ \tA-Za-z_]{0,24}") {
            let once = canonical_field_name(&s);
            prop_assert_eq!(canonical_field_name(&once), once.clone());
            let text = canonical_text(&s);
            prop_assert_eq!(canonical_text(&text), text);
        }
    }
}
