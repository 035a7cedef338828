//! Data dictionaries and metadata templates, and validation of field values
//! against template constraints.
//!
//! A data dictionary is the repository's plain-text list of field names,
//! descriptions and value formats (three em-dash separated columns). A
//! template is machine readable: every field carries a constraint, which is
//! a data type, a closed value set, or a branch of an ontology shipped as a
//! static snapshot of canonical term labels.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::record::{canonical_field_name, canonical_text, FieldValue, MetadataRecord};

const BUNDLED_DICTIONARY: &str = include_str!("../assets/biosample_dictionary.txt");
const BUNDLED_TEMPLATE: &str = include_str!("../assets/biosample_template.json");

/// Template/dictionary sections reused for GEO records.
pub const GEO_FIELDS: &[&str] = &[
    "organism",
    "age",
    "sex",
    "tissue",
    "disease",
    "cell type",
    "sample type",
];

const COLUMN_SEPARATOR: char = '—';

#[derive(Debug, Error)]
pub enum SchemaError {
    #[error("entry {index}: {message}")]
    Format { index: usize, message: String },
    #[error("template field `{0}` has an empty term list")]
    EmptyTermList(String),
    #[error("invalid template: {0}")]
    InvalidTemplate(String),
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DictionaryEntry {
    pub field_name: String,
    pub description: String,
    pub value_format: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataDictionary {
    entries: Vec<DictionaryEntry>,
}

/// Parses the three-column dictionary text, one entry per non-blank line.
/// A leading `Name — Description — ...` heading line is skipped.
pub fn parse_data_dictionary(text: &str) -> Result<DataDictionary, SchemaError> {
    let mut entries: Vec<DictionaryEntry> = Vec::new();
    let mut seen = HashSet::new();
    let mut index = 0;
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let columns: Vec<&str> = line.split(COLUMN_SEPARATOR).map(str::trim).collect();
        if index == 0 && columns.first().map(|c| canonical_text(c)).as_deref() == Some("name") {
            continue;
        }
        index += 1;
        if columns.len() < 3 {
            return Err(SchemaError::Format {
                index,
                message: format!("expected 3 columns, found {}: `{line}`", columns.len()),
            });
        }
        let field_name = canonical_field_name(columns[0]);
        if field_name.is_empty() {
            return Err(SchemaError::Format {
                index,
                message: "empty field name".into(),
            });
        }
        if !seen.insert(field_name.clone()) {
            return Err(SchemaError::Format {
                index,
                message: format!("duplicate field `{field_name}`"),
            });
        }
        // descriptions may themselves contain the separator
        let last = columns.len() - 1;
        entries.push(DictionaryEntry {
            field_name,
            description: columns[1..last].join(" — "),
            value_format: columns[last].to_string(),
        });
    }
    Ok(DataDictionary { entries })
}

impl DataDictionary {
    /// The bundled BioSample (Human package) dictionary.
    pub fn bundled_biosample() -> Self {
        parse_data_dictionary(BUNDLED_DICTIONARY).expect("bundled dictionary parses")
    }

    pub fn entries(&self) -> &[DictionaryEntry] {
        &self.entries
    }

    pub fn get(&self, field_name: &str) -> Option<&DictionaryEntry> {
        let canon = canonical_field_name(field_name);
        self.entries.iter().find(|e| e.field_name == canon)
    }

    /// Keeps only the named entries, in dictionary order.
    pub fn restricted_to(&self, names: &[&str]) -> Self {
        let keep: HashSet<String> = names.iter().map(|n| canonical_field_name(n)).collect();
        DataDictionary {
            entries: self
                .entries
                .iter()
                .filter(|e| keep.contains(&e.field_name))
                .cloned()
                .collect(),
        }
    }

    /// Text form used inside prompts.
    pub fn render(&self) -> String {
        let mut out = String::from("Name — Description — Value format");
        for e in &self.entries {
            out.push_str("\n\n");
            out.push_str(&format!(
                "{} — {} — {}",
                e.field_name, e.description, e.value_format
            ));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataType {
    Text,
    Integer,
    FloatWithUnit,
    Date,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FieldConstraint {
    DataType {
        #[serde(rename = "type")]
        data_type: DataType,
    },
    ValueSet {
        terms: Vec<String>,
    },
    OntologyBranch {
        ontology: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        label: Option<String>,
        terms: Vec<String>,
    },
}

impl FieldConstraint {
    /// Terms of a value set or ontology branch.
    pub fn terms(&self) -> Option<&[String]> {
        match self {
            FieldConstraint::DataType { .. } => None,
            FieldConstraint::ValueSet { terms } | FieldConstraint::OntologyBranch { terms, .. } => {
                Some(terms)
            }
        }
    }

    /// Annotation shown next to the field in template prompts.
    pub fn comment(&self) -> String {
        match self {
            FieldConstraint::DataType { data_type } => match data_type {
                DataType::Text => "{text}".into(),
                DataType::Integer => "{integer}".into(),
                DataType::FloatWithUnit => "{float}{unit}".into(),
                DataType::Date => "{date}".into(),
            },
            FieldConstraint::ValueSet { terms } => format!("Must be one of: {}", terms.join(", ")),
            FieldConstraint::OntologyBranch {
                ontology, label, ..
            } => format!("Must be from {} ontology", label.as_deref().unwrap_or(ontology)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemplateField {
    pub name: String,
    pub description: String,
    #[serde(default)]
    pub required: bool,
    pub constraint: FieldConstraint,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetadataTemplate {
    pub name: String,
    pub fields: Vec<TemplateField>,
}

/// Parses and validates a template document. Names and terms are
/// canonicalized and term lists deduplicated.
pub fn load_template(json: &str) -> Result<MetadataTemplate, SchemaError> {
    let raw: MetadataTemplate =
        serde_json::from_str(json).map_err(|e| SchemaError::InvalidTemplate(e.to_string()))?;
    MetadataTemplate::new(raw.name, raw.fields)
}

pub fn load_template_file(path: &Path) -> Result<MetadataTemplate, SchemaError> {
    let text = std::fs::read_to_string(path).map_err(|source| SchemaError::Io {
        path: path.display().to_string(),
        source,
    })?;
    load_template(&text)
}

pub fn load_dictionary_file(path: &Path) -> Result<DataDictionary, SchemaError> {
    let text = std::fs::read_to_string(path).map_err(|source| SchemaError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_data_dictionary(&text)
}

fn dedup_terms(terms: &[String]) -> Vec<String> {
    let mut seen = HashSet::new();
    terms
        .iter()
        .map(|t| canonical_text(t))
        .filter(|t| !t.is_empty() && seen.insert(t.clone()))
        .collect()
}

impl MetadataTemplate {
    pub fn new(name: String, fields: Vec<TemplateField>) -> Result<Self, SchemaError> {
        if fields.is_empty() {
            return Err(SchemaError::InvalidTemplate(format!(
                "template `{name}` has no fields"
            )));
        }
        let mut seen = HashSet::new();
        let mut out = Vec::with_capacity(fields.len());
        for mut field in fields {
            field.name = canonical_field_name(&field.name);
            if field.name.is_empty() {
                return Err(SchemaError::InvalidTemplate("empty field name".into()));
            }
            if !seen.insert(field.name.clone()) {
                return Err(SchemaError::InvalidTemplate(format!(
                    "duplicate field `{}`",
                    field.name
                )));
            }
            match &mut field.constraint {
                FieldConstraint::DataType { .. } => {}
                FieldConstraint::ValueSet { terms } | FieldConstraint::OntologyBranch { terms, .. } => {
                    *terms = dedup_terms(terms);
                    if terms.is_empty() {
                        return Err(SchemaError::EmptyTermList(field.name.clone()));
                    }
                }
            }
            out.push(field);
        }
        Ok(MetadataTemplate { name, fields: out })
    }

    /// The bundled BioSample Human template.
    pub fn bundled_biosample() -> Self {
        load_template(BUNDLED_TEMPLATE).expect("bundled template is valid")
    }

    pub fn field(&self, name: &str) -> Option<&TemplateField> {
        let canon = canonical_field_name(name);
        self.fields.iter().find(|f| f.name == canon)
    }

    /// Keeps only the named fields, in template order.
    pub fn restricted_to(&self, names: &[&str]) -> Self {
        let keep: HashSet<String> = names.iter().map(|n| canonical_field_name(n)).collect();
        MetadataTemplate {
            name: self.name.clone(),
            fields: self
                .fields
                .iter()
                .filter(|f| keep.contains(&f.name))
                .cloned()
                .collect(),
        }
    }

    /// Text form used inside prompts.
    pub fn render(&self) -> String {
        let mut out = String::from("Name — Description — Comments");
        for f in &self.fields {
            out.push_str("\n\n");
            out.push_str(&format!(
                "{} — {} — {}",
                f.name,
                f.description,
                f.constraint.comment()
            ));
        }
        out
    }

    pub fn validate_value(&self, field_name: &str, value: &str) -> ValidationResult {
        self.validate_field_value(field_name, &FieldValue::new(value))
    }

    pub fn validate_field_value(&self, field_name: &str, value: &FieldValue) -> ValidationResult {
        let Some(field) = self.field(field_name) else {
            return ValidationResult::violation(Violation::UnknownField);
        };
        let Some(canon) = value.canonical() else {
            return if field.required {
                ValidationResult::violation(Violation::MissingRequired)
            } else {
                ValidationResult::ok()
            };
        };
        let conforms = match &field.constraint {
            FieldConstraint::DataType { data_type } => {
                if type_matches(*data_type, &canon) {
                    None
                } else {
                    Some(Violation::TypeMismatch)
                }
            }
            FieldConstraint::ValueSet { terms } => {
                (!terms.contains(&canon)).then_some(Violation::NotInValueSet)
            }
            FieldConstraint::OntologyBranch { terms, .. } => {
                (!terms.contains(&canon)).then_some(Violation::NotInOntologyBranch)
            }
        };
        match conforms {
            None => ValidationResult::ok(),
            Some(v) => ValidationResult::violation(v),
        }
    }

    /// One result per template field, then `UnknownField` for each distinct
    /// record field the template does not define.
    pub fn validate_record(&self, record: &MetadataRecord) -> Vec<(String, ValidationResult)> {
        let mut results = Vec::with_capacity(self.fields.len());
        for field in &self.fields {
            let result = match record.lookup(&field.name) {
                Some(value) => self.validate_field_value(&field.name, value),
                None if field.required => ValidationResult::violation(Violation::MissingRequired),
                None => ValidationResult::ok(),
            };
            results.push((field.name.clone(), result));
        }
        let mut extra = HashSet::new();
        for pair in &record.fields {
            if self.field(&pair.name).is_none() && extra.insert(pair.name.clone()) {
                results.push((pair.name.clone(), ValidationResult::violation(Violation::UnknownField)));
            }
        }
        results
    }
}

pub fn validate_value(template: &MetadataTemplate, field_name: &str, value: &str) -> ValidationResult {
    template.validate_value(field_name, value)
}

pub fn validate_record(
    template: &MetadataTemplate,
    record: &MetadataRecord,
) -> Vec<(String, ValidationResult)> {
    template.validate_record(record)
}

static INTEGER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^[+-]?\d+$").unwrap());
static FLOAT_WITH_UNIT: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^[+-]?(\d+(\.\d*)?|\.\d+)( ?[a-zµ°%][a-zµ°%/.\d]*)?$").unwrap()
});
static DATE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^(\d{4})(-(\d{2})(-(\d{2}))?)?$").unwrap());

fn type_matches(data_type: DataType, canon: &str) -> bool {
    match data_type {
        DataType::Text => true,
        DataType::Integer => INTEGER.is_match(canon),
        DataType::FloatWithUnit => FLOAT_WITH_UNIT.is_match(canon),
        DataType::Date => {
            let Some(caps) = DATE.captures(canon) else {
                return false;
            };
            let year: i32 = caps[1].parse().unwrap_or(0);
            match (caps.get(3), caps.get(5)) {
                (None, _) => true,
                (Some(m), None) => matches!(m.as_str().parse::<u32>(), Ok(1..=12)),
                (Some(m), Some(d)) => {
                    let month = m.as_str().parse().unwrap_or(0);
                    let day = d.as_str().parse().unwrap_or(0);
                    chrono::NaiveDate::from_ymd_opt(year, month, day).is_some()
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Violation {
    UnknownField,
    TypeMismatch,
    NotInValueSet,
    NotInOntologyBranch,
    MissingRequired,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Violation::UnknownField => "unknown field",
            Violation::TypeMismatch => "type mismatch",
            Violation::NotInValueSet => "not in value set",
            Violation::NotInOntologyBranch => "not in ontology branch",
            Violation::MissingRequired => "missing required value",
        };
        f.write_str(s)
    }
}

/// `conforms` is true exactly when `violation` is absent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ValidationResult {
    conforms: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    violation: Option<Violation>,
}

impl ValidationResult {
    pub fn ok() -> Self {
        ValidationResult {
            conforms: true,
            violation: None,
        }
    }

    pub fn violation(v: Violation) -> Self {
        ValidationResult {
            conforms: false,
            violation: Some(v),
        }
    }

    pub fn conforms(&self) -> bool {
        self.conforms
    }

    pub fn violation_kind(&self) -> Option<Violation> {
        self.violation
    }
}
