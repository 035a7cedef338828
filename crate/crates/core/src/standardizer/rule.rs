//! Deterministic stand-in for a language model.
//!
//! DD guidance only describes formats, so the DD rules are shallow: values
//! that name a disease move from `tissue` to `disease`, qualifier words are
//! stripped from `{term}` fields and absent dictionary fields become `NA`.
//! CEDAR guidance lists the permissible terms, so tissue values are also
//! mapped through the gold-label keywords onto the UBERON branch.

use crate::labeler::{label_for_value, TissueLabel};
use crate::record::{FieldValue, MetadataRecord, MISSING_MARKER};
use crate::schema::{DataDictionary, FieldConstraint, MetadataTemplate};

use super::{BackendError, CompletionBackend, CompletionRequest};

const DISEASE_INDICATORS: &[&str] = &[
    "cancer", "carcinoma", "tumor", "tumour", "neoplasm", "nsclc", "hcc", "malignant",
];

const QUALIFIERS: &[&str] = &[
    "tissue", "tissues", "sample", "samples", "specimen", "biopsy", "whole", "normal", "fresh",
    "frozen", "primary", "total", "peripheral",
];

const DISEASE_SYNONYMS: &[(&str, &str)] = &[
    ("nsclc", "non-small cell lung carcinoma"),
    ("hcc", "hepatocellular carcinoma"),
];

#[derive(Debug, Clone, Copy, Default)]
pub struct RuleBackend;

impl CompletionBackend for RuleBackend {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, BackendError> {
        let pairs = match (request.template, request.dictionary) {
            (Some(template), _) => apply_template(request.record, template),
            (None, Some(dictionary)) => apply_dictionary(request.record, dictionary),
            (None, None) => {
                return Err(BackendError::Config(
                    "rule backend needs a dictionary or a template".into(),
                ))
            }
        };
        Ok(render_lines(&pairs))
    }

    fn name(&self) -> &'static str {
        "rule"
    }
}

fn render_lines(pairs: &[(String, String)]) -> String {
    pairs.iter().map(|(n, v)| format!("{n}: {v}\n")).collect()
}

fn looks_like_disease(canon: &str) -> bool {
    DISEASE_INDICATORS.iter().any(|k| canon.contains(k))
}

fn strip_qualifiers(canon: &str) -> String {
    let kept: Vec<&str> = canon
        .split(' ')
        .filter(|w| !QUALIFIERS.contains(w))
        .collect();
    if kept.is_empty() {
        canon.to_string()
    } else {
        kept.join(" ")
    }
}

fn value_string(value: &FieldValue) -> String {
    value.text().unwrap_or(MISSING_MARKER).to_string()
}

/// First occurrence of each field, in record order.
fn first_pairs(record: &MetadataRecord) -> Vec<(String, FieldValue)> {
    let mut out: Vec<(String, FieldValue)> = Vec::new();
    for pair in &record.fields {
        if !out.iter().any(|(n, _)| n == &pair.name) {
            out.push((pair.name.clone(), pair.value.clone()));
        }
    }
    out
}

fn is_absent(pairs: &[(String, FieldValue)], name: &str) -> bool {
    pairs
        .iter()
        .find(|(n, _)| n == name)
        .is_none_or(|(_, v)| v.is_missing())
}

pub(crate) fn apply_dictionary(record: &MetadataRecord, dictionary: &DataDictionary) -> Vec<(String, String)> {
    let mut pairs = first_pairs(record);

    let tissue = pairs
        .iter()
        .position(|(n, _)| n == "tissue")
        .and_then(|i| pairs[i].1.canonical().map(|c| (i, c)));
    if let Some((i, canon)) = tissue {
        if looks_like_disease(&canon) && is_absent(&pairs, "disease") {
            pairs.retain(|(n, _)| n != "disease");
            let i = pairs.iter().position(|(n, _)| n == "tissue").unwrap_or(i);
            pairs[i] = ("disease".into(), FieldValue::new(&canon));
        }
    }

    let mut out: Vec<(String, String)> = pairs
        .into_iter()
        .map(|(name, value)| {
            let is_term = dictionary
                .get(&name)
                .is_some_and(|e| e.value_format.contains("{term}"));
            let text = match value.canonical() {
                Some(canon) if is_term && name != "disease" => strip_qualifiers(&canon),
                _ => value_string(&value),
            };
            (name, text)
        })
        .collect();
    for entry in dictionary.entries() {
        if !out.iter().any(|(n, _)| n == &entry.field_name) {
            out.push((entry.field_name.clone(), MISSING_MARKER.into()));
        }
    }
    out
}

fn branch_term(label: TissueLabel) -> Option<&'static str> {
    match label {
        TissueLabel::Lung => Some("lung"),
        TissueLabel::Liver => Some("liver"),
        TissueLabel::Ovary => Some("ovary"),
        TissueLabel::Blood => Some("blood"),
        TissueLabel::Plasma => Some("blood plasma"),
        TissueLabel::Lymph => Some("lymph node"),
        TissueLabel::Unknown => None,
    }
}

fn normalize_disease(canon: &str, terms: Option<&[String]>) -> String {
    let terms = terms.unwrap_or(&[]);
    if terms.iter().any(|t| t == canon) {
        return canon.to_string();
    }
    DISEASE_SYNONYMS
        .iter()
        .find(|(k, t)| canon.split(' ').any(|w| w == *k) && terms.iter().any(|term| term == t))
        .map(|(_, t)| t.to_string())
        .unwrap_or_else(|| canon.to_string())
}

pub(crate) fn apply_template(record: &MetadataRecord, template: &MetadataTemplate) -> Vec<(String, String)> {
    let mut values = first_pairs(record);
    let set = |values: &mut Vec<(String, FieldValue)>, name: &str, value: FieldValue| {
        match values.iter_mut().find(|(n, _)| n == name) {
            Some(slot) => slot.1 = value,
            None => values.push((name.to_string(), value)),
        }
    };

    let tissue_terms = template.field("tissue").and_then(|f| f.constraint.terms());
    let disease_terms = template.field("disease").and_then(|f| f.constraint.terms());
    let tissue = values
        .iter()
        .find(|(n, _)| n == "tissue")
        .and_then(|(_, v)| v.canonical());
    if let (Some(canon), Some(branch)) = (tissue, tissue_terms) {
        let in_branch = |t: &str| branch.iter().any(|b| b == t);
        if !in_branch(&canon) {
            let is_disease = looks_like_disease(&canon)
                || disease_terms.is_some_and(|d| d.iter().any(|t| t == &canon));
            if is_disease && is_absent(&values, "disease") {
                set(&mut values, "disease", FieldValue::new(&normalize_disease(&canon, disease_terms)));
            }
            let stripped = strip_qualifiers(&canon);
            let mapped = if in_branch(&stripped) {
                Some(stripped)
            } else {
                branch_term(label_for_value(&canon))
                    .filter(|t| in_branch(t))
                    .map(str::to_string)
            };
            let new_tissue = match mapped {
                Some(term) => FieldValue::new(&term),
                None if is_disease => FieldValue::Missing,
                None => FieldValue::new(&canon),
            };
            set(&mut values, "tissue", new_tissue);
        }
    }

    let mut out = Vec::with_capacity(template.fields.len() + values.len());
    for field in &template.fields {
        let value = values.iter().find(|(n, _)| n == &field.name).map(|(_, v)| v);
        let text = match (value.and_then(FieldValue::canonical), &field.constraint) {
            (None, _) => MISSING_MARKER.to_string(),
            (Some(canon), FieldConstraint::ValueSet { terms } | FieldConstraint::OntologyBranch { terms, .. })
                if terms.contains(&canon) =>
            {
                canon
            }
            (Some(_), _) if field.name == "disease" => {
                let canon = value.and_then(FieldValue::canonical).unwrap_or_default();
                normalize_disease(&canon, disease_terms)
            }
            (Some(_), _) => value.map(value_string).unwrap_or_default(),
        };
        out.push((field.name.clone(), text));
    }
    for (name, value) in values {
        if template.field(&name).is_none() {
            out.push((name, value_string(&value)));
        }
    }
    out
}
