//! Side-by-side record versions with per-field differences.

use std::collections::BTreeMap;

use fairmeta_core::record::{Condition, FieldValue, FieldValuePair, MetadataRecord, RecordId, Source};
use fairmeta_core::schema::ValidationResult;
use fairmeta_core::standardizer::Guidance;
use serde::Serialize;

#[derive(Debug, Serialize)]
pub struct RecordVersion<'a> {
    pub source: Source,
    pub fields: &'a [FieldValuePair],
}

#[derive(Debug, Serialize)]
pub struct FieldDiff {
    pub field_name: String,
    /// First value per condition; `None` when the field is absent.
    pub values: BTreeMap<Condition, Option<String>>,
    pub changed: bool,
    pub validation: BTreeMap<Condition, ValidationResult>,
}

#[derive(Debug, Serialize)]
pub struct PairedRecordView<'a> {
    pub id: &'a RecordId,
    pub versions: BTreeMap<Condition, RecordVersion<'a>>,
    pub field_diffs: Vec<FieldDiff>,
}

/// Compares the given versions field by field. An absent field and an `NA`
/// value count as the same (missing) value.
pub fn paired_view<'a>(
    id: &'a RecordId,
    source: Source,
    versions: &[(Condition, &'a MetadataRecord)],
) -> PairedRecordView<'a> {
    let template = Guidance::bundled(source).template;
    let mut names: Vec<&str> = Vec::new();
    for (_, record) in versions {
        for pair in &record.fields {
            if !names.contains(&pair.name.as_str()) {
                names.push(&pair.name);
            }
        }
    }
    let field_diffs = names
        .into_iter()
        .map(|name| {
            let mut values = BTreeMap::new();
            let mut validation = BTreeMap::new();
            let mut canon: Vec<Option<String>> = Vec::with_capacity(versions.len());
            for (condition, record) in versions {
                let value = record.lookup(name);
                values.insert(*condition, value.map(|v| v.as_str().to_string()));
                canon.push(value.and_then(FieldValue::canonical));
                let checked = value.cloned().unwrap_or(FieldValue::Missing);
                validation.insert(*condition, template.validate_field_value(name, &checked));
            }
            FieldDiff {
                field_name: name.to_string(),
                values,
                changed: canon.windows(2).any(|w| w[0] != w[1]),
                validation,
            }
        })
        .collect();
    PairedRecordView {
        id,
        versions: versions
            .iter()
            .map(|(c, r)| {
                (
                    *c,
                    RecordVersion {
                        source: r.source,
                        fields: &r.fields,
                    },
                )
            })
            .collect(),
        field_diffs,
    }
}
