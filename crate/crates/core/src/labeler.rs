//! Keyword rules that assign each record an approximate gold-standard tissue
//! label from its `tissue` field.
//!
//! Rules are checked in order and the first hit wins. Matching is
//! case-insensitive substring matching on the canonical value, so `PBMCs`
//! and `lung-tumor` still match. Only the canonical `tissue` field is read;
//! descriptions and other fields are never consulted.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::record::{canonical_text, Corpus, MetadataRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TissueLabel {
    Lung,
    Liver,
    Ovary,
    Blood,
    Plasma,
    Lymph,
    Unknown,
}

/// Ordered rules: keywords and the label they assign.
pub const LABEL_RULES: &[(&[&str], TissueLabel)] = &[
    (&["lung"], TissueLabel::Lung),
    (&["liver", "hcc"], TissueLabel::Liver),
    (&["ovary", "ovarian"], TissueLabel::Ovary),
    (&["pbmc", "blood"], TissueLabel::Blood),
    (&["plasma"], TissueLabel::Plasma),
    (&["lymph"], TissueLabel::Lymph),
];

impl TissueLabel {
    pub const ALL: [TissueLabel; 7] = [
        TissueLabel::Lung,
        TissueLabel::Liver,
        TissueLabel::Ovary,
        TissueLabel::Blood,
        TissueLabel::Plasma,
        TissueLabel::Lymph,
        TissueLabel::Unknown,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TissueLabel::Lung => "lung",
            TissueLabel::Liver => "liver",
            TissueLabel::Ovary => "ovary",
            TissueLabel::Blood => "blood",
            TissueLabel::Plasma => "plasma",
            TissueLabel::Lymph => "lymph",
            TissueLabel::Unknown => "unknown",
        }
    }

    /// Inverse of [`label_to_query_value`].
    pub fn from_query_value(value: &str) -> Option<TissueLabel> {
        let canon = canonical_text(value);
        TissueLabel::ALL
            .into_iter()
            .find(|label| label_to_query_value(*label) == Some(canon.as_str()))
    }
}

impl fmt::Display for TissueLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TissueLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let canon = canonical_text(s);
        TissueLabel::ALL
            .into_iter()
            .find(|l| l.as_str() == canon)
            .ok_or_else(|| format!("unknown tissue label `{s}`"))
    }
}

/// Label for a raw tissue value.
pub fn label_for_value(value: &str) -> TissueLabel {
    let canon = canonical_text(value);
    LABEL_RULES
        .iter()
        .find(|(keywords, _)| keywords.iter().any(|k| canon.contains(k)))
        .map(|(_, label)| *label)
        .unwrap_or(TissueLabel::Unknown)
}

pub fn assign_tissue_label(record: &MetadataRecord) -> TissueLabel {
    match record.lookup("tissue").and_then(|v| v.text()) {
        Some(value) => label_for_value(value),
        None => TissueLabel::Unknown,
    }
}

/// Query value for labels that are retrieval targets.
pub fn label_to_query_value(label: TissueLabel) -> Option<&'static str> {
    match label {
        TissueLabel::Lung => Some("lung"),
        TissueLabel::Liver => Some("liver"),
        TissueLabel::Ovary => Some("ovary"),
        TissueLabel::Blood => Some("blood"),
        TissueLabel::Plasma | TissueLabel::Lymph | TissueLabel::Unknown => None,
    }
}

/// `id<TAB>label` lines in corpus order.
pub fn render_labels(corpus: &Corpus) -> String {
    let mut out = String::new();
    for record in corpus.records() {
        out.push_str(record.id.as_str());
        out.push('\t');
        out.push_str(assign_tissue_label(record).as_str());
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::record::Source;

    fn with_tissue(value: &str) -> MetadataRecord {
        MetadataRecord::from_pairs("r", Source::BioSample, [("tissue", value)]).unwrap()
    }

    #[test]
    fn table_examples() {
        assert_eq!(assign_tissue_label(&with_tissue("lung cancer")), TissueLabel::Lung);
        assert_eq!(assign_tissue_label(&with_tissue("HCC sample")), TissueLabel::Liver);
        assert_eq!(assign_tissue_label(&with_tissue("PBMC")), TissueLabel::Blood);
        assert_eq!(
            assign_tissue_label(&with_tissue("plasma of lung patient")),
            TissueLabel::Lung
        );
        assert_eq!(assign_tissue_label(&with_tissue("ovarian tissue")), TissueLabel::Ovary);
        assert_eq!(assign_tissue_label(&with_tissue("Lymph node")), TissueLabel::Lymph);
        assert_eq!(assign_tissue_label(&with_tissue("bone marrow")), TissueLabel::Unknown);
    }

    #[test]
    fn absent_or_missing_tissue_is_unknown() {
        let none = MetadataRecord::from_pairs("r", Source::Geo, [("sex", "male")]).unwrap();
        assert_eq!(assign_tissue_label(&none), TissueLabel::Unknown);
        assert_eq!(assign_tissue_label(&with_tissue("NA")), TissueLabel::Unknown);
    }

    #[test]
    fn description_is_not_consulted() {
        let record = MetadataRecord::from_pairs(
            "r",
            Source::Geo,
            [("description", "liver biopsy"), ("tissue", "tumor")],
        )
        .unwrap();
        assert_eq!(assign_tissue_label(&record), TissueLabel::Unknown);
    }

    #[test]
    fn synonym_field_names_are_read() {
        let record =
            MetadataRecord::from_pairs("r", Source::BioSample, [("Tissue Type", "Whole Blood")]).unwrap();
        assert_eq!(assign_tissue_label(&record), TissueLabel::Blood);
    }

    #[test]
    fn query_values() {
        assert_eq!(label_to_query_value(TissueLabel::Ovary), Some("ovary"));
        assert_eq!(label_to_query_value(TissueLabel::Plasma), None);
        assert_eq!(label_to_query_value(TissueLabel::Unknown), None);
        for label in TissueLabel::ALL {
            if let Some(q) = label_to_query_value(label) {
                assert_eq!(TissueLabel::from_query_value(q), Some(label));
            }
        }
        assert_eq!(TissueLabel::from_query_value("plasma"), None);
    }

    #[test]
    fn labels_file_lines() {
        let corpus = Corpus::new(
            crate::record::CorpusHeader {
                name: "c".into(),
                source: Source::BioSample,
                cohort: crate::record::Cohort::Lung,
                condition: crate::record::Condition::Baseline,
                seed: None,
            },
            vec![
                MetadataRecord::from_pairs("a", Source::BioSample, [("tissue", "lung")]).unwrap(),
                MetadataRecord::from_pairs("b", Source::BioSample, [("sex", "male")]).unwrap(),
            ],
        )
        .unwrap();
        assert_eq!(render_labels(&corpus), "a\tlung\nb\tunknown\n");
    }
}
