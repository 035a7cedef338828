//! Line-delimited corpus files.
//!
//! ```text
//! #corpus {"name":"biosample-lung","source":"biosample","cohort":"lung","condition":"baseline","seed":42}
//! {"id":"SAMN1","source":"biosample","cohort":"lung","condition":"baseline","fields":[{"name":"tissue","value":"lung"}]}
//! ```

use serde::{Deserialize, Serialize};

use super::{
    Cohort, Condition, Corpus, CorpusHeader, FieldValuePair, MetadataRecord, RecordError,
    RecordId, Source,
};

const HEADER_PREFIX: &str = "#corpus ";

#[derive(Serialize)]
struct RecordLineOut<'a> {
    id: &'a RecordId,
    source: Source,
    cohort: Cohort,
    condition: Condition,
    fields: &'a [FieldValuePair],
    #[serde(skip_serializing_if = "Option::is_none")]
    raw: Option<&'a str>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RecordLineIn {
    id: Option<RecordId>,
    source: Source,
    cohort: Cohort,
    condition: Condition,
    fields: Vec<FieldValuePair>,
    #[serde(default)]
    raw: Option<String>,
}

pub fn serialize_corpus(corpus: &Corpus) -> String {
    let header = corpus.header();
    let mut out = String::new();
    out.push_str(HEADER_PREFIX);
    out.push_str(&serde_json::to_string(header).expect("header serializes"));
    out.push('\n');
    for record in corpus.records() {
        let line = RecordLineOut {
            id: &record.id,
            source: record.source,
            cohort: header.cohort,
            condition: header.condition,
            fields: &record.fields,
            raw: record.raw_text.as_deref(),
        };
        out.push_str(&serde_json::to_string(&line).expect("record serializes"));
        out.push('\n');
    }
    out
}

fn format_err(line: usize, message: impl Into<String>) -> RecordError {
    RecordError::Format {
        line,
        message: message.into(),
    }
}

pub fn deserialize_corpus(text: &str) -> Result<Corpus, RecordError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| !l.trim().is_empty());

    let (header_line, header_text) = lines
        .next()
        .ok_or_else(|| format_err(1, "empty file, expected a `#corpus` header line"))?;
    let header_json = header_text
        .strip_prefix(HEADER_PREFIX)
        .ok_or_else(|| format_err(header_line, "first line must begin with `#corpus `"))?;
    let header: CorpusHeader = serde_json::from_str(header_json)
        .map_err(|e| format_err(header_line, format!("bad corpus header: {e}")))?;

    let mut records = Vec::new();
    for (n, line) in lines {
        let parsed: RecordLineIn =
            serde_json::from_str(line).map_err(|e| format_err(n, e.to_string()))?;
        let id = parsed.id.ok_or_else(|| format_err(n, "record has no `id`"))?;
        if parsed.cohort != header.cohort || parsed.condition != header.condition {
            return Err(format_err(
                n,
                format!(
                    "record {}/{} does not match corpus {}/{}",
                    parsed.cohort, parsed.condition, header.cohort, header.condition
                ),
            ));
        }
        records.push(MetadataRecord {
            id,
            source: parsed.source,
            fields: parsed.fields,
            raw_text: parsed.raw,
        });
    }
    Corpus::new(header, records).map_err(|e| match e {
        RecordError::Format { .. } => e,
        other => format_err(0, other.to_string()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn header() -> CorpusHeader {
        CorpusHeader {
            name: "biosample-lung".into(),
            source: Source::BioSample,
            cohort: Cohort::Lung,
            condition: Condition::Baseline,
            seed: Some(42),
        }
    }

    fn sample_corpus() -> Corpus {
        let mut r1 = MetadataRecord::from_pairs(
            "SAMN1",
            Source::BioSample,
            [("tissue", "lung cancer"), ("age", "67")],
        )
        .unwrap();
        r1.raw_text = Some("<tr><td>tissue</td><td>lung cancer</td></tr>".into());
        let r2 =
            MetadataRecord::from_pairs("SAMN2", Source::BioSample, [("tissue", "NA")]).unwrap();
        let r3 = MetadataRecord::from_pairs(
            "SAMN3",
            Source::BioSample,
            [("sex", "female"), ("tissue", "PBMC"), ("tissue", "blood")],
        )
        .unwrap();
        Corpus::new(header(), vec![r1, r2, r3]).unwrap()
    }

    #[test]
    fn three_records_round_trip() {
        let corpus = sample_corpus();
        let text = serialize_corpus(&corpus);
        assert_eq!(text.lines().count(), 4);
        assert!(text.starts_with("#corpus "));
        assert_eq!(deserialize_corpus(&text).unwrap(), corpus);
    }

    #[test]
    fn empty_corpus_is_header_only() {
        let corpus = Corpus::new(header(), vec![]).unwrap();
        let text = serialize_corpus(&corpus);
        assert_eq!(text.lines().count(), 1);
        assert_eq!(deserialize_corpus(&text).unwrap(), corpus);
    }

    #[test]
    fn missing_id_reports_line() {
        let text = concat!(
            "#corpus {\"name\":\"c\",\"source\":\"geo\",\"cohort\":\"lung\",\"condition\":\"baseline\"}\n",
            "{\"id\":\"a\",\"source\":\"geo\",\"cohort\":\"lung\",\"condition\":\"baseline\",\"fields\":[]}\n",
            "{\"source\":\"geo\",\"cohort\":\"lung\",\"condition\":\"baseline\",\"fields\":[]}\n",
        );
        match deserialize_corpus(text) {
            Err(RecordError::Format { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn header_required() {
        assert!(matches!(
            deserialize_corpus("{\"id\":\"a\"}\n"),
            Err(RecordError::Format { line: 1, .. })
        ));
        assert!(deserialize_corpus("").is_err());
    }

    #[test]
    fn mismatched_condition_rejected() {
        let text = concat!(
            "#corpus {\"name\":\"c\",\"source\":\"geo\",\"cohort\":\"lung\",\"condition\":\"baseline\"}\n",
            "{\"id\":\"a\",\"source\":\"geo\",\"cohort\":\"lung\",\"condition\":\"cedar\",\"fields\":[]}\n",
        );
        assert!(matches!(
            deserialize_corpus(text),
            Err(RecordError::Format { line: 2, .. })
        ));
    }

    fn arb_record(source: Source) -> impl Strategy<Value = MetadataRecord> {
        (
            "[A-Za-z0-9]{1,8}",
            prop::collection::vec(("[a-z][a-z ]{0,10}[a-z]", "[ -~]{0,16}"), 0..6),
            prop::option::of("[ -~]{0,30}"),
        )
            .prop_map(move |(id, pairs, raw)| {
                let mut record = MetadataRecord::from_pairs(
                    id,
                    source,
                    pairs.iter().map(|(n, v)| (n.as_str(), v.as_str())),
                )
                .unwrap();
                record.raw_text = raw;
                record
            })
    }

    proptest! {
        #[test]
        fn serialize_deserialize_identity(records in prop::collection::vec(arb_record(Source::Geo), 0..8)) {
            let mut seen = std::collections::HashSet::new();
            let records: Vec<_> = records.into_iter().filter(|r| seen.insert(r.id.clone())).collect();
            let corpus = Corpus::new(
                CorpusHeader {
                    name: "g".into(),
                    source: Source::Geo,
                    cohort: Cohort::Ovarian,
                    condition: Condition::Dd,
                    seed: None,
                },
                records,
            ).unwrap();
            let back = deserialize_corpus(&serialize_corpus(&corpus)).unwrap();
            prop_assert_eq!(back, corpus);
        }
    }
}
