//! GEO free-text records.
//!
//! Line oriented: `key: value` or `key = value`, split at whichever separator
//! comes first. Lines starting with whitespace continue the previous value.
//! SOFT-style lines are also understood: a leading `!` marks an attribute
//! line (split at `=` only, `Sample_` prefix dropped, `characteristics` values
//! of the form `name: value` expanded into their own pair) and a leading `^`
//! line names the entity and supplies the record id.

use super::{FieldValuePair, MetadataRecord, RecordError, Source};
use crate::digest::sha256_hex;

fn split_pair(line: &str, soft: bool) -> Option<(&str, &str)> {
    let pos = if soft {
        line.find('=')?
    } else {
        line.find([':', '='])?
    };
    Some((&line[..pos], &line[pos + 1..]))
}

fn strip_prefix_ci<'a>(s: &'a str, prefix: &str) -> &'a str {
    match s.get(..prefix.len()) {
        Some(head) if head.eq_ignore_ascii_case(prefix) => &s[prefix.len()..],
        _ => s,
    }
}

pub fn parse_geo_record(text: &str) -> Result<MetadataRecord, RecordError> {
    // (name, value) before canonicalization; values grow with continuation lines
    let mut pairs: Vec<(String, String)> = Vec::new();
    let mut id: Option<String> = None;
    let mut continuing = false;

    for line in text.lines() {
        if line.trim().is_empty() {
            continuing = false;
            continue;
        }
        if line.starts_with([' ', '\t']) {
            if continuing {
                let (_, value) = pairs.last_mut().expect("continuing implies a pair");
                if !value.is_empty() {
                    value.push(' ');
                }
                value.push_str(line.trim());
            }
            continue;
        }

        if let Some(header) = line.strip_prefix('^') {
            if let Some((_, value)) = split_pair(header, true) {
                id.get_or_insert_with(|| value.trim().to_string());
            }
            continuing = false;
            continue;
        }

        let (soft, body) = match line.strip_prefix('!') {
            Some(rest) => (true, rest),
            None => (false, line),
        };
        let Some((key, value)) = split_pair(body, soft) else {
            continuing = false;
            continue;
        };
        let mut key = key.trim();
        let mut value = value.trim();
        if soft {
            key = strip_prefix_ci(key, "sample_");
            if strip_prefix_ci(key, "characteristics") != key {
                if let Some((inner_key, inner_value)) = value.split_once(':') {
                    key = inner_key.trim();
                    value = inner_value.trim();
                }
            }
        }
        if key.is_empty() {
            continuing = false;
            continue;
        }
        if key.eq_ignore_ascii_case("geo_accession") {
            id.get_or_insert_with(|| value.to_string());
        }
        pairs.push((key.to_string(), value.to_string()));
        continuing = true;
    }

    if pairs.is_empty() {
        return Err(RecordError::MalformedRecord("no parseable pairs".into()));
    }
    let fields = pairs
        .iter()
        .map(|(k, v)| FieldValuePair::new(k, v))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| RecordError::MalformedRecord(e.to_string()))?;
    let id = id.unwrap_or_else(|| format!("geo-{}", &sha256_hex(text.as_bytes())[..16]));
    let mut record = MetadataRecord::new(id, Source::Geo, fields);
    record.raw_text = Some(text.to_string());
    Ok(record)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pairs(record: &MetadataRecord) -> Vec<(&str, &str)> {
        record
            .fields
            .iter()
            .map(|p| (p.name.as_str(), p.value.as_str()))
            .collect()
    }

    #[test]
    fn colon_lines_in_order() {
        let record = parse_geo_record("tissue: NSCLC tumor\nage: 54").unwrap();
        assert_eq!(pairs(&record), vec![("tissue", "NSCLC tumor"), ("age", "54")]);
        assert_eq!(record.source, Source::Geo);
    }

    #[test]
    fn empty_input_is_malformed() {
        assert!(matches!(
            parse_geo_record(""),
            Err(RecordError::MalformedRecord(_))
        ));
        assert!(parse_geo_record("just some prose\nwithout separators").is_err());
    }

    #[test]
    fn continuation_lines_append() {
        let record = parse_geo_record("desc: line one\n  continued").unwrap();
        assert_eq!(pairs(&record), vec![("desc", "line one continued")]);
    }

    #[test]
    fn equals_separator_and_earliest_split() {
        let record = parse_geo_record("source name = lung: left lobe\nnote: a=b").unwrap();
        assert_eq!(
            pairs(&record),
            vec![("source name", "lung: left lobe"), ("note", "a=b")]
        );
    }

    #[test]
    fn soft_block() {
        let text = "^SAMPLE = GSM1000001\n\
!Sample_title = NSCLC patient 3\n\
!Sample_geo_accession = GSM1000001\n\
!Sample_characteristics_ch1 = tissue: NSCLC tumor\n\
!Sample_characteristics_ch1 = Sex: male\n\
!Sample_description = RNA from a resected tumour,\n    \
frozen at -80C";
        let record = parse_geo_record(text).unwrap();
        assert_eq!(record.id.as_str(), "GSM1000001");
        assert_eq!(
            pairs(&record),
            vec![
                ("title", "NSCLC patient 3"),
                ("geo_accession", "GSM1000001"),
                ("tissue", "NSCLC tumor"),
                ("sex", "male"),
                ("description", "RNA from a resected tumour, frozen at -80C"),
            ]
        );
    }

    #[test]
    fn id_falls_back_to_content_digest() {
        let a = parse_geo_record("tissue: lung").unwrap();
        let b = parse_geo_record("tissue: lung").unwrap();
        assert_eq!(a.id, b.id);
        assert!(a.id.as_str().starts_with("geo-"));
    }
}
