//! BioSample XML records.
//!
//! Accepts either the repository's `<Attribute attribute_name="..">` elements
//! or an HTML-style attributes table (`<tr><td>name</td><td>value</td></tr>`),
//! plus the top-level descriptors `Title`, `Organism` and description
//! `Paragraph`s. Pairs are emitted in document order.

use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;

use super::{FieldValuePair, MetadataRecord, RecordError, Source};
use crate::digest::sha256_hex;

enum Capture {
    Title,
    Paragraph,
    Organism,
    Attribute(String),
    Cell,
}

struct Parser {
    pairs: Vec<FieldValuePair>,
    id: Option<String>,
    capture: Option<(Capture, usize)>,
    text: String,
    row: Option<Vec<String>>,
    organism_seen: bool,
}

fn malformed(msg: impl Into<String>) -> RecordError {
    RecordError::MalformedRecord(msg.into())
}

fn local_name(e: &BytesStart<'_>) -> String {
    String::from_utf8_lossy(e.local_name().as_ref()).to_ascii_lowercase()
}

fn attribute(e: &BytesStart<'_>, key: &str) -> Result<Option<String>, RecordError> {
    match e.try_get_attribute(key) {
        Ok(Some(attr)) => attr
            .unescape_value()
            .map(|v| Some(v.into_owned()))
            .map_err(|err| malformed(format!("bad attribute `{key}`: {err}"))),
        Ok(None) => Ok(None),
        Err(err) => Err(malformed(format!("bad attribute `{key}`: {err}"))),
    }
}

impl Parser {
    fn push(&mut self, name: &str, value: &str) -> Result<(), RecordError> {
        let pair = FieldValuePair::new(name, value)
            .map_err(|_| malformed(format!("empty field name for value `{value}`")))?;
        self.pairs.push(pair);
        Ok(())
    }

    fn start(&mut self, e: &BytesStart<'_>, depth: usize, empty: bool) -> Result<(), RecordError> {
        let name = local_name(e);
        match name.as_str() {
            "biosample" => {
                if self.id.is_none() {
                    self.id = match attribute(e, "accession")? {
                        Some(acc) => Some(acc),
                        None => attribute(e, "id")?,
                    };
                }
            }
            "title" if self.capture.is_none() => self.begin(Capture::Title, depth),
            "paragraph" if self.capture.is_none() => self.begin(Capture::Paragraph, depth),
            "organism" if !self.organism_seen => {
                self.organism_seen = true;
                match attribute(e, "taxonomy_name")? {
                    Some(taxon) => self.push("organism", &taxon)?,
                    None if !empty => self.begin(Capture::Organism, depth),
                    None => {}
                }
            }
            "attribute" => {
                let attr_name = match attribute(e, "attribute_name")? {
                    Some(n) => n,
                    None => attribute(e, "harmonized_name")?
                        .ok_or_else(|| malformed("<Attribute> without attribute_name"))?,
                };
                if empty {
                    self.push(&attr_name, "")?;
                } else {
                    self.begin(Capture::Attribute(attr_name), depth);
                }
            }
            "tr" => {
                if self.row.is_some() {
                    return Err(malformed("nested table row"));
                }
                self.row = Some(Vec::new());
                if empty {
                    self.end_row()?;
                }
            }
            "td" | "th" => {
                if self.row.is_none() {
                    return Err(malformed("table cell outside a row"));
                }
                if empty {
                    self.row.as_mut().expect("row checked").push(String::new());
                } else {
                    self.begin(Capture::Cell, depth);
                }
            }
            _ => {}
        }
        Ok(())
    }

    fn begin(&mut self, capture: Capture, depth: usize) {
        self.capture = Some((capture, depth));
        self.text.clear();
    }

    fn end(&mut self, name: &str, depth: usize) -> Result<(), RecordError> {
        if let Some((_, start_depth)) = &self.capture {
            if *start_depth == depth {
                let (capture, _) = self.capture.take().expect("capture checked");
                let text = std::mem::take(&mut self.text);
                let text = text.trim();
                match capture {
                    Capture::Title => self.push("title", text)?,
                    Capture::Paragraph => self.push("description", text)?,
                    Capture::Organism => self.push("organism", text)?,
                    Capture::Attribute(attr) => self.push(&attr, text)?,
                    Capture::Cell => self
                        .row
                        .as_mut()
                        .ok_or_else(|| malformed("table cell outside a row"))?
                        .push(text.to_string()),
                }
            }
        }
        if name == "tr" {
            self.end_row()?;
        }
        Ok(())
    }

    fn end_row(&mut self) -> Result<(), RecordError> {
        let cells = self.row.take().unwrap_or_default();
        match cells.as_slice() {
            [] => Ok(()),
            [name, value] => self.push(name, value),
            other => Err(malformed(format!(
                "table row with {} cells, expected name and value",
                other.len()
            ))),
        }
    }
}

/// Parses one BioSample record (a full `<BioSample>` element or a bare
/// attributes block).
pub fn parse_biosample_record(xml_text: &str) -> Result<MetadataRecord, RecordError> {
    let mut reader = Reader::from_str(xml_text);
    let mut parser = Parser {
        pairs: Vec::new(),
        id: None,
        capture: None,
        text: String::new(),
        row: None,
        organism_seen: false,
    };
    let mut stack: Vec<String> = Vec::new();

    loop {
        let event = reader
            .read_event()
            .map_err(|err| malformed(format!("XML error at byte {}: {err}", reader.error_position())))?;
        match event {
            Event::Start(e) => {
                let name = local_name(&e);
                stack.push(name);
                parser.start(&e, stack.len(), false)?;
            }
            Event::Empty(e) => parser.start(&e, stack.len() + 1, true)?,
            Event::End(e) => {
                let name = String::from_utf8_lossy(e.local_name().as_ref()).to_ascii_lowercase();
                let depth = stack.len();
                parser.end(&name, depth)?;
                stack.pop();
            }
            Event::Text(t) => {
                if parser.capture.is_some() {
                    let text = t
                        .unescape()
                        .map_err(|err| malformed(format!("bad text escape: {err}")))?;
                    parser.text.push_str(&text);
                }
            }
            Event::CData(t) => {
                if parser.capture.is_some() {
                    parser.text.push_str(&String::from_utf8_lossy(&t));
                }
            }
            Event::Eof => break,
            _ => {}
        }
    }
    if !stack.is_empty() {
        return Err(malformed(format!("unclosed element <{}>", stack.join("><"))));
    }
    if parser.pairs.is_empty() {
        return Err(malformed("no attribute pairs found"));
    }

    let id = parser
        .id
        .unwrap_or_else(|| format!("biosample-{}", &sha256_hex(xml_text.as_bytes())[..16]));
    let mut record = MetadataRecord::new(id, Source::BioSample, parser.pairs);
    record.raw_text = Some(xml_text.to_string());
    Ok(record)
}
