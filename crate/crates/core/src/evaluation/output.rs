//! Serialization of reports with every real number written to ten decimals.

use serde::ser::Error as _;
use serde::{Serialize, Serializer};
use serde_json::value::RawValue;

use super::EvaluationReport;

pub fn format_real(x: f64) -> String {
    let s = format!("{x:.10}");
    if s.starts_with('-') && s[1..].bytes().all(|b| b == b'0' || b == b'.') {
        s[1..].to_string()
    } else {
        s
    }
}

pub(super) fn fixed<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
    if !x.is_finite() {
        return Err(S::Error::custom(format!("non-finite value {x}")));
    }
    let raw = RawValue::from_string(format_real(*x)).map_err(S::Error::custom)?;
    raw.serialize(s)
}

pub(super) fn fixed_opt<S: Serializer>(x: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
    match x {
        Some(v) => fixed(v, s),
        None => s.serialize_none(),
    }
}

/// Pretty-printed JSON with a trailing newline.
pub fn render_report_json(report: &EvaluationReport) -> serde_json::Result<String> {
    let mut out = serde_json::to_string_pretty(report)?;
    out.push('\n');
    Ok(out)
}

fn write_csv(header: &[&str], rows: Vec<Vec<String>>) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(header).expect("in-memory write");
    for row in rows {
        writer.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(writer.into_inner().expect("in-memory flush")).expect("utf-8 csv")
}

pub fn render_cells_csv(report: &EvaluationReport) -> String {
    let rows = report
        .cells
        .iter()
        .map(|c| {
            vec![
                c.source.to_string(),
                c.cohort.to_string(),
                c.condition.to_string(),
                c.query.clone(),
                c.relevant.to_string(),
                c.retrieved.to_string(),
                c.counts.tp.to_string(),
                c.counts.fp.to_string(),
                c.counts.fn_.to_string(),
                format_real(c.metrics.precision),
                format_real(c.metrics.recall),
                format_real(c.metrics.f1),
            ]
        })
        .collect();
    write_csv(
        &[
            "source", "cohort", "condition", "query", "relevant", "retrieved", "tp", "fp", "fn",
            "precision", "recall", "f1",
        ],
        rows,
    )
}

/// One row per source and condition plus `all` rows for the overall figures.
pub fn render_plot_csv(report: &EvaluationReport) -> String {
    let mut rows: Vec<Vec<String>> = report
        .by_source
        .iter()
        .map(|s| {
            vec![
                s.source.to_string(),
                s.condition.to_string(),
                format_real(s.metrics.precision),
                format_real(s.metrics.recall),
                format_real(s.metrics.f1),
            ]
        })
        .collect();
    rows.extend(report.overall.iter().map(|s| {
        vec![
            "all".to_string(),
            s.condition.to_string(),
            format_real(s.metrics.precision),
            format_real(s.metrics.recall),
            format_real(s.metrics.f1),
        ]
    }));
    write_csv(&["source", "condition", "precision", "recall", "f1"], rows)
}
