use std::fmt::Write;
use std::str::FromStr;

use thiserror::Error;

use crate::config::Selector;
use crate::results::{ResultSet, RunRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    TableMarkdown,
    Csv,
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "table-markdown" | "markdown" | "md" => Ok(ReportFormat::TableMarkdown),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(format!("unknown report format `{other}` (use table-markdown or csv)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReportError {
    #[error("no records to report")]
    Empty,
    #[error("baseline `{0}` matches no record")]
    NoBaseline(String),
    #[error("baseline `{selector}` matches {count} records; add fields to make it unique")]
    AmbiguousBaseline { selector: String, count: usize },
    #[error("baseline `{0}` has no aggregates (status is not ok)")]
    BaselineNotOk(String),
}

const KEYS: [&str; 7] = ["program", "compiler", "threads", "wait_policy", "schedule", "reps", "status"];

fn aggregates(r: &RunRecord) -> Option<[f64; 3]> {
    Some([r.t_s?, r.p_w?, r.e_j?])
}

fn cell(v: Option<f64>, format: ReportFormat) -> String {
    match (v, format) {
        (None, _) => String::new(),
        (Some(x), ReportFormat::Csv) => x.to_string(),
        (Some(x), ReportFormat::TableMarkdown) => format!("{x:.6}"),
    }
}

/// One row per record with absolute `T [s]`, `P [W]`, `E [J]`, and, given a
/// baseline, each value divided by the baseline's.
pub fn emit_report(
    results: &ResultSet,
    format: ReportFormat,
    baseline: Option<&Selector>,
) -> Result<String, ReportError> {
    if results.records.is_empty() {
        return Err(ReportError::Empty);
    }
    let base = match baseline {
        None => None,
        Some(sel) => {
            let hits: Vec<&RunRecord> = results.records.iter().filter(|r| sel.matches(&r.config)).collect();
            match hits.as_slice() {
                [] => return Err(ReportError::NoBaseline(sel.to_string())),
                [one] => Some(aggregates(one).ok_or_else(|| ReportError::BaselineNotOk(sel.to_string()))?),
                many => return Err(ReportError::AmbiguousBaseline { selector: sel.to_string(), count: many.len() }),
            }
        }
    };

    let mut header: Vec<String> = KEYS.iter().map(|k| k.to_string()).collect();
    header.extend(["T [s]", "P [W]", "E [J]"].map(String::from));
    if base.is_some() {
        header.extend(["T rel", "P rel", "E rel"].map(String::from));
    }
    let mut rows = Vec::with_capacity(results.records.len());
    for r in &results.records {
        let mut row: Vec<String> = KEYS
            .iter()
            .map(|k| match *k {
                "status" => {
                    serde_json::to_value(r.status).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default()
                }
                k => r.config.field(k).unwrap_or_default(),
            })
            .collect();
        let abs = aggregates(r);
        for i in 0..3 {
            row.push(cell(abs.map(|a| a[i]), format));
        }
        if let Some(b) = base {
            for i in 0..3 {
                row.push(cell(abs.map(|a| a[i] / b[i]), format));
            }
        }
        rows.push(row);
    }

    let mut out = String::new();
    match format {
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            for line in std::iter::once(&header).chain(&rows) {
                w.write_record(line).expect("writing to memory");
            }
            out = String::from_utf8(w.into_inner().expect("writing to memory")).expect("fields are UTF-8");
        }
        ReportFormat::TableMarkdown => {
            writeln!(out, "| {} |", header.join(" | ")).unwrap();
            writeln!(out, "|{}", "---|".repeat(header.len())).unwrap();
            for row in &rows {
                writeln!(out, "| {} |", row.join(" | ")).unwrap();
            }
        }
    }
    Ok(out)
}
