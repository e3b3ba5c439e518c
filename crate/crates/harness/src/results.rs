use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::config::RunConfig;

/// Major version of the results file layout.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Ok,
    /// At least one repetition had negative compensated energy.
    Anomaly,
    Failed,
}

/// Per-repetition values, in repetition order.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RawSeries {
    pub t_s: Vec<f64>,
    pub e_total_j: Vec<f64>,
    pub e_compensated_j: Vec<f64>,
    pub p_avg_w: Vec<f64>,
    /// Per-domain consumption in µJ, when the executor measured it.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub domains_uj: Vec<Vec<(String, u64)>>,
}

/// Outcome of one configuration. `t_s`, `p_w` and `e_j` are the aggregates:
/// geometric means of execution time and compensated energy, and their
/// ratio. They are present exactly when `status` is `ok`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    #[serde(flatten)]
    pub config: RunConfig,
    pub status: Status,
    pub t_s: Option<f64>,
    pub p_w: Option<f64>,
    pub e_j: Option<f64>,
    pub p_static_w: f64,
    pub raw: RawSeries,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub machine: String,
    pub provider: String,
    pub executor: String,
    pub calibration_s: f64,
    pub p_static_w: f64,
    pub tool_version: String,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
    /// Longest run that cannot hide a double counter wrap, if known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wrap_horizon_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultSet {
    pub schema_version: u32,
    pub metadata: Metadata,
    pub records: Vec<RunRecord>,
}

#[derive(Debug, Error)]
pub enum ResultsError {
    #[error("results file is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported results schema version {0} (this tool reads version {SCHEMA_VERSION})")]
    Version(u64),
    #[error("results file does not match the schema:\n  {}", .0.join("\n  "))]
    Schema(Vec<String>),
}

impl ResultSet {
    /// Pretty-printed JSON with a trailing newline.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("results serialize");
        s.push('\n');
        s
    }

    /// Parses and schema-checks a results file.
    pub fn from_json(text: &str) -> Result<Self, ResultsError> {
        let value: Value = serde_json::from_str(text)?;
        let problems = check_schema(&value);
        if let Some(v) = value.get("schema_version").and_then(Value::as_u64) {
            if v != u64::from(SCHEMA_VERSION) {
                return Err(ResultsError::Version(v));
            }
        }
        if !problems.is_empty() {
            return Err(ResultsError::Schema(problems));
        }
        Ok(serde_json::from_value(value)?)
    }
}

fn expect(problems: &mut Vec<String>, obj: &Value, at: &str, key: &str, ok: fn(&Value) -> bool, what: &str) {
    match obj.get(key) {
        Some(v) if ok(v) => {}
        Some(v) => problems.push(format!("{at}.{key}: expected {what}, found {v}")),
        None => problems.push(format!("{at}.{key}: missing")),
    }
}

fn is_number(v: &Value) -> bool {
    v.is_number()
}

fn is_string(v: &Value) -> bool {
    v.is_string()
}

fn is_uint(v: &Value) -> bool {
    v.is_u64()
}

fn is_number_array(v: &Value) -> bool {
    v.as_array().is_some_and(|a| a.iter().all(Value::is_number))
}

fn is_positive_number(v: &Value) -> bool {
    v.as_f64().is_some_and(|x| x > 0.0)
}

/// Structural validation of a results document. Returns every problem
/// found; an empty list means the document is valid.
pub fn check_schema(doc: &Value) -> Vec<String> {
    let mut p = Vec::new();
    if !doc.is_object() {
        return vec!["$: expected an object".into()];
    }
    expect(&mut p, doc, "$", "schema_version", is_uint, "an unsigned integer");
    let Some(meta) = doc.get("metadata").filter(|m| m.is_object()) else {
        p.push("$.metadata: missing or not an object".into());
        return p;
    };
    for key in ["machine", "provider", "executor", "tool_version"] {
        expect(&mut p, meta, "$.metadata", key, is_string, "a string");
    }
    expect(&mut p, meta, "$.metadata", "calibration_s", is_number, "a number");
    expect(&mut p, meta, "$.metadata", "p_static_w", is_number, "a number");
    expect(&mut p, meta, "$.metadata", "timestamp", is_uint, "an unsigned integer");
    let p_static = meta.get("p_static_w").and_then(Value::as_f64);

    let Some(records) = doc.get("records").and_then(Value::as_array) else {
        p.push("$.records: missing or not an array".into());
        return p;
    };
    for (i, r) in records.iter().enumerate() {
        let at = format!("$.records[{i}]");
        if !r.is_object() {
            p.push(format!("{at}: expected an object"));
            continue;
        }
        for key in ["program", "source", "compiler", "compile_template", "opt_level"] {
            expect(&mut p, r, &at, key, is_string, "a string");
        }
        expect(&mut p, r, &at, "threads", |v| v.as_u64().is_some_and(|t| t >= 1), "an integer ≥ 1");
        expect(&mut p, r, &at, "reps", |v| v.as_u64().is_some_and(|n| (3..=10).contains(&n)), "an integer in [3, 10]");
        expect(&mut p, r, &at, "seed", is_uint, "an unsigned integer");
        expect(
            &mut p,
            r,
            &at,
            "wait_policy",
            |v| matches!(v.as_str(), Some("active" | "passive" | "default")),
            "active, passive or default",
        );
        expect(
            &mut p,
            r,
            &at,
            "schedule",
            |v| matches!(v.as_str(), Some("static" | "dynamic" | "unset")),
            "static, dynamic or unset",
        );
        expect(
            &mut p,
            r,
            &at,
            "status",
            |v| matches!(v.as_str(), Some("ok" | "anomaly" | "failed")),
            "ok, anomaly or failed",
        );
        expect(&mut p, r, &at, "p_static_w", is_number, "a number");
        if let (Some(a), Some(b)) = (r.get("p_static_w").and_then(Value::as_f64), p_static) {
            if a != b {
                p.push(format!("{at}.p_static_w: {a} differs from the calibrated {b}"));
            }
        }
        let ok = r.get("status").and_then(Value::as_str) == Some("ok");
        for key in ["t_s", "p_w", "e_j"] {
            match r.get(key) {
                Some(v) if ok && is_positive_number(v) => {}
                Some(Value::Null) if !ok => {}
                Some(v) if ok => p.push(format!("{at}.{key}: status ok needs a positive number, found {v}")),
                Some(v) => p.push(format!("{at}.{key}: aggregates must be null unless status is ok, found {v}")),
                None => p.push(format!("{at}.{key}: missing")),
            }
        }
        match r.get("raw") {
            Some(raw) if raw.is_object() => {
                let ra = format!("{at}.raw");
                let mut lens = Vec::new();
                for key in ["t_s", "e_total_j", "e_compensated_j", "p_avg_w"] {
                    expect(&mut p, raw, &ra, key, is_number_array, "an array of numbers");
                    lens.push(raw.get(key).and_then(Value::as_array).map_or(0, Vec::len));
                }
                if lens.windows(2).any(|w| w[0] != w[1]) {
                    p.push(format!("{ra}: per-repetition arrays differ in length"));
                }
                let reps = r.get("reps").and_then(Value::as_u64).unwrap_or(0) as usize;
                if ok && lens[0] != reps {
                    p.push(format!("{ra}: {} repetitions recorded, {reps} configured", lens[0]));
                }
            }
            _ => p.push(format!("{at}.raw: missing or not an object")),
        }
    }
    p
}
