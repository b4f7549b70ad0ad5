//! Reports: named checks with pass/fail status, result payloads, CSV
//! tables, `report.json` and the aligned-column text summary.

use std::io::Write;
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Map, Value};

use super::config::Resolved;
use crate::error::Result;

/// Outcome of one check.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    /// Not applicable to this system or potential.
    Skipped,
}

impl Status {
    fn label(self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::Fail => "FAIL",
            Status::Skipped => "skipped",
        }
    }
}

/// One named check.
#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    /// The property being verified, as a formula.
    pub property: String,
    pub status: Status,
    pub value: f64,
    pub tolerance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Check {
    /// Passes when `value ≤ tolerance` (and `value` is a number).
    pub fn at_most(name: &str, property: &str, value: f64, tolerance: f64) -> Self {
        let status = if value <= tolerance {
            Status::Pass
        } else {
            Status::Fail
        };
        Self {
            name: name.into(),
            property: property.into(),
            status,
            value,
            tolerance,
            note: None,
        }
    }

    /// A boolean property; `value` is reported as 1 or 0.
    pub fn holds(name: &str, property: &str, ok: bool) -> Self {
        Self {
            name: name.into(),
            property: property.into(),
            status: if ok { Status::Pass } else { Status::Fail },
            value: if ok { 1.0 } else { 0.0 },
            tolerance: 1.0,
            note: None,
        }
    }

    pub fn skipped(name: &str, property: &str, reason: String) -> Self {
        Self {
            name: name.into(),
            property: property.into(),
            status: Status::Skipped,
            value: f64::NAN,
            tolerance: f64::NAN,
            note: Some(reason),
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }
}

/// A CSV table to be written next to the report.
#[derive(Clone, Debug)]
pub struct Table {
    pub file: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(file: &str, header: &[&str]) -> Self {
        Self {
            file: file.into(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push<I: IntoIterator<Item = String>>(&mut self, row: I) {
        self.rows.push(row.into_iter().collect());
    }

    fn write(&self, dir: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(dir.join(&self.file))?;
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Everything a command produces.
#[derive(Clone, Debug, Default)]
pub struct Outcome {
    pub results: Map<String, Value>,
    pub checks: Vec<Check>,
    pub tables: Vec<Table>,
}

impl Outcome {
    pub fn result<T: Serialize>(&mut self, key: &str, value: &T) -> Result<()> {
        self.results
            .insert(key.into(), serde_json::to_value(value)?);
        Ok(())
    }

    pub fn failed(&self) -> bool {
        self.checks.iter().any(|c| c.status == Status::Fail)
    }
}

/// Non-finite numbers become `null` in JSON.
fn finite(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else {
        Value::Null
    }
}

/// The `report.json` document.  It holds no timestamps, so identical inputs
/// give identical bytes.
pub fn report_json(command: &str, resolved: &Resolved, outcome: &Outcome) -> Result<Value> {
    let checks: Vec<Value> = outcome
        .checks
        .iter()
        .map(|c| {
            let mut v = json!({
                "name": c.name,
                "property": c.property,
                "status": c.status,
                "value": finite(c.value),
                "tolerance": finite(c.tolerance),
            });
            if let Some(n) = &c.note {
                v["note"] = json!(n);
            }
            v
        })
        .collect();
    Ok(json!({
        "command": command,
        "tool": { "name": env!("CARGO_PKG_NAME"), "version": env!("CARGO_PKG_VERSION") },
        "input_hash": format!("sha256:{}", resolved.input_hash),
        "config": serde_json::to_value(&resolved.config)?,
        "status": if outcome.failed() { "fail" } else { "pass" },
        "checks": checks,
        "results": Value::Object(outcome.results.clone()),
    }))
}

/// Writes `report.json` and every table into the output directory.
pub fn write_outputs(
    dir: &Path,
    command: &str,
    resolved: &Resolved,
    outcome: &Outcome,
) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let doc = report_json(command, resolved, outcome)?;
    let mut f = std::fs::File::create(dir.join("report.json"))?;
    serde_json::to_writer_pretty(&mut f, &doc)?;
    f.write_all(b"\n")?;
    for t in &outcome.tables {
        t.write(dir)?;
    }
    Ok(())
}

/// Aligned-column summary of the checks.
pub fn summary_text(command: &str, resolved: &Resolved, outcome: &Outcome) -> String {
    let mut s = format!(
        "{command} — {} (profile {:?}, seed {})\n",
        if resolved.config.name.is_empty() {
            "unnamed config"
        } else {
            &resolved.config.name
        },
        resolved.config.tolerance_profile,
        resolved.config.seed
    );
    let w = outcome
        .checks
        .iter()
        .map(|c| c.name.len())
        .max()
        .unwrap_or(5)
        .max(5);
    s += &format!(
        "  {:<w$}  {:>7}  {:>12}  {:>10}\n",
        "check", "status", "value", "tolerance"
    );
    for c in &outcome.checks {
        s += &format!(
            "  {:<w$}  {:>7}  {:>12.4e}  {:>10.1e}",
            c.name,
            c.status.label(),
            c.value,
            c.tolerance
        );
        if let Some(n) = &c.note {
            s += &format!("  ({n})");
        }
        s.push('\n');
    }
    s += &format!(
        "  overall: {}\n",
        if outcome.failed() { "FAIL" } else { "pass" }
    );
    s
}
