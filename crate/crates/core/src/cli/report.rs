//! Machine-readable analysis reports.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_complex::Complex64;
use serde::Serialize;
use serde_json::{json, Value};

use super::model_file::InputRecord;
use crate::linalg::{Mat, Tolerances, Vector};

pub const REPORT_VERSION: &str = "1.0";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    /// A verdict sits on its decision threshold.
    Boundary,
}

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub inputs: Vec<InputRecord>,
    pub tool_version: String,
    pub seed: u64,
    pub tolerances: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub schema_version: String,
    pub command: String,
    pub status: Status,
    pub verdicts: BTreeMap<String, bool>,
    pub witnesses: BTreeMap<String, BTreeMap<String, Value>>,
    pub details: BTreeMap<String, Value>,
    pub notes: Vec<String>,
    pub provenance: Provenance,
    #[serde(skip)]
    boundary: bool,
}

impl Report {
    pub fn new(command: &str, inputs: Vec<InputRecord>, seed: u64, tol: &Tolerances) -> Self {
        let tolerances = [
            ("sym", tol.sym_tol),
            ("psd", tol.psd_tol),
            ("eq", tol.eq_tol),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
        Self {
            schema_version: REPORT_VERSION.into(),
            command: command.into(),
            status: Status::Pass,
            verdicts: BTreeMap::new(),
            witnesses: BTreeMap::new(),
            details: BTreeMap::new(),
            notes: Vec::new(),
            provenance: Provenance {
                inputs,
                tool_version: env!("CARGO_PKG_VERSION").into(),
                seed,
                tolerances,
            },
            boundary: false,
        }
    }

    /// Records a verdict with its witnesses. At least one witness is required.
    pub fn verdict<'a>(
        &mut self,
        name: &str,
        holds: bool,
        witnesses: impl IntoIterator<Item = (&'a str, Value)>,
    ) {
        let w: BTreeMap<String, Value> = witnesses
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect();
        assert!(!w.is_empty(), "verdict `{name}` needs a witness");
        self.verdicts.insert(name.into(), holds);
        self.witnesses.insert(name.into(), w);
        self.refresh();
    }

    pub fn detail(&mut self, name: &str, value: Value) {
        self.details.insert(name.into(), value);
    }

    pub fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }

    pub fn mark_boundary(&mut self) {
        self.boundary = true;
        self.refresh();
    }

    fn refresh(&mut self) {
        self.status = if self.boundary {
            Status::Boundary
        } else if self.verdicts.values().all(|&v| v) {
            Status::Pass
        } else {
            Status::Fail
        };
    }

    pub fn exit_code(&self) -> u8 {
        match self.status {
            Status::Pass => 0,
            Status::Fail | Status::Boundary => 1,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports serialize");
        s.push('\n');
        s
    }

    pub fn to_text(&self) -> String {
        let status = match self.status {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Boundary => "BOUNDARY",
        };
        let mut out = format!("iohd {}: {status}\n", self.command);
        for (name, holds) in &self.verdicts {
            let witnesses: Vec<String> = self.witnesses[name]
                .iter()
                .map(|(k, v)| format!("{k} = {}", compact(v)))
                .collect();
            let _ = writeln!(out, "  {name}: {holds}  ({})", witnesses.join(", "));
        }
        for (name, value) in &self.details {
            let _ = writeln!(out, "  {name}: {}", compact(value));
        }
        for note in &self.notes {
            let _ = writeln!(out, "  note: {note}");
        }
        out
    }
}

fn compact(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// JSON number, or `null` when not finite.
pub fn num(x: f64) -> Value {
    serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
}

pub fn mat(m: &Mat) -> Value {
    Value::Array(
        m.row_iter()
            .map(|r| Value::Array(r.iter().map(|&x| num(x)).collect()))
            .collect(),
    )
}

pub fn vector(v: &Vector) -> Value {
    Value::Array(v.iter().map(|&x| num(x)).collect())
}

pub fn complex(z: Complex64) -> Value {
    json!({ "re": num(z.re), "im": num(z.im) })
}
