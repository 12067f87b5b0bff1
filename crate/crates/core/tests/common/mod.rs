#![allow(dead_code)]

use std::path::PathBuf;
use std::process::Command;

use serde_json::Value;

pub fn fixture(name: &str) -> String {
    let path: PathBuf = [env!("CARGO_MANIFEST_DIR"), "fixtures", name]
        .iter()
        .collect();
    path.to_string_lossy().into_owned()
}

pub struct Run {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn iohd(args: &[&str]) -> Run {
    iohd_env(args, &[])
}

pub fn iohd_env(args: &[&str], env: &[(&str, &str)]) -> Run {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_iohd"));
    cmd.args(args);
    for var in ["IOHD_TOL_SYM", "IOHD_TOL_PSD", "IOHD_TOL_EQ"] {
        cmd.env_remove(var);
    }
    for (k, v) in env {
        cmd.env(k, v);
    }
    let out = cmd.output().expect("binary runs");
    Run {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8(out.stdout).expect("utf-8 stdout"),
        stderr: String::from_utf8(out.stderr).expect("utf-8 stderr"),
    }
}

fn load_schema(name: &str) -> Value {
    let path: PathBuf = [env!("CARGO_MANIFEST_DIR"), "schema", name]
        .iter()
        .collect();
    serde_json::from_str(&std::fs::read_to_string(path).expect("schema file"))
        .expect("schema parses")
}

/// Validation errors of `instance` against a shipped schema; empty when valid.
pub fn schema_errors(schema: &str, instance: &Value) -> Vec<String> {
    let validator = jsonschema::validator_for(&load_schema(schema)).expect("schema compiles");
    validator
        .iter_errors(instance)
        .map(|e| e.to_string())
        .collect()
}

/// Structural rules the schema cannot express: every verdict has a witness entry.
pub fn witness_gaps(report: &Value) -> Vec<String> {
    let verdicts = report["verdicts"].as_object().cloned().unwrap_or_default();
    verdicts
        .keys()
        .filter(|k| {
            report["witnesses"][k.as_str()]
                .as_object()
                .is_none_or(|w| w.is_empty())
        })
        .cloned()
        .collect()
}
