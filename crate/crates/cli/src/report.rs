use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;

use crate::run::RunResult;

pub const HEADER: &[&str] = &[
    "protocol",
    "strategy",
    "mode",
    "seed",
    "trials",
    "accept_probability",
    "ci_low",
    "ci_high",
    "output_fidelity",
    "certificate_size",
    "message_size",
    "classical_bits_per_edge",
    "quantum_messages",
];

pub fn row(r: &RunResult) -> Vec<String> {
    let (lo, hi) = r.ci();
    let a = &r.accounting;
    vec![
        r.protocol.to_string(),
        r.strategy.to_string(),
        serde_json::to_value(r.mode).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default(),
        r.seed.to_string(),
        r.trials.to_string(),
        r.accept_probability.to_string(),
        lo.to_string(),
        hi.to_string(),
        r.output_fidelity.map(|f| f.to_string()).unwrap_or_default(),
        a.certificate_size.to_string(),
        a.message_size.to_string(),
        a.classical_bits_per_edge.to_string(),
        a.quantum_messages.to_string(),
    ]
}

pub fn csv_string(header: &[String], rows: &[Vec<String>]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

pub fn json_string<T: Serialize>(v: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

pub fn write(dir: &Path, name: &str, text: &str) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn cell(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}
