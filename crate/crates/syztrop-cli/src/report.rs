use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Timing {
    pub elapsed_ms: f64,
}

/// Machine-readable outcome of one command. Everything except `timing` is a
/// function of the inputs and the seed.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub command: String,
    pub inputs_digest: String,
    pub passed: bool,
    pub checks: Vec<Check>,
    pub counts: BTreeMap<String, usize>,
    pub branches: BTreeMap<String, usize>,
    pub data: Value,
    pub timing: Timing,
}

impl RunReport {
    pub fn new(command: &str, inputs: &Value) -> Self {
        RunReport {
            command: command.to_string(),
            inputs_digest: digest(inputs),
            passed: true,
            checks: Vec::new(),
            counts: BTreeMap::new(),
            branches: BTreeMap::new(),
            data: Value::Null,
            timing: Timing { elapsed_ms: 0.0 },
        }
    }

    pub fn check(&mut self, name: &str, passed: bool, detail: impl Into<String>) {
        self.passed &= passed;
        self.checks.push(Check {
            name: name.to_string(),
            passed,
            detail: detail.into(),
        });
    }

    pub fn count(&mut self, name: &str, n: usize) {
        self.counts.insert(name.to_string(), n);
    }
}

/// SHA-256 of the canonical JSON encoding; object keys are sorted by
/// `serde_json`'s default map.
pub fn digest(inputs: &Value) -> String {
    let bytes = serde_json::to_vec(inputs).expect("json values serialize");
    hex::encode(Sha256::digest(bytes))
}
