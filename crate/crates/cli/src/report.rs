use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use crate::error::CliError;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Serialize)]
pub struct Report<'a> {
    pub tool_version: &'a str,
    pub command: &'a str,
    pub inputs_digest: String,
    pub results: &'a Value,
}

/// Running digest over everything a command read: file contents and the
/// parameters that shaped the result.
pub struct Inputs {
    hasher: blake3::Hasher,
}

impl Inputs {
    pub fn new(command: &str) -> Self {
        let mut hasher = blake3::Hasher::new();
        hasher.update(TOOL_VERSION.as_bytes());
        let mut inputs = Inputs { hasher };
        inputs.record("command", command.as_bytes());
        inputs
    }

    /// Length-prefixed so that adjacent fields cannot alias.
    pub fn record(&mut self, label: &str, bytes: &[u8]) {
        for part in [label.as_bytes(), bytes] {
            self.hasher.update(&(part.len() as u64).to_le_bytes());
            self.hasher.update(part);
        }
    }

    pub fn param(&mut self, label: &str, value: impl Serialize) {
        let json = serde_json::to_vec(&value).expect("parameters serialize");
        self.record(label, &json);
    }

    pub fn digest(&self) -> String {
        self.hasher.finalize().to_hex().to_string()
    }
}

pub fn write_report(path: &Path, command: &str, inputs: &Inputs, results: &Value) -> Result<(), CliError> {
    let report = Report { tool_version: TOOL_VERSION, command, inputs_digest: inputs.digest(), results };
    let mut bytes = serde_json::to_vec_pretty(&report)?;
    bytes.push(b'\n');
    crate::io::write_bytes(path, &bytes)
}
