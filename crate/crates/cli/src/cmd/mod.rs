pub mod geom;
pub mod prep;
pub mod probe;
pub mod stats;
pub mod synth;
pub mod weights;

use std::path::Path;

use serde::Serialize;

use crate::error::CliError;
use crate::io::write_bytes;

pub fn jsonl<T: Serialize>(items: &[T]) -> Result<Vec<u8>, CliError> {
    let mut out = Vec::new();
    for item in items {
        serde_json::to_writer(&mut out, item)?;
        out.push(b'\n');
    }
    Ok(out)
}

pub fn pretty<T: Serialize>(value: &T) -> Result<String, CliError> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

/// Write to `path` when given; otherwise hand the bytes back for stdout.
pub fn emit(path: Option<&Path>, bytes: Vec<u8>) -> Result<String, CliError> {
    match path {
        Some(p) => write_bytes(p, &bytes).map(|()| String::new()),
        None => String::from_utf8(bytes).map_err(|_| CliError::new("format", "output is not UTF-8")),
    }
}

/// Shortest round-trip form, switching to exponent notation for very small
/// or very large magnitudes.
pub fn num(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && a.is_finite() && !(1e-4..1e15).contains(&a) {
        format!("{v:e}")
    } else {
        v.to_string()
    }
}
