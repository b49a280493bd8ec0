use std::io::Write;
use std::path::Path;

use clvr_core::merge::{decode, encode, TensorMap};
use serde::de::DeserializeOwned;

use crate::error::CliError;
use crate::report::Inputs;

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::new("io", format!("{}: {e}", path.display()))
}

pub fn read_bytes(path: &Path, label: &str, inputs: &mut Inputs) -> Result<Vec<u8>, CliError> {
    let bytes = std::fs::read(path).map_err(|e| io_err(path, e))?;
    inputs.record(label, &bytes);
    Ok(bytes)
}

pub fn read_text(path: &Path, label: &str, inputs: &mut Inputs) -> Result<String, CliError> {
    let bytes = read_bytes(path, label, inputs)?;
    String::from_utf8(bytes).map_err(|_| CliError::new("format", format!("{}: not UTF-8", path.display())))
}

/// `-` writes to stdout.
pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if path == Path::new("-") {
        let mut out = std::io::stdout().lock();
        return out.write_all(bytes).map_err(|e| io_err(path, e));
    }
    std::fs::write(path, bytes).map_err(|e| io_err(path, e))
}

/// TOML unless the file name ends in `.json`.
pub fn read_config<T: DeserializeOwned>(path: &Path, inputs: &mut Inputs) -> Result<T, CliError> {
    let text = read_text(path, "config", inputs)?;
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    let parsed = if is_json {
        serde_json::from_str(&text).map_err(|e| e.to_string())
    } else {
        toml::from_str(&text).map_err(|e| e.to_string())
    };
    parsed.map_err(|e| CliError::new("config", format!("{}: {e}", path.display())))
}

pub fn load_config_or_default<T: DeserializeOwned + Default>(
    path: Option<&Path>,
    inputs: &mut Inputs,
) -> Result<T, CliError> {
    match path {
        Some(p) => read_config(p, inputs),
        None => Ok(T::default()),
    }
}

pub fn read_checkpoint(path: &Path, label: &str, inputs: &mut Inputs) -> Result<TensorMap, CliError> {
    let bytes = read_bytes(path, label, inputs)?;
    decode(&bytes).map_err(|e| CliError::new("merge", format!("{}: {e}", path.display())))
}

pub fn write_checkpoint(path: &Path, map: &TensorMap) -> Result<(), CliError> {
    write_bytes(path, &encode(map))
}
