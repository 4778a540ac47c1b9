//! Reading inputs and writing artifacts. Outputs go to a temporary file in
//! the destination directory and are renamed into place, so a failed run
//! never leaves a truncated file behind.

use std::io::Write;
use std::path::Path;

use hetalloc::model::{Platform, SystemModel};
use serde::de::DeserializeOwned;

use crate::error::CliError;

pub fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn parse_error(path: &Path, e: serde_json::Error) -> CliError {
    CliError::Parse { path: path.to_path_buf(), line: e.line(), column: e.column(), message: e.to_string() }
}

pub fn parse_json<T: DeserializeOwned>(path: &Path, text: &str) -> Result<T, CliError> {
    serde_json::from_str(text).map_err(|e| parse_error(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    parse_json(path, &read_text(path)?)
}

/// A platform file holds either a bare platform or a whole model file.
pub fn read_platform(path: &Path) -> Result<Platform, CliError> {
    let text = read_text(path)?;
    let value: serde_json::Value = parse_json(path, &text)?;
    if value.get("platform").is_some() {
        Ok(parse_json::<SystemModel>(path, &text)?.platform)
    } else {
        parse_json(path, &text)
    }
}

pub fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(path, e))?;
    tmp.write_all(contents.as_bytes()).map_err(|e| CliError::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| CliError::io(path, e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}

pub fn to_pretty_json<T: serde::Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("artifact serialization is infallible");
    s.push('\n');
    s
}
