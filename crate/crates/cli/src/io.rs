//! Model files, atomic output and metadata sidecars.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use cmj_core::model::{validate_model, ModelError, ModelSpec, ValidatedModel};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("cannot read {path}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("schema violation at line {line}, column {column}: {message}")]
    Schema { line: usize, column: usize, message: String },
    #[error(transparent)]
    Model(#[from] ModelError),
}

pub fn parse_model(text: &str) -> Result<ModelSpec, LoadError> {
    serde_json::from_str(text).map_err(|e| LoadError::Schema {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

/// Reads and validates a model file.
pub fn load_model(path: &Path) -> Result<ValidatedModel, LoadError> {
    let text = std::fs::read_to_string(path).map_err(|source| LoadError::Io { path: path.into(), source })?;
    Ok(validate_model(&parse_model(&text)?)?)
}

pub fn save_model(spec: &ModelSpec) -> String {
    let mut s = serde_json::to_string_pretty(spec).expect("model specs serialize");
    s.push('\n');
    s
}

/// Writes through a temporary file in the target directory, then renames.
pub fn atomic_write(path: &Path, contents: &[u8]) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

#[derive(Serialize)]
struct Sidecar<'a> {
    payload: String,
    command: &'a [String],
    version: &'static str,
    created_unix_seconds: u64,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".meta.json");
    path.with_file_name(name)
}

/// Payload plus a `<path>.meta.json` sidecar holding the invocation and a timestamp.
pub fn write_output(path: &Path, contents: &[u8], argv: &[String]) -> std::io::Result<()> {
    atomic_write(path, contents)?;
    let meta = Sidecar {
        payload: path.file_name().unwrap_or_default().to_string_lossy().into_owned(),
        command: argv,
        version: env!("CARGO_PKG_VERSION"),
        created_unix_seconds: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
    };
    let mut text = serde_json::to_string_pretty(&meta).expect("sidecar serializes");
    text.push('\n');
    atomic_write(&sidecar_path(path), text.as_bytes())
}
