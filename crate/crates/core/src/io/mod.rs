//! Canonical JSON and archive formats for datasets, plus validation.
//!
//! The canonical JSON layout is fixed: top-level keys are emitted as
//! `name, version, url, description, metadata, subsets`; subsets as
//! `name, metadata, instances` with instances keyed by `q_id` in
//! lexicographic order; instances as `question, answers, hints, metadata`.
//! Unknown keys are rejected everywhere except inside `metadata` maps.
//!
//! An archive is the 8-byte magic `HINTDS01` followed by the gzip-compressed
//! canonical JSON.

pub mod registry;
pub mod unique_map;
mod validate;

use std::io::{Read, Write};

use flate2::read::GzDecoder;
use flate2::{Compression, GzBuilder};
use thiserror::Error;

use crate::model::Dataset;

pub use validate::{validate_dataset, Violation};

pub const ARCHIVE_MAGIC: &[u8; 8] = b"HINTDS01";

#[derive(Debug, Error)]
pub enum DatasetIoError {
    #[error("malformed JSON: {0}")]
    MalformedJson(String),
    #[error("schema violation at {path}: {message}")]
    SchemaViolation { path: String, message: String },
    #[error("dataset failed validation: {}", summarize(.0))]
    ValidationFailed(Vec<Violation>),
    #[error("not a dataset archive (bad magic)")]
    BadMagic,
    #[error("corrupt archive: {0}")]
    CorruptArchive(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn summarize(violations: &[Violation]) -> String {
    let mut out = violations
        .iter()
        .take(3)
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ");
    if violations.len() > 3 {
        out.push_str(&format!("; and {} more", violations.len() - 3));
    }
    out
}

/// Serializes a valid dataset to canonical JSON. Output is byte-stable for
/// equal datasets.
pub fn export_json(dataset: &Dataset) -> Result<String, DatasetIoError> {
    let violations = validate_dataset(dataset);
    if !violations.is_empty() {
        return Err(DatasetIoError::ValidationFailed(violations));
    }
    let mut text = serde_json::to_string_pretty(dataset).expect("dataset model always serializes");
    text.push('\n');
    Ok(text)
}

/// Parses canonical JSON, reporting the JSON-pointer path of the first schema
/// problem or every invariant violation.
pub fn import_json(text: &str) -> Result<Dataset, DatasetIoError> {
    let mut de = serde_json::Deserializer::from_str(text);
    let dataset: Dataset = match serde_path_to_error::deserialize(&mut de) {
        Ok(d) => d,
        Err(err) => return Err(classify(err)),
    };
    de.end()
        .map_err(|e| DatasetIoError::MalformedJson(e.to_string()))?;
    let violations = validate_dataset(&dataset);
    if violations.is_empty() {
        Ok(dataset)
    } else {
        Err(DatasetIoError::ValidationFailed(violations))
    }
}

fn classify(err: serde_path_to_error::Error<serde_json::Error>) -> DatasetIoError {
    use serde_path_to_error::Segment;

    let inner = err.inner();
    if inner.is_syntax() || inner.is_eof() || inner.is_io() {
        return DatasetIoError::MalformedJson(inner.to_string());
    }
    let mut path = String::new();
    for seg in err.path().iter() {
        match seg {
            Segment::Seq { index } => path.push_str(&format!("/{index}")),
            Segment::Map { key } => {
                path.push('/');
                path.push_str(&validate::escape_pointer(key));
            }
            Segment::Enum { variant } => {
                path.push('/');
                path.push_str(&validate::escape_pointer(variant));
            }
            Segment::Unknown => path.push_str("/?"),
        }
    }
    // serde reports messages like "missing field `version` at line 1 column 2"
    let message = inner.to_string();
    let bare = message
        .split(" at line ")
        .next()
        .unwrap_or(&message)
        .to_string();
    // the path stops at the parent object for missing fields
    if let Some(rest) = bare.strip_prefix("missing field `") {
        if let Some(field) = rest.split('`').next() {
            path.push('/');
            path.push_str(&validate::escape_pointer(field));
        }
    }
    if path.is_empty() {
        path.push('/');
    }
    if bare.starts_with(unique_map::DUPLICATE_KEY) {
        return DatasetIoError::ValidationFailed(vec![Violation::new(path, bare)]);
    }
    DatasetIoError::SchemaViolation {
        path,
        message: bare,
    }
}

/// Compresses the canonical JSON of `dataset` behind the archive magic.
pub fn export_archive(dataset: &Dataset) -> Result<Vec<u8>, DatasetIoError> {
    let json = export_json(dataset)?;
    let mut out = ARCHIVE_MAGIC.to_vec();
    // fixed mtime keeps archives byte-stable
    let mut encoder = GzBuilder::new()
        .mtime(0)
        .write(&mut out, Compression::default());
    encoder.write_all(json.as_bytes())?;
    encoder.finish()?;
    Ok(out)
}

pub fn import_archive(bytes: &[u8]) -> Result<Dataset, DatasetIoError> {
    let body = bytes
        .strip_prefix(ARCHIVE_MAGIC.as_slice())
        .ok_or(DatasetIoError::BadMagic)?;
    let mut json = String::new();
    GzDecoder::new(body)
        .read_to_string(&mut json)
        .map_err(|e| DatasetIoError::CorruptArchive(e.to_string()))?;
    import_json(&json)
}

/// True when `bytes` start with the archive magic.
pub fn is_archive(bytes: &[u8]) -> bool {
    bytes.starts_with(ARCHIVE_MAGIC)
}

/// Loads either format, sniffing the archive magic.
pub fn import_any(bytes: &[u8]) -> Result<Dataset, DatasetIoError> {
    if is_archive(bytes) {
        import_archive(bytes)
    } else {
        let text = std::str::from_utf8(bytes)
            .map_err(|e| DatasetIoError::MalformedJson(format!("invalid UTF-8: {e}")))?;
        import_json(text)
    }
}

pub fn read_dataset(path: &std::path::Path) -> Result<Dataset, DatasetIoError> {
    import_any(&std::fs::read(path)?)
}

/// Writes `dataset` to `path`, as an archive when the extension is `.hds`
/// and canonical JSON otherwise.
pub fn write_dataset(path: &std::path::Path, dataset: &Dataset) -> Result<(), DatasetIoError> {
    let bytes = if path.extension().is_some_and(|e| e == "hds") {
        export_archive(dataset)?
    } else {
        export_json(dataset)?.into_bytes()
    };
    std::fs::write(path, bytes)?;
    Ok(())
}
