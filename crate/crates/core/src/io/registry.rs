//! Remote registry of preprocessed hint datasets.
//!
//! The registry is a static JSON manifest (`{schema_version, entries}`) at a
//! configurable URL. Each entry points at a dataset archive and carries its
//! SHA-256 checksum. Manifests and verified archives are cached under the
//! cache directory:
//!
//! ```text
//! <cache>/registry/manifest.json
//! <cache>/datasets/<name>.hds
//! ```

use std::collections::HashSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::{import_any, DatasetIoError};
use crate::client::{ClientError, HttpRequest, Transport};
use crate::model::Dataset;

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;
pub const ENV_CACHE_DIR: &str = "HINTKIT_CACHE_DIR";
pub const ENV_REGISTRY_URL: &str = "HINTKIT_REGISTRY_URL";

#[derive(Debug, Error)]
pub enum RegistryError {
    #[error("network error: {0}")]
    NetworkError(String),
    #[error("invalid registry manifest: {0}")]
    ManifestSchemaError(String),
    #[error("dataset `{0}` is not in the registry")]
    UnknownDataset(String),
    #[error("checksum mismatch for `{name}`: expected {expected}, got {actual}")]
    ChecksumMismatch {
        name: String,
        expected: String,
        actual: String,
    },
    #[error(transparent)]
    Dataset(#[from] DatasetIoError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubsetInfo {
    pub name: String,
    pub finetuned: bool,
    pub uses_answer: bool,
    pub num_questions: u64,
    pub num_hints: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegistryEntry {
    pub dataset_name: String,
    pub subsets: Vec<SubsetInfo>,
    /// Absolute, or relative to the manifest URL.
    pub download_url: String,
    /// Lowercase hex SHA-256 of the archive.
    pub checksum: String,
    #[serde(default)]
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegistryManifest {
    pub schema_version: u32,
    pub entries: Vec<RegistryEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fetched_at: Option<DateTime<Utc>>,
}

impl RegistryManifest {
    pub fn parse(text: &str) -> Result<Self, RegistryError> {
        let manifest: RegistryManifest = serde_json::from_str(text)
            .map_err(|e| RegistryError::ManifestSchemaError(e.to_string()))?;
        manifest.check()?;
        Ok(manifest)
    }

    fn check(&self) -> Result<(), RegistryError> {
        if self.schema_version != MANIFEST_SCHEMA_VERSION {
            return Err(RegistryError::ManifestSchemaError(format!(
                "unsupported schema_version {} (expected {MANIFEST_SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        let mut seen = HashSet::new();
        for entry in &self.entries {
            if !seen.insert(entry.dataset_name.as_str()) {
                return Err(RegistryError::ManifestSchemaError(format!(
                    "duplicate dataset name `{}`",
                    entry.dataset_name
                )));
            }
            if entry.checksum.len() != 64 || !entry.checksum.bytes().all(|b| b.is_ascii_hexdigit())
            {
                return Err(RegistryError::ManifestSchemaError(format!(
                    "checksum of `{}` is not 64 hex characters",
                    entry.dataset_name
                )));
            }
        }
        Ok(())
    }

    pub fn entry(&self, name: &str) -> Option<&RegistryEntry> {
        self.entries.iter().find(|e| e.dataset_name == name)
    }
}

/// `HINTKIT_CACHE_DIR`, else `$XDG_CACHE_HOME/hintkit`, else
/// `~/.cache/hintkit`.
pub fn default_cache_dir() -> PathBuf {
    if let Some(dir) = std::env::var_os(ENV_CACHE_DIR).filter(|d| !d.is_empty()) {
        return dir.into();
    }
    if let Some(dir) = std::env::var_os("XDG_CACHE_HOME").filter(|d| !d.is_empty()) {
        return PathBuf::from(dir).join("hintkit");
    }
    std::env::var_os("HOME")
        .map(|h| PathBuf::from(h).join(".cache").join("hintkit"))
        .unwrap_or_else(|| std::env::temp_dir().join("hintkit"))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub struct Registry {
    url: String,
    cache_dir: PathBuf,
    transport: Arc<dyn Transport>,
}

impl Registry {
    pub fn new(
        url: impl Into<String>,
        cache_dir: impl Into<PathBuf>,
        transport: Arc<dyn Transport>,
    ) -> Self {
        Registry {
            url: url.into(),
            cache_dir: cache_dir.into(),
            transport,
        }
    }

    pub fn cache_dir(&self) -> &Path {
        &self.cache_dir
    }

    fn manifest_path(&self) -> PathBuf {
        self.cache_dir.join("registry").join("manifest.json")
    }

    fn archive_path(&self, name: &str) -> PathBuf {
        let safe: String = name
            .chars()
            .map(|c| {
                if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                    c
                } else {
                    '_'
                }
            })
            .collect();
        self.cache_dir.join("datasets").join(format!("{safe}.hds"))
    }

    /// Returns the manifest. With `update == false` a cached manifest is
    /// used when present; otherwise the registry is fetched and the cache
    /// refreshed. A failed refresh falls back to the cache if there is one.
    pub fn available_datasets(&self, update: bool) -> Result<RegistryManifest, RegistryError> {
        let cached = self.cached_manifest();
        if !update {
            if let Some(m) = cached {
                return Ok(m);
            }
        }
        match self.fetch(&self.url) {
            Ok(bytes) => {
                let text = String::from_utf8(bytes)
                    .map_err(|e| RegistryError::ManifestSchemaError(e.to_string()))?;
                let mut manifest = RegistryManifest::parse(&text)?;
                manifest.fetched_at = Some(Utc::now());
                let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
                write_atomic(&self.manifest_path(), json.as_bytes())?;
                Ok(manifest)
            }
            Err(e) => match cached {
                Some(m) => {
                    log::warn!("registry refresh failed ({e}); using cached manifest");
                    Ok(m)
                }
                None => Err(e),
            },
        }
    }

    fn cached_manifest(&self) -> Option<RegistryManifest> {
        let text = fs::read_to_string(self.manifest_path()).ok()?;
        match RegistryManifest::parse(&text) {
            Ok(m) => Some(m),
            Err(e) => {
                log::warn!("ignoring unreadable cached manifest: {e}");
                None
            }
        }
    }

    /// Fetches, verifies and loads a dataset by name. A verified archive
    /// already in the cache is reused. Archives failing verification are
    /// never written to the cache.
    pub fn download_dataset(&self, name: &str) -> Result<Dataset, RegistryError> {
        let manifest = self.available_datasets(false)?;
        let entry = manifest
            .entry(name)
            .ok_or_else(|| RegistryError::UnknownDataset(name.to_string()))?;
        let path = self.archive_path(name);
        fs::create_dir_all(path.parent().expect("archive path has a parent"))?;

        // one lock file per cache entry serializes concurrent downloads
        let lock = fs::OpenOptions::new()
            .create(true)
            .truncate(false)
            .write(true)
            .open(path.with_extension("lock"))?;
        lock.lock()?;

        let expected = entry.checksum.to_ascii_lowercase();
        if let Ok(bytes) = fs::read(&path) {
            if sha256_hex(&bytes) == expected {
                return Ok(import_any(&bytes)?);
            }
            log::warn!("cached archive for `{name}` failed verification; refetching");
        }
        let url = self.resolve(&entry.download_url)?;
        let bytes = self.fetch(&url)?;
        let actual = sha256_hex(&bytes);
        if actual != expected {
            return Err(RegistryError::ChecksumMismatch {
                name: name.to_string(),
                expected,
                actual,
            });
        }
        let dataset = import_any(&bytes)?;
        write_atomic(&path, &bytes)?;
        Ok(dataset)
    }

    fn resolve(&self, link: &str) -> Result<String, RegistryError> {
        if let Ok(abs) = url::Url::parse(link) {
            return Ok(abs.into());
        }
        let base = url::Url::parse(&self.url)
            .map_err(|e| RegistryError::ManifestSchemaError(format!("registry URL: {e}")))?;
        base.join(link)
            .map(Into::into)
            .map_err(|e| RegistryError::ManifestSchemaError(format!("download_url: {e}")))
    }

    fn fetch(&self, url: &str) -> Result<Vec<u8>, RegistryError> {
        if let Some(path) = url::Url::parse(url)
            .ok()
            .filter(|u| u.scheme() == "file")
            .and_then(|u| u.to_file_path().ok())
        {
            return fs::read(&path)
                .map_err(|e| RegistryError::NetworkError(format!("{}: {e}", path.display())));
        }
        let response = self
            .transport
            .send(&HttpRequest::get(url))
            .map_err(|e: ClientError| RegistryError::NetworkError(e.to_string()))?;
        if !response.is_success() {
            return Err(RegistryError::NetworkError(format!(
                "GET {url} returned HTTP {}",
                response.status
            )));
        }
        Ok(response.body)
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    fs::create_dir_all(path.parent().expect("cache path has a parent"))?;
    let tmp = path.with_extension(format!("part{}", std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(tmp, path)
}
