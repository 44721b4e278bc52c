//! On-disk cache of response sets and their sentiment labels.
//!
//! Response sets are keyed by the full decoding configuration; label sets
//! by that key plus the classifier id. Entries are immutable: the first
//! writer wins and later writes of the same key are no-ops.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::promptgen::{GenerationConfig, ResponseSet};
use crate::rng::sha256_hex;
use crate::sentiment::SentimentLabel;

#[derive(Debug, thiserror::Error)]
#[error("cache {path}: {message}")]
pub struct CacheError {
    pub path: PathBuf,
    pub message: String,
}

/// Digest of everything that determines a response set.
pub fn generation_key(backend_id: &str, model_id: &str, prompt: &str, config: &GenerationConfig) -> String {
    let material = serde_json::json!({
        "backend_id": backend_id,
        "model_id": model_id,
        "prompt": prompt,
        "n": config.n_samples,
        // bit pattern so that e.g. 1.0 and 1.0000000001 never alias
        "temperature_bits": config.temperature.to_bits(),
        "max_new_tokens": config.max_new_tokens,
        "seed": config.seed,
    });
    sha256_hex(material.to_string())
}

pub fn label_key(generation_key: &str, classifier_id: &str) -> String {
    sha256_hex(format!("{generation_key}\n{classifier_id}"))
}

#[derive(Debug, Clone)]
pub struct ResponseCache {
    dir: PathBuf,
}

impl ResponseCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path(&self, kind: &str, key: &str) -> PathBuf {
        self.dir.join(kind).join(format!("{key}.json"))
    }

    pub fn get_responses(&self, key: &str) -> Result<Option<ResponseSet>, CacheError> {
        read(&self.path("responses", key))
    }

    /// Returns false when an entry already existed.
    pub fn put_responses(&self, key: &str, set: &ResponseSet) -> Result<bool, CacheError> {
        write_once(&self.path("responses", key), set)
    }

    pub fn get_labels(&self, key: &str) -> Result<Option<Vec<SentimentLabel>>, CacheError> {
        read(&self.path("labels", key))
    }

    pub fn put_labels(&self, key: &str, labels: &[SentimentLabel]) -> Result<bool, CacheError> {
        write_once(&self.path("labels", key), &labels)
    }
}

fn read<T: DeserializeOwned>(path: &Path) -> Result<Option<T>, CacheError> {
    let err = |m: String| CacheError { path: path.to_path_buf(), message: m };
    match std::fs::read(path) {
        Ok(bytes) => serde_json::from_slice(&bytes).map(Some).map_err(|e| err(e.to_string())),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(err(e.to_string())),
    }
}

fn write_once<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<bool, CacheError> {
    let err = |m: String| CacheError { path: path.to_path_buf(), message: m };
    if path.exists() {
        return Ok(false);
    }
    let dir = path.parent().expect("cache paths have a parent");
    std::fs::create_dir_all(dir).map_err(|e| err(e.to_string()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| err(e.to_string()))?;
    serde_json::to_writer(&mut tmp, value).map_err(|e| err(e.to_string()))?;
    tmp.flush().map_err(|e| err(e.to_string()))?;
    match tmp.persist_noclobber(path) {
        Ok(_) => Ok(true),
        Err(e) if e.error.kind() == std::io::ErrorKind::AlreadyExists => Ok(false),
        Err(e) => Err(err(e.error.to_string())),
    }
}
