//! Flat-directory envelope store: one `<uuid>.jsonld` file per envelope.
//!
//! The directory is the source of truth; the index is rebuilt by scanning.
//! Writes go to a temp file renamed into place under an advisory lock, so
//! every visible `<uuid>.jsonld` parses fully and leftover temp files are
//! ignored.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;
use uuid::Uuid;

use crate::envelope::{from_jsonld, to_jsonld, AigcEnvelope, EnvelopeError};
use crate::par::parallel_map;
use crate::proof::{verify_envelope, KeyResolver, VerificationResult};

pub const ENVELOPE_EXTENSION: &str = "jsonld";
const LOCK_FILE: &str = ".lock";
const TEMP_PREFIX: &str = ".tmp-";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("envelope {0} is already stored")]
    DuplicateId(Uuid),
    #[error("envelope {0} not found")]
    NotFound(Uuid),
    #[error("{path}: {reason}")]
    ParseFailure { path: PathBuf, reason: String },
    #[error("refusing to store an invalid envelope: {0}")]
    InvalidEnvelope(#[from] EnvelopeError),
    #[error("store I/O failure at {path}: {source}")]
    IoFailure {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::IoFailure { path: path.to_path_buf(), source }
}

#[derive(Debug, Clone)]
pub struct EnvelopeStore {
    root: PathBuf,
}

/// Per-entry outcome of [`EnvelopeStore::verify_all`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VerifyEntry {
    pub id: Uuid,
    pub path: PathBuf,
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VerifyReport {
    pub entries: Vec<VerifyEntry>,
    pub verified: usize,
    pub failed: usize,
}

/// Parses an envelope file and checks its id against the file stem, if the
/// stem is a UUID.
pub fn read_envelope_file(path: &Path) -> Result<AigcEnvelope, StoreError> {
    let text = fs::read_to_string(path).map_err(io(path))?;
    let env =
        from_jsonld(&text).map_err(|e| StoreError::ParseFailure { path: path.to_path_buf(), reason: e.to_string() })?;
    if let Some(stem) = path.file_stem().and_then(|s| s.to_str()).and_then(|s| Uuid::parse_str(s).ok()) {
        if stem != env.id {
            return Err(StoreError::ParseFailure {
                path: path.to_path_buf(),
                reason: format!("envelope id {} does not match file name", env.id),
            });
        }
    }
    Ok(env)
}

/// Verification status of an already-parsed envelope or a parse failure.
pub fn verify_entry(path: &Path, parsed: Result<AigcEnvelope, StoreError>, resolver: &dyn KeyResolver) -> VerifyEntry {
    let stem_id =
        || path.file_stem().and_then(|s| s.to_str()).and_then(|s| Uuid::parse_str(s).ok()).unwrap_or(Uuid::nil());
    match parsed {
        Ok(env) => {
            let result: VerificationResult = verify_envelope(&env, resolver);
            VerifyEntry {
                id: env.id,
                path: path.to_path_buf(),
                status: result.status().to_string(),
                detail: result.detail().map(String::from),
            }
        }
        Err(e) => VerifyEntry {
            id: stem_id(),
            path: path.to_path_buf(),
            status: "ParseFailure".into(),
            detail: Some(e.to_string()),
        },
    }
}

impl EnvelopeStore {
    /// Opens `root`, creating it if needed.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(io(&root))?;
        Ok(Self { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path_of(&self, id: Uuid) -> PathBuf {
        self.root.join(format!("{id}.{ENVELOPE_EXTENSION}"))
    }

    /// Id → path for every `<uuid>.jsonld` file; temp files are skipped.
    pub fn index(&self) -> Result<BTreeMap<Uuid, PathBuf>, StoreError> {
        let mut index = BTreeMap::new();
        for entry in fs::read_dir(&self.root).map_err(io(&self.root))? {
            let path = entry.map_err(io(&self.root))?.path();
            if path.extension().and_then(|e| e.to_str()) != Some(ENVELOPE_EXTENSION) {
                continue;
            }
            let Some(stem) = path.file_stem().and_then(|s| s.to_str()) else {
                continue;
            };
            // Only the canonical lowercase hyphenated spelling is ours.
            if let Ok(id) = Uuid::parse_str(stem) {
                if id.to_string() == stem {
                    index.insert(id, path);
                }
            }
        }
        Ok(index)
    }

    pub fn list(&self) -> Result<Vec<Uuid>, StoreError> {
        Ok(self.index()?.into_keys().collect())
    }

    fn lock(&self) -> Result<File, StoreError> {
        let path = self.root.join(LOCK_FILE);
        let file = OpenOptions::new().create(true).truncate(false).write(true).open(&path).map_err(io(&path))?;
        file.lock().map_err(io(&path))?;
        Ok(file)
    }

    /// Writes the canonical JSON-LD atomically and returns its path.
    pub fn save(&self, envelope: &AigcEnvelope) -> Result<PathBuf, StoreError> {
        envelope.validate()?;
        let target = self.path_of(envelope.id);
        let _guard = self.lock()?;
        if target.exists() {
            return Err(StoreError::DuplicateId(envelope.id));
        }
        let mut tmp = tempfile::Builder::new()
            .prefix(TEMP_PREFIX)
            .suffix(".part")
            .tempfile_in(&self.root)
            .map_err(io(&self.root))?;
        tmp.write_all(to_jsonld(envelope).as_bytes()).map_err(io(tmp.path()))?;
        tmp.write_all(b"\n").map_err(io(tmp.path()))?;
        tmp.as_file().sync_all().map_err(io(tmp.path()))?;
        tmp.persist_noclobber(&target).map_err(|e| match e.error.kind() {
            std::io::ErrorKind::AlreadyExists => StoreError::DuplicateId(envelope.id),
            _ => StoreError::IoFailure { path: target.clone(), source: e.error },
        })?;
        Ok(target)
    }

    pub fn load(&self, id: Uuid) -> Result<AigcEnvelope, StoreError> {
        let path = self.path_of(id);
        if !path.is_file() {
            return Err(StoreError::NotFound(id));
        }
        read_envelope_file(&path)
    }

    /// Verifies every stored envelope; unparseable files are reported, not fatal.
    pub fn verify_all(&self, resolver: &dyn KeyResolver, concurrency: usize) -> Result<VerifyReport, StoreError> {
        let paths: Vec<PathBuf> = self.index()?.into_values().collect();
        let entries = parallel_map(&paths, concurrency, |p| verify_entry(p, read_envelope_file(p), resolver));
        let verified = entries.iter().filter(|e| e.status == "Verified").count();
        Ok(VerifyReport { failed: entries.len() - verified, verified, entries })
    }
}
