//! On-disk store for user architectures and saved results.
//!
//! Layout: one JSON file per entry under `<root>/<kind>/`, plus
//! `<root>/index.json` listing every entry with its content hash and the
//! time the current content was stored.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use chrono::{DateTime, SecondsFormat, Utc};
use dse_core::catalog::{self, CatalogEntry, CatalogError, FILE_EXTENSION};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum WorkspaceError {
    #[error("invalid entry name `{0}`: use 1-128 letters, digits, '.', '_' or '-', not starting with '.'")]
    InvalidName(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Corrupt { path: PathBuf, message: String },
    #[error("{0}")]
    Catalog(#[from] CatalogError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntryKind {
    Architecture,
    Report,
    Sweep,
    Curve,
}

impl EntryKind {
    fn dir(self) -> &'static str {
        match self {
            EntryKind::Architecture => "architectures",
            EntryKind::Report => "reports",
            EntryKind::Sweep => "sweeps",
            EntryKind::Curve => "curves",
        }
    }

    fn extension(self) -> &'static str {
        match self {
            EntryKind::Architecture => FILE_EXTENSION,
            _ => ".json",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub kind: EntryKind,
    pub name: String,
    /// Path relative to the workspace root.
    pub file: String,
    pub sha256: String,
    pub created_at: DateTime<Utc>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct Index {
    entries: Vec<IndexEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SaveOutcome {
    pub entry: IndexEntry,
    /// False when identical content was already stored under this name.
    pub changed: bool,
}

pub fn valid_name(name: &str) -> bool {
    !name.is_empty()
        && name.len() <= 128
        && !name.starts_with('.')
        && name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-'))
}

pub fn sha256_hex(content: &[u8]) -> String {
    hex::encode(Sha256::digest(content))
}

pub struct Workspace {
    root: PathBuf,
    /// Held for every index read-modify-write.
    writer: Mutex<()>,
}

impl Workspace {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, WorkspaceError> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(|source| WorkspaceError::Io {
            path: root.clone(),
            source,
        })?;
        Ok(Workspace {
            root,
            writer: Mutex::new(()),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn index_path(&self) -> PathBuf {
        self.root.join("index.json")
    }

    fn read_index(&self) -> Result<Index, WorkspaceError> {
        let path = self.index_path();
        match fs::read_to_string(&path) {
            Ok(text) => serde_json::from_str(&text).map_err(|e| WorkspaceError::Corrupt {
                path,
                message: e.to_string(),
            }),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Index::default()),
            Err(source) => Err(WorkspaceError::Io { path, source }),
        }
    }

    /// Entries sorted by name, then kind.
    pub fn list(&self, kind: Option<EntryKind>) -> Result<Vec<IndexEntry>, WorkspaceError> {
        let _guard = self.writer.lock().unwrap_or_else(|e| e.into_inner());
        let mut entries: Vec<IndexEntry> = self
            .read_index()?
            .entries
            .into_iter()
            .filter(|e| kind.is_none_or(|k| e.kind == k))
            .collect();
        entries.sort_by(|a, b| (&a.name, a.kind).cmp(&(&b.name, b.kind)));
        Ok(entries)
    }

    /// Stores `content` under `name`. Saving the same bytes again leaves the
    /// entry, its timestamp and the files untouched.
    pub fn save(
        &self,
        kind: EntryKind,
        name: &str,
        content: &str,
    ) -> Result<SaveOutcome, WorkspaceError> {
        if !valid_name(name) {
            return Err(WorkspaceError::InvalidName(name.to_string()));
        }
        let sha256 = sha256_hex(content.as_bytes());
        let file = format!("{}/{}{}", kind.dir(), name, kind.extension());

        let _guard = self.writer.lock().unwrap_or_else(|e| e.into_inner());
        let mut index = self.read_index()?;
        let existing = index
            .entries
            .iter()
            .position(|e| e.kind == kind && e.name == name);
        if let Some(i) = existing {
            if index.entries[i].sha256 == sha256 {
                return Ok(SaveOutcome {
                    entry: index.entries[i].clone(),
                    changed: false,
                });
            }
        }
        let entry = IndexEntry {
            kind,
            name: name.to_string(),
            file: file.clone(),
            sha256,
            created_at: now(),
        };
        write_atomic(&self.root.join(&file), content.as_bytes())?;
        match existing {
            Some(i) => index.entries[i] = entry.clone(),
            None => index.entries.push(entry.clone()),
        }
        index
            .entries
            .sort_by(|a, b| (&a.name, a.kind).cmp(&(&b.name, b.kind)));
        let mut text = serde_json::to_string_pretty(&index).expect("index serializes");
        text.push('\n');
        write_atomic(&self.index_path(), text.as_bytes())?;
        Ok(SaveOutcome {
            entry,
            changed: true,
        })
    }

    pub fn read(&self, kind: EntryKind, name: &str) -> Result<Option<String>, WorkspaceError> {
        if !valid_name(name) {
            return Ok(None);
        }
        let Some(entry) = self.list(Some(kind))?.into_iter().find(|e| e.name == name) else {
            return Ok(None);
        };
        let path = self.root.join(&entry.file);
        fs::read_to_string(&path)
            .map(Some)
            .map_err(|source| WorkspaceError::Io { path, source })
    }

    pub fn save_architecture(&self, entry: &CatalogEntry) -> Result<SaveOutcome, WorkspaceError> {
        self.save(
            EntryKind::Architecture,
            entry.name(),
            &catalog::to_json(entry),
        )
    }

    pub fn architecture(&self, name: &str) -> Result<Option<CatalogEntry>, WorkspaceError> {
        match self.read(EntryKind::Architecture, name)? {
            Some(text) => Ok(Some(catalog::from_json(&text)?)),
            None => Ok(None),
        }
    }
}

fn now() -> DateTime<Utc> {
    // Millisecond precision keeps the index stable through a JSON round trip.
    let t = Utc::now();
    DateTime::parse_from_rfc3339(&t.to_rfc3339_opts(SecondsFormat::Millis, true))
        .expect("own timestamp parses")
        .with_timezone(&Utc)
}

/// Writes to a temporary sibling and renames it into place.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), WorkspaceError> {
    let io = |source| WorkspaceError::Io {
        path: path.to_path_buf(),
        source,
    };
    let dir = path.parent().expect("entry paths have a parent");
    fs::create_dir_all(dir).map_err(io)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(bytes).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}
