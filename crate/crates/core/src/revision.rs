//! Content-addressed revision store.
//!
//! Revisions are never edited or removed. The id of a revision is the
//! SHA-256 of its parent id and a canonical encoding of its files, so the same
//! state committed on top of the same parent always maps to the same node.
//!
//! On disk a store is a directory with
//!
//! ```text
//! objects/<first 2 hex>/<remaining 62 hex>   file contents, keyed by SHA-256
//! revisions.log                              one JSON record per line, append-only
//! ```

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::metavis::TreeNode;
use crate::scope::ScopeHash;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("unknown parent revision {0}")]
    UnknownParent(RevisionId),
    #[error("unknown revision {0}")]
    UnknownRevision(RevisionId),
    #[error("invalid path {0:?}")]
    InvalidPath(String),
    #[error("a source state needs at least one file")]
    NoFiles,
    #[error("corrupt store: {0}")]
    CorruptStore(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn validate_path(path: &str) -> Result<(), StoreError> {
    let invalid = path.is_empty()
        || path.starts_with('/')
        || path.contains('\\')
        || path.split('/').any(|seg| seg == ".." || seg.is_empty())
        || (path.len() >= 2 && path.as_bytes()[1] == b':');
    if invalid {
        Err(StoreError::InvalidPath(path.to_string()))
    } else {
        Ok(())
    }
}

/// All source files of one development state, keyed by relative path.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SourceState {
    pub toolchain_id: String,
    pub files: BTreeMap<String, String>,
}

impl SourceState {
    pub fn new<I, P, T>(toolchain_id: impl Into<String>, files: I) -> Result<Self, StoreError>
    where
        I: IntoIterator<Item = (P, T)>,
        P: Into<String>,
        T: Into<String>,
    {
        let state = SourceState {
            toolchain_id: toolchain_id.into(),
            files: files.into_iter().map(|(p, t)| (p.into(), t.into())).collect(),
        };
        state.validate()?;
        Ok(state)
    }

    /// Single-file convenience constructor.
    pub fn single(toolchain_id: impl Into<String>, path: &str, text: &str) -> Result<Self, StoreError> {
        Self::new(toolchain_id, [(path, text)])
    }

    pub fn validate(&self) -> Result<(), StoreError> {
        if self.files.is_empty() {
            return Err(StoreError::NoFiles);
        }
        self.files.keys().try_for_each(|p| validate_path(p))
    }

    /// Parent hex (or 64 zeros) followed by length-prefixed path/content
    /// pairs in path order; lengths are 8-byte big-endian.
    pub fn canonical_bytes(&self, parent: Option<&RevisionId>) -> Vec<u8> {
        let mut out = Vec::with_capacity(64 + self.files.iter().map(|(p, t)| 16 + p.len() + t.len()).sum::<usize>());
        match parent {
            Some(id) => out.extend_from_slice(id.to_hex().as_bytes()),
            None => out.extend_from_slice(&[b'0'; 64]),
        }
        for (path, text) in &self.files {
            out.extend_from_slice(&(path.len() as u64).to_be_bytes());
            out.extend_from_slice(path.as_bytes());
            out.extend_from_slice(&(text.len() as u64).to_be_bytes());
            out.extend_from_slice(text.as_bytes());
        }
        out
    }
}

/// SHA-256 digest identifying a revision.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RevisionId(pub [u8; 32]);

impl RevisionId {
    pub fn compute(parent: Option<&RevisionId>, source: &SourceState) -> Self {
        RevisionId(sha256(&source.canonical_bytes(parent)))
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }
}

fn sha256(bytes: &[u8]) -> [u8; 32] {
    let digest = Sha256::digest(bytes);
    let mut out = [0u8; 32];
    out.copy_from_slice(&digest);
    out
}

impl fmt::Display for RevisionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl fmt::Debug for RevisionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "RevisionId({})", &self.to_hex()[..12])
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("revision ids are 64 lowercase hex characters")]
pub struct ParseRevisionIdError;

impl FromStr for RevisionId {
    type Err = ParseRevisionIdError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.len() != 64 || s.bytes().any(|b| b.is_ascii_uppercase()) {
            return Err(ParseRevisionIdError);
        }
        let mut out = [0u8; 32];
        hex::decode_to_slice(s, &mut out).map_err(|_| ParseRevisionIdError)?;
        Ok(RevisionId(out))
    }
}

impl Serialize for RevisionId {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for RevisionId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// One node of the evolution tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Revision {
    pub id: RevisionId,
    pub parent: Option<RevisionId>,
    pub source: SourceState,
    pub seq: u64,
    /// Milliseconds since the Unix epoch.
    pub created_at: u64,
    pub sst_hash: ScopeHash,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct LogRecord {
    id: RevisionId,
    parent: Option<RevisionId>,
    seq: u64,
    created_at: u64,
    sst_hash: ScopeHash,
    files: Vec<FileRecord>,
    toolchain_id: String,
}

#[derive(Serialize, Deserialize)]
struct FileRecord {
    path: String,
    blob: String,
}

/// Revision tree with optional write-through persistence.
#[derive(Debug, Default)]
pub struct RevisionStore {
    revisions: Vec<Arc<Revision>>,
    index: HashMap<RevisionId, usize>,
    children: HashMap<RevisionId, Vec<RevisionId>>,
    dir: Option<PathBuf>,
}

impl RevisionStore {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Open (or create) a store directory; subsequent commits are appended to it.
    pub fn open(dir: impl AsRef<Path>) -> Result<Self, StoreError> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir.join("objects"))?;
        let mut store = Self::load(dir)?;
        store.dir = Some(dir.to_path_buf());
        Ok(store)
    }

    /// Read a store directory, verifying every blob and revision id.
    /// A missing directory loads as an empty store.
    pub fn load(dir: impl AsRef<Path>) -> Result<Self, StoreError> {
        let dir = dir.as_ref();
        let mut store = Self::in_memory();
        let log = dir.join("revisions.log");
        if !log.exists() {
            return Ok(store);
        }
        let reader = BufReader::new(File::open(&log)?);
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let record: LogRecord = serde_json::from_str(&line)
                .map_err(|e| StoreError::CorruptStore(format!("revisions.log line {}: {e}", lineno + 1)))?;
            let mut files = BTreeMap::new();
            for file in record.files {
                let bytes = fs::read(blob_path(dir, &file.blob)?)
                    .map_err(|e| StoreError::CorruptStore(format!("blob {}: {e}", file.blob)))?;
                if hex::encode(sha256(&bytes)) != file.blob {
                    return Err(StoreError::CorruptStore(format!("blob {} hash mismatch", file.blob)));
                }
                let text = String::from_utf8(bytes)
                    .map_err(|_| StoreError::CorruptStore(format!("blob {} is not UTF-8", file.blob)))?;
                files.insert(file.path, text);
            }
            let source = SourceState { toolchain_id: record.toolchain_id, files };
            source
                .validate()
                .map_err(|e| StoreError::CorruptStore(format!("revision {}: {e}", record.id)))?;
            if RevisionId::compute(record.parent.as_ref(), &source) != record.id {
                return Err(StoreError::CorruptStore(format!("revision {} id mismatch", record.id)));
            }
            if let Some(p) = &record.parent {
                if !store.index.contains_key(p) {
                    return Err(StoreError::CorruptStore(format!("revision {} has unknown parent", record.id)));
                }
            }
            if store.revisions.last().is_some_and(|r| r.seq >= record.seq) {
                return Err(StoreError::CorruptStore(format!("revision {} out of sequence", record.id)));
            }
            store.insert(Revision {
                id: record.id,
                parent: record.parent,
                source,
                seq: record.seq,
                created_at: record.created_at,
                sst_hash: record.sst_hash,
            });
        }
        Ok(store)
    }

    /// Write the complete store into `dir`, replacing any existing log there.
    pub fn persist(&self, dir: impl AsRef<Path>) -> Result<(), StoreError> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir.join("objects"))?;
        let mut log = String::new();
        for rev in &self.revisions {
            log.push_str(&write_revision_blobs(dir, rev)?);
            log.push('\n');
        }
        let tmp = dir.join("revisions.log.tmp");
        fs::write(&tmp, log)?;
        fs::rename(tmp, dir.join("revisions.log"))?;
        Ok(())
    }

    /// Record a successfully compiled state. Re-committing an identical
    /// `(parent, source)` pair returns the existing id.
    pub fn commit(
        &mut self,
        parent: Option<&RevisionId>,
        source: SourceState,
        sst_hash: ScopeHash,
    ) -> Result<RevisionId, StoreError> {
        source.validate()?;
        if let Some(p) = parent {
            if !self.index.contains_key(p) {
                return Err(StoreError::UnknownParent(*p));
            }
        }
        let id = RevisionId::compute(parent, &source);
        if self.index.contains_key(&id) {
            return Ok(id);
        }
        let seq = self.revisions.last().map_or(1, |r| r.seq + 1);
        let created_at = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0);
        let rev = Revision { id, parent: parent.copied(), source, seq, created_at, sst_hash };
        if let Some(dir) = &self.dir {
            let mut line = write_revision_blobs(dir, &rev)?;
            line.push('\n');
            let mut log = OpenOptions::new().create(true).append(true).open(dir.join("revisions.log"))?;
            log.write_all(line.as_bytes())?;
            log.sync_data()?;
        }
        self.insert(rev);
        Ok(id)
    }

    fn insert(&mut self, rev: Revision) {
        if let Some(p) = rev.parent {
            self.children.entry(p).or_default().push(rev.id);
        }
        self.index.insert(rev.id, self.revisions.len());
        self.revisions.push(Arc::new(rev));
    }

    pub fn get(&self, id: &RevisionId) -> Result<&Arc<Revision>, StoreError> {
        self.index
            .get(id)
            .map(|&i| &self.revisions[i])
            .ok_or(StoreError::UnknownRevision(*id))
    }

    pub fn contains(&self, id: &RevisionId) -> bool {
        self.index.contains_key(id)
    }

    pub fn checkout(&self, id: &RevisionId) -> Result<SourceState, StoreError> {
        self.get(id).map(|r| r.source.clone())
    }

    pub fn parent(&self, id: &RevisionId) -> Result<Option<RevisionId>, StoreError> {
        self.get(id).map(|r| r.parent)
    }

    /// Children in commit order.
    pub fn children(&self, id: &RevisionId) -> Result<Vec<RevisionId>, StoreError> {
        self.get(id)?;
        Ok(self.children.get(id).cloned().unwrap_or_default())
    }

    /// Root-to-`head` path, `head` last.
    pub fn branch_path(&self, head: &RevisionId) -> Result<Vec<RevisionId>, StoreError> {
        let mut path = vec![*head];
        let mut cur = self.get(head)?.parent;
        while let Some(id) = cur {
            path.push(id);
            cur = self.get(&id)?.parent;
        }
        path.reverse();
        Ok(path)
    }

    /// All revisions in commit order.
    pub fn revisions(&self) -> impl Iterator<Item = &Arc<Revision>> {
        self.revisions.iter()
    }

    pub fn latest(&self) -> Option<&Arc<Revision>> {
        self.revisions.last()
    }

    pub fn len(&self) -> usize {
        self.revisions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.revisions.is_empty()
    }

    /// Span-free view of the tree for compression.
    pub fn tree_nodes(&self) -> Vec<TreeNode> {
        self.revisions
            .iter()
            .map(|r| TreeNode { id: r.id, parent: r.parent, seq: r.seq, sst_hash: r.sst_hash })
            .collect()
    }
}

fn blob_path(dir: &Path, blob: &str) -> Result<PathBuf, StoreError> {
    if blob.len() != 64 || !blob.bytes().all(|b| b.is_ascii_hexdigit()) {
        return Err(StoreError::CorruptStore(format!("malformed blob key {blob:?}")));
    }
    Ok(dir.join("objects").join(&blob[..2]).join(&blob[2..]))
}

/// Store the file blobs of `rev` and return its log line (without newline).
fn write_revision_blobs(dir: &Path, rev: &Revision) -> Result<String, StoreError> {
    let mut files = Vec::with_capacity(rev.source.files.len());
    for (path, text) in &rev.source.files {
        let blob = hex::encode(sha256(text.as_bytes()));
        let target = blob_path(dir, &blob)?;
        if !target.exists() {
            fs::create_dir_all(target.parent().expect("blob path has a parent"))?;
            let tmp = target.with_extension("tmp");
            fs::write(&tmp, text.as_bytes())?;
            fs::rename(&tmp, &target)?;
        }
        files.push(FileRecord { path: path.clone(), blob });
    }
    let record = LogRecord {
        id: rev.id,
        parent: rev.parent,
        seq: rev.seq,
        created_at: rev.created_at,
        sst_hash: rev.sst_hash,
        files,
        toolchain_id: rev.source.toolchain_id.clone(),
    };
    Ok(serde_json::to_string(&record).expect("log records serialize"))
}
