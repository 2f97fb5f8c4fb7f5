//! On-disk persistence for a workspace, its catalog, and the offline cache of
//! contacts' compositions.
//!
//! Layout under the store root:
//!
//! ```text
//! workspace.json        workspace document (composition ids, installed map, flags)
//! workspace.json.bak    the workspace document as it was before the last save
//! catalog.json          feature metadata with payload digests
//! compositions/<id>     one canonical document per composition
//! blobs/<digest>        screenshots and feature payloads
//! cache/<user>.json     last fetched compositions of one contact
//! lock                  single-writer lock
//! ```
//!
//! Every document is written to a temporary file and renamed into place.
//! Everything read back is checked against its digest or content hash.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::{self, deserialize_composition, serialize_composition, CompositionId, Digest};
use crate::model::{Catalog, Composition, Feature, FeatureId, Timestamp, UserId, Version, Workspace};

/// Environment variable naming the store root.
pub const HOME_ENV: &str = "COMPSHARE_HOME";

const FORMAT: u32 = 1;
const WORKSPACE_FILE: &str = "workspace.json";
const BACKUP_FILE: &str = "workspace.json.bak";
const CATALOG_FILE: &str = "catalog.json";
const LOCK_FILE: &str = "lock";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("corrupt store: {0}")]
    CorruptStore(String),
    #[error("another writer holds the store lock")]
    LockHeld,
    #[error("blob {0} is referenced but not stored")]
    MissingBlob(Digest),
    #[error("cache for {contact} was fetched at {stored}, refusing older fetch at {given}")]
    StaleCacheWrite { contact: UserId, stored: Timestamp, given: Timestamp },
    #[error(transparent)]
    Io(#[from] io::Error),
}

fn corrupt(path: &Path, what: impl std::fmt::Display) -> StoreError {
    StoreError::CorruptStore(format!("{}: {what}", path.display()))
}

/// Anything that can hand out content-addressed bytes.
pub trait BlobSource {
    fn blob(&self, digest: &Digest) -> Option<Arc<[u8]>>;
}

/// In-memory blob map.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MemoryBlobs(BTreeMap<Digest, Arc<[u8]>>);

impl MemoryBlobs {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, bytes: impl Into<Arc<[u8]>>) -> Digest {
        let bytes = bytes.into();
        let d = Digest::of(&bytes);
        self.0.insert(d, bytes);
        d
    }

    pub fn contains(&self, digest: &Digest) -> bool {
        self.0.contains_key(digest)
    }
}

impl BlobSource for MemoryBlobs {
    fn blob(&self, digest: &Digest) -> Option<Arc<[u8]>> {
        self.0.get(digest).cloned()
    }
}

/// A contact's compositions as last fetched.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CacheEntry {
    pub contact: UserId,
    pub compositions: Vec<Composition>,
    /// Metadata of the features those compositions involve.
    pub features: Vec<Feature>,
    pub fetched_at: Timestamp,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WorkspaceDoc {
    active: Option<CompositionId>,
    compositions: Vec<CompositionId>,
    format: u32,
    installed: BTreeMap<FeatureId, Version>,
    owner: UserId,
    sharing_enabled: bool,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CatalogDoc {
    categories: Vec<String>,
    entries: Vec<CatalogEntryDoc>,
    format: u32,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CatalogEntryDoc {
    feature: Feature,
    payload: Option<Digest>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CacheDoc {
    compositions: Vec<CompositionId>,
    contact: UserId,
    features: Vec<Feature>,
    fetched_at: Timestamp,
    format: u32,
}

/// Handle on a store directory. Cheap to clone; reads need no lock.
#[derive(Debug, Clone)]
pub struct Store {
    root: PathBuf,
}

impl Store {
    /// Opens (creating if needed) the store at `root`.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        for dir in ["compositions", "blobs", "cache"] {
            fs::create_dir_all(root.join(dir))?;
        }
        Ok(Self { root })
    }

    /// `$COMPSHARE_HOME`, or the platform data directory plus `compshare`.
    pub fn default_root() -> Option<PathBuf> {
        if let Some(home) = std::env::var_os(HOME_ENV) {
            return Some(PathBuf::from(home));
        }
        if let Some(data) = std::env::var_os("XDG_DATA_HOME") {
            return Some(PathBuf::from(data).join("compshare"));
        }
        let home = std::env::var_os("HOME")?;
        let base = if cfg!(target_os = "macos") { "Library/Application Support" } else { ".local/share" };
        Some(PathBuf::from(home).join(base).join("compshare"))
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Takes the single-writer lock, failing fast if another writer has it.
    pub fn lock(&self) -> Result<StoreWriter<'_>, StoreError> {
        let file = OpenOptions::new().create(true).truncate(false).write(true).open(self.root.join(LOCK_FILE))?;
        match file.try_lock() {
            Ok(()) => Ok(StoreWriter { store: self, _lock: file }),
            Err(fs::TryLockError::WouldBlock) => Err(StoreError::LockHeld),
            Err(fs::TryLockError::Error(e)) => Err(e.into()),
        }
    }

    fn blob_path(&self, d: &Digest) -> PathBuf {
        self.root.join("blobs").join(d.to_hex())
    }

    fn composition_path(&self, id: &CompositionId) -> PathBuf {
        self.root.join("compositions").join(format!("{id}.json"))
    }

    fn cache_path(&self, contact: &UserId) -> PathBuf {
        self.root.join("cache").join(format!("{contact}.json"))
    }

    /// Reads a blob, verifying it against its digest.
    pub fn get_blob(&self, d: &Digest) -> Result<Option<Arc<[u8]>>, StoreError> {
        let path = self.blob_path(d);
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(e.into()),
        };
        if !d.verifies(&bytes) {
            return Err(corrupt(&path, "content does not match digest"));
        }
        Ok(Some(bytes.into()))
    }

    pub fn has_blob(&self, d: &Digest) -> bool {
        self.blob_path(d).is_file()
    }

    fn read_doc<T: serde::de::DeserializeOwned>(&self, path: &Path) -> Result<Option<T>, StoreError> {
        let bytes = match fs::read(path) {
            Ok(b) => b,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(e.into()),
        };
        codec::from_strict(&bytes).map(Some).map_err(|e| corrupt(path, e))
    }

    fn read_composition(&self, id: &CompositionId) -> Result<Composition, StoreError> {
        let path = self.composition_path(id);
        let bytes = fs::read(&path).map_err(|e| corrupt(&path, e))?;
        let c = deserialize_composition(&bytes).map_err(|e| corrupt(&path, e))?;
        if c.id() != id {
            return Err(corrupt(&path, "file name does not match composition id"));
        }
        Ok(c)
    }

    /// Loads the workspace, or a fresh one for `owner` if none was saved yet.
    pub fn load_workspace(&self, owner: &UserId) -> Result<Workspace, StoreError> {
        Ok(self.load_workspace_file(WORKSPACE_FILE)?.unwrap_or_else(|| Workspace::new(owner.clone())))
    }

    /// Loads the workspace as it was before the most recent save.
    pub fn load_workspace_backup(&self) -> Result<Option<Workspace>, StoreError> {
        self.load_workspace_file(BACKUP_FILE)
    }

    fn load_workspace_file(&self, name: &str) -> Result<Option<Workspace>, StoreError> {
        let path = self.root.join(name);
        let Some(doc) = self.read_doc::<WorkspaceDoc>(&path)? else {
            return Ok(None);
        };
        if doc.format != FORMAT {
            return Err(corrupt(&path, format!("unsupported format {}", doc.format)));
        }
        let mut compositions = Vec::with_capacity(doc.compositions.len());
        for id in &doc.compositions {
            let c = self.read_composition(id)?;
            if self.get_blob(c.screenshot())?.is_none() {
                return Err(corrupt(&path, format!("screenshot {} of composition {id} is missing", c.screenshot())));
            }
            compositions.push(c);
        }
        Workspace::from_parts(doc.owner, doc.installed, compositions, doc.active, doc.sharing_enabled)
            .map(Some)
            .map_err(|e| corrupt(&path, e))
    }

    /// Loads the catalog with every payload verified; empty if none was saved.
    pub fn load_catalog(&self) -> Result<Catalog, StoreError> {
        let path = self.root.join(CATALOG_FILE);
        let Some(doc) = self.read_doc::<CatalogDoc>(&path)? else {
            return Ok(Catalog::default());
        };
        let mut cat = Catalog::new(&doc.categories);
        for e in doc.entries {
            let payload = match e.payload {
                Some(d) => Some(self.get_blob(&d)?.ok_or_else(|| corrupt(&path, format!("payload {d} missing")))?),
                None => None,
            };
            cat.insert(e.feature, payload).map_err(|err| corrupt(&path, err))?;
        }
        Ok(cat)
    }

    /// The cached compositions of `contact`, hashes verified.
    pub fn cache_get(&self, contact: &UserId) -> Result<Option<CacheEntry>, StoreError> {
        let path = self.cache_path(contact);
        let Some(doc) = self.read_doc::<CacheDoc>(&path)? else {
            return Ok(None);
        };
        if doc.format != FORMAT || &doc.contact != contact {
            return Err(corrupt(&path, "cache document does not belong to this contact"));
        }
        let compositions = doc.compositions.iter().map(|id| self.read_composition(id)).collect::<Result<_, _>>()?;
        Ok(Some(CacheEntry { contact: doc.contact, compositions, features: doc.features, fetched_at: doc.fetched_at }))
    }

    /// Contacts with a cache entry, sorted.
    pub fn cached_contacts(&self) -> Result<Vec<UserId>, StoreError> {
        let mut out = BTreeSet::new();
        for entry in fs::read_dir(self.root.join("cache"))? {
            let name = entry?.file_name();
            let name = name.to_string_lossy();
            if let Some(user) = name.strip_suffix(".json").and_then(|u| UserId::new(u).ok()) {
                out.insert(user);
            }
        }
        Ok(out.into_iter().collect())
    }
}

impl BlobSource for Store {
    fn blob(&self, digest: &Digest) -> Option<Arc<[u8]>> {
        self.get_blob(digest).ok().flatten()
    }
}

/// Exclusive write access to a store; the lock is released on drop.
#[derive(Debug)]
pub struct StoreWriter<'s> {
    store: &'s Store,
    _lock: File,
}

impl StoreWriter<'_> {
    pub fn store(&self) -> &Store {
        self.store
    }

    /// Stores `bytes` under their digest.
    pub fn put_blob(&self, bytes: &[u8]) -> Result<Digest, StoreError> {
        let d = Digest::of(bytes);
        let path = self.store.blob_path(&d);
        if !path.is_file() || self.store.get_blob(&d).is_err() {
            write_atomic(&path, bytes)?;
        }
        Ok(d)
    }

    fn put_composition(&self, c: &Composition) -> Result<(), StoreError> {
        let path = self.store.composition_path(c.id());
        if self.store.read_composition(c.id()).is_err() {
            write_atomic(&path, serialize_composition(c).as_bytes())?;
        }
        Ok(())
    }

    /// Saves the workspace atomically, keeping the previous version as backup.
    ///
    /// Every composition's screenshot must already be stored.
    pub fn save_workspace(&self, w: &Workspace) -> Result<(), StoreError> {
        for c in w.compositions() {
            if !self.store.has_blob(c.screenshot()) {
                return Err(StoreError::MissingBlob(*c.screenshot()));
            }
            self.put_composition(c)?;
        }
        let doc = WorkspaceDoc {
            active: w.active().copied(),
            compositions: w.compositions().iter().map(|c| *c.id()).collect(),
            format: FORMAT,
            installed: w.installed().clone(),
            owner: w.owner().clone(),
            sharing_enabled: w.sharing_enabled(),
        };
        let bytes = codec::to_canonical(&doc).expect("workspace document has no floats");
        let current = self.store.root.join(WORKSPACE_FILE);
        match fs::read(&current) {
            Ok(prev) => write_atomic(&self.store.root.join(BACKUP_FILE), &prev)?,
            Err(e) if e.kind() == io::ErrorKind::NotFound => {}
            Err(e) => return Err(e.into()),
        }
        write_atomic(&current, bytes.as_bytes())
    }

    /// Saves the catalog; payloads go to the blob directory.
    pub fn save_catalog(&self, cat: &Catalog) -> Result<(), StoreError> {
        let mut entries = Vec::with_capacity(cat.len());
        for e in cat.entries() {
            let payload = e.payload.as_deref().map(|p| self.put_blob(p)).transpose()?;
            entries.push(CatalogEntryDoc { feature: e.feature.clone(), payload });
        }
        let doc = CatalogDoc { categories: cat.categories().map(str::to_string).collect(), entries, format: FORMAT };
        let bytes = codec::to_canonical(&doc).expect("catalog document has no floats");
        write_atomic(&self.store.root.join(CATALOG_FILE), bytes.as_bytes())
    }

    /// Replaces the cached entry for `contact` wholesale.
    pub fn cache_put(
        &self,
        contact: &UserId,
        compositions: &[Composition],
        features: &[Feature],
        fetched_at: Timestamp,
    ) -> Result<(), StoreError> {
        if let Some(prev) = self.store.cache_get(contact).ok().flatten() {
            if fetched_at < prev.fetched_at {
                return Err(StoreError::StaleCacheWrite { contact: contact.clone(), stored: prev.fetched_at, given: fetched_at });
            }
        }
        for c in compositions {
            self.put_composition(c)?;
        }
        let doc = CacheDoc {
            compositions: compositions.iter().map(|c| *c.id()).collect(),
            contact: contact.clone(),
            features: features.to_vec(),
            fetched_at,
            format: FORMAT,
        };
        let bytes = codec::to_canonical(&doc).expect("cache document has no floats");
        write_atomic(&self.store.cache_path(contact), bytes.as_bytes())
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    if let Some(dir) = path.parent() {
        // best effort: directories cannot be opened for sync on every platform
        if let Ok(d) = File::open(dir) {
            let _ = d.sync_all();
        }
    }
    Ok(())
}
