//! File-backed sessions. Each session lives in its own directory:
//!
//! - `doc.gdsl.json`: the current document, canonical bytes
//! - `history.json`: every applied operation with its versions
//! - `initial.gdsl.json`: the document the history starts from
//! - `session.json`: timestamps and the pending parse result
//!
//! Files are replaced by writing a sibling temporary file and renaming it.
//! Each session has its own lock, so different sessions never wait on each
//! other.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use chrono::{DateTime, Utc};
use gdsl_core::infer::{plan_inference, InferError};
use gdsl_core::model::{document_warnings, validate_document, GlyphDocument};
use gdsl_core::nlcmd::{fill_slot, parse_command, LlmBackend, ParseResult, SlotError, SlotValue};
use gdsl_core::ops::{apply_all, ApplyError, EditHistory, Operation};
use gdsl_core::render::SvgConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::format::{
    canonicalize, deserialize_document, deserialize_history, from_bytes, serialize_document,
    serialize_history, to_canonical, FormatError,
};
use crate::svg_import::{import_svg, ImportError};
use crate::{compile, CompileError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SessionMeta {
    pub session_id: String,
    pub created_at: DateTime<Utc>,
    pub updated_at: DateTime<Utc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pending_parse: Option<ParseResult>,
}

#[derive(Debug, Clone)]
pub struct Session {
    pub meta: SessionMeta,
    pub initial: GlyphDocument,
    pub doc: GlyphDocument,
    pub history: EditHistory,
}

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("no session `{0}`")]
    NotFound(String),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error("document is invalid: {0}")]
    Invalid(String),
    #[error("operation {index} failed: {error}")]
    Conflict { index: usize, error: ApplyError },
    #[error("no pending proposal to confirm")]
    NoPendingProposal,
    #[error("slot edit rejected: {0}")]
    Slot(#[from] SlotError),
    #[error(transparent)]
    Import(#[from] ImportError),
    #[error("inference failed: {0}")]
    Infer(#[from] InferError),
    #[error(transparent)]
    Compile(#[from] CompileError),
    #[error("storage: {0}")]
    Io(#[from] io::Error),
}

/// Result of a preview render.
pub struct Preview {
    pub etag: String,
    pub svg: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportBundle {
    pub svg: String,
    pub gdsl: GlyphDocument,
}

/// Writes `bytes` to `path` through a temporary sibling and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)
}

fn valid_session_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 64 && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-')
}

type Handle = Arc<Mutex<Session>>;

pub struct Store {
    dir: PathBuf,
    sessions: Mutex<HashMap<String, Handle>>,
    backend: Box<dyn LlmBackend + Send + Sync>,
    pub infer_tol: f64,
}

impl Store {
    pub fn open(
        dir: impl Into<PathBuf>,
        backend: Box<dyn LlmBackend + Send + Sync>,
    ) -> io::Result<Store> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(Store {
            dir,
            sessions: Mutex::new(HashMap::new()),
            backend,
            infer_tol: gdsl_core::infer::DEFAULT_TOL,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn session_dir(&self, id: &str) -> PathBuf {
        self.dir.join(id)
    }

    fn persist(&self, s: &Session, with_initial: bool) -> io::Result<()> {
        let d = self.session_dir(&s.meta.session_id);
        fs::create_dir_all(&d)?;
        if with_initial {
            write_atomic(
                &d.join("initial.gdsl.json"),
                &serialize_document(&s.initial),
            )?;
        }
        write_atomic(&d.join("history.json"), &serialize_history(&s.history))?;
        write_atomic(&d.join("doc.gdsl.json"), &serialize_document(&s.doc))?;
        write_atomic(&d.join("session.json"), &to_canonical(&s.meta))
    }

    fn load(&self, id: &str) -> Result<Session, StoreError> {
        let d = self.session_dir(id);
        let read = |name: &str| -> Result<Vec<u8>, StoreError> {
            fs::read(d.join(name)).map_err(|e| match e.kind() {
                io::ErrorKind::NotFound => StoreError::NotFound(id.into()),
                _ => StoreError::Io(e),
            })
        };
        let meta: SessionMeta = from_bytes(&read("session.json")?)?;
        Ok(Session {
            meta,
            initial: deserialize_document(&read("initial.gdsl.json")?)?,
            doc: deserialize_document(&read("doc.gdsl.json")?)?,
            history: deserialize_history(&read("history.json")?)?,
        })
    }

    fn handle(&self, id: &str) -> Result<Handle, StoreError> {
        if !valid_session_id(id) {
            return Err(StoreError::NotFound(id.into()));
        }
        let mut map = self.sessions.lock().expect("session map lock");
        if let Some(h) = map.get(id) {
            return Ok(h.clone());
        }
        let h = Arc::new(Mutex::new(self.load(id)?));
        map.insert(id.into(), h.clone());
        Ok(h)
    }

    /// Runs `f` with the session locked; on success the session is written
    /// back to disk before the lock is released.
    fn mutate<T>(
        &self,
        id: &str,
        f: impl FnOnce(&mut Session) -> Result<T, StoreError>,
    ) -> Result<T, StoreError> {
        let h = self.handle(id)?;
        let mut guard = h.lock().expect("session lock");
        let mut next = guard.clone();
        let out = f(&mut next)?;
        next.doc = canonicalize(&next.doc);
        next.meta.updated_at = Utc::now();
        self.persist(&next, false)?;
        *guard = next;
        Ok(out)
    }

    fn read<T>(&self, id: &str, f: impl FnOnce(&Session) -> T) -> Result<T, StoreError> {
        let h = self.handle(id)?;
        let guard = h.lock().expect("session lock");
        Ok(f(&guard))
    }

    pub fn create(&self, initial: Option<GlyphDocument>) -> Result<String, StoreError> {
        let doc = canonicalize(&initial.unwrap_or_default());
        if let Some(v) = validate_document(&doc).into_iter().next() {
            return Err(StoreError::Invalid(v.to_string()));
        }
        let id = uuid::Uuid::new_v4().to_string();
        let now = Utc::now();
        let s = Session {
            meta: SessionMeta {
                session_id: id.clone(),
                created_at: now,
                updated_at: now,
                pending_parse: None,
            },
            initial: doc.clone(),
            doc,
            history: EditHistory::new(),
        };
        self.persist(&s, true)?;
        self.sessions
            .lock()
            .expect("session map lock")
            .insert(id.clone(), Arc::new(Mutex::new(s)));
        Ok(id)
    }

    /// Applies `ops` all or nothing. Returns the new version and warnings.
    pub fn apply_ops(&self, id: &str, ops: &[Operation]) -> Result<(u64, Vec<String>), StoreError> {
        if ops.is_empty() {
            return self.read(id, |s| (s.doc.version, warnings(&s.doc)));
        }
        self.mutate(id, |s| {
            s.doc = apply_all(&s.doc, ops, &mut s.history)
                .map_err(|(index, error)| StoreError::Conflict { index, error })?;
            Ok((s.doc.version, warnings(&s.doc)))
        })
    }

    pub fn parse_nl(
        &self,
        id: &str,
        text: &str,
        selection: Option<&str>,
    ) -> Result<ParseResult, StoreError> {
        self.mutate(id, |s| {
            let r = parse_command(text, &s.doc, selection, Some(&*self.backend));
            s.meta.pending_parse = r.is_proposal().then(|| r.clone());
            Ok(r)
        })
    }

    pub fn confirm(
        &self,
        id: &str,
        overrides: &BTreeMap<String, SlotValue>,
    ) -> Result<u64, StoreError> {
        self.mutate(id, |s| {
            let mut r = s
                .meta
                .pending_parse
                .clone()
                .filter(ParseResult::is_proposal)
                .ok_or(StoreError::NoPendingProposal)?;
            for (slot, value) in overrides {
                r = fill_slot(&r, slot, value.clone(), &s.doc)?;
            }
            let op = r.proposal().expect("checked above").operation.clone();
            s.doc = s
                .history
                .apply(&s.doc, &op)
                .map_err(|error| StoreError::Conflict { index: 0, error })?;
            s.meta.pending_parse = None;
            Ok(s.doc.version)
        })
    }

    pub fn preview(&self, id: &str, cfg: &SvgConfig) -> Result<Preview, StoreError> {
        let doc = self.read(id, |s| s.doc.clone())?;
        let mut h = Sha256::new();
        h.update(serialize_document(&doc));
        h.update(format!("{cfg:?}").as_bytes());
        let etag = format!("\"{}\"", hex::encode(h.finalize()));
        Ok(Preview {
            etag,
            svg: compile(&doc, cfg, None)?,
        })
    }

    /// Merges the structure inferred from `svg` into the session as an
    /// unattached subtree (or as the whole tree of an empty document).
    pub fn infer(&self, id: &str, svg: &str) -> Result<Vec<String>, StoreError> {
        let elems = import_svg(svg)?;
        let tol = self.infer_tol;
        self.mutate(id, |s| {
            let plan = plan_inference(&s.doc, &elems, tol)?;
            s.doc = apply_all(&s.doc, &plan.ops, &mut s.history)
                .map_err(|(index, error)| StoreError::Conflict { index, error })?;
            Ok(plan.created)
        })
    }

    pub fn document(&self, id: &str) -> Result<Vec<u8>, StoreError> {
        self.read(id, |s| serialize_document(&s.doc))
    }

    pub fn history(&self, id: &str) -> Result<Vec<u8>, StoreError> {
        self.read(id, |s| serialize_history(&s.history))
    }

    /// Renders the document and keeps the pair next to the session files.
    pub fn export(&self, id: &str, cfg: &SvgConfig) -> Result<ExportBundle, StoreError> {
        let h = self.handle(id)?;
        let guard = h.lock().expect("session lock");
        let svg = compile(&guard.doc, cfg, None)?;
        let d = self.session_dir(id);
        write_atomic(&d.join("export.svg"), svg.as_bytes())?;
        write_atomic(&d.join("export.gdsl.json"), &serialize_document(&guard.doc))?;
        Ok(ExportBundle {
            svg,
            gdsl: guard.doc.clone(),
        })
    }
}

fn warnings(doc: &GlyphDocument) -> Vec<String> {
    document_warnings(doc)
        .iter()
        .map(|w| w.to_string())
        .collect()
}
