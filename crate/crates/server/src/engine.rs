//! Sessions, revision bookkeeping and the background compile/render workers.
//!
//! Every session owns one revision tree. Edits go through the debounced job
//! queue; a successful compile commits a revision, moves the session to it
//! and renders it. Results are pushed to subscribers as notifications.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, MutexGuard};
use std::thread::JoinHandle;
use std::time::Duration;

use livevis_core::metavis::{self, BranchView, ExpandState, GroupId, TreeView, ViewSources};
use livevis_core::params::{self, ParamError, ParamValue, ParameterDecl, ParameterSet};
use livevis_core::scheduler::{ArtifactCache, JobPayload, SharedQueue};
use livevis_core::scope::{self, LanguageProfile, ScopeKind, ScopeNode};
use livevis_core::toolchain::{Artifact, CompileResult, Diagnostic, ToolchainAdapter, ToolchainError};
use livevis_core::{
    revision_diff, variance_image, FileDiff, Image, RevisionId, RevisionStore, SourceState, StoreError,
};
use livevis_toolchain::Registry;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::config::ServerConfig;

#[derive(Debug, Error)]
pub enum ApiError {
    #[error("unknown toolchain {0}")]
    UnknownToolchain(String),
    #[error("unknown session {0}")]
    UnknownSession(String),
    #[error("unknown revision {0}")]
    UnknownRevision(String),
    #[error(transparent)]
    TypeMismatch(ParamError),
    #[error("unknown image {0}")]
    UnknownImage(String),
    #[error("unknown group {0}")]
    UnknownGroup(GroupId),
    #[error("invalid params: {0}")]
    InvalidParams(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl ApiError {
    pub fn code(&self) -> i64 {
        match self {
            ApiError::UnknownToolchain(_) => -32001,
            ApiError::UnknownSession(_) => -32002,
            ApiError::UnknownRevision(_) => -32003,
            ApiError::TypeMismatch(_) => -32004,
            ApiError::UnknownImage(_) => -32005,
            ApiError::UnknownGroup(_) => -32006,
            ApiError::InvalidParams(_) => -32602,
            ApiError::Internal(_) => -32603,
        }
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::UnknownRevision(id) => ApiError::UnknownRevision(id.to_hex()),
            StoreError::InvalidPath(_) | StoreError::NoFiles => ApiError::InvalidParams(e.to_string()),
            other => ApiError::Internal(other.to_string()),
        }
    }
}

/// A server-push message.
#[derive(Debug, Clone, PartialEq)]
pub struct Notification {
    pub method: &'static str,
    pub session: String,
    pub params: Value,
}

impl Notification {
    fn new(method: &'static str, session: &str, mut params: Value) -> Self {
        params["sessionId"] = Value::String(session.to_string());
        Notification { method, session: session.to_string(), params }
    }

    /// The JSON-RPC notification object (no id).
    pub fn to_json(&self) -> Value {
        json!({"jsonrpc": "2.0", "method": self.method, "params": self.params})
    }
}

/// Receives notifications; returning `false` unsubscribes.
pub type Sink = Box<dyn Fn(&Notification) -> bool + Send + Sync>;

/// Direction of `diff.get`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// Changes that turn `from` into `to`.
    #[default]
    Forward,
    /// Changes that turn `to` into `from`.
    Reverse,
}

/// What `image.get` can resolve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImageRef {
    Result { revision: RevisionId, generation: u64 },
    Variance { group: GroupId, generation: u64 },
}

impl ImageRef {
    pub fn parse(s: &str) -> Option<ImageRef> {
        let (head, generation) = s.rsplit_once(':')?;
        let generation = generation.parse().ok()?;
        match head.strip_prefix('g') {
            Some(group) if !group.is_empty() && group.bytes().all(|b| b.is_ascii_digit()) => {
                Some(ImageRef::Variance { group: group.parse().ok()?, generation })
            }
            _ => Some(ImageRef::Result { revision: head.parse().ok()?, generation }),
        }
    }
}

impl std::fmt::Display for ImageRef {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ImageRef::Result { revision, generation } => write!(f, "{revision}:{generation}"),
            ImageRef::Variance { group, generation } => write!(f, "g{group}:{generation}"),
        }
    }
}

/// Persistent per-session view state, stored next to the revision log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct SessionFile {
    session_id: String,
    toolchain_id: String,
    current_revision: Option<RevisionId>,
    active_params: ParameterSet,
    expand_state: ExpandState,
    width: u32,
    height: u32,
}

/// Results of one branch refresh, released in `order`.
#[derive(Debug)]
struct Batch {
    generation: u64,
    len: usize,
    next: usize,
    done: BTreeMap<usize, Option<(RevisionId, Arc<Image>)>>,
}

struct Session {
    id: String,
    toolchain: Arc<dyn ToolchainAdapter>,
    profile: LanguageProfile,
    store: RevisionStore,
    current: Option<RevisionId>,
    params: ParameterSet,
    expanded: ExpandState,
    width: u32,
    height: u32,
    dir: Option<PathBuf>,
    ssts: HashMap<RevisionId, ScopeNode>,
    decls: HashMap<RevisionId, Vec<ParameterDecl>>,
    artifacts: ArtifactCache<Artifact>,
    images: HashMap<RevisionId, (u64, Arc<Image>)>,
    variance: HashMap<(GroupId, u64, RevisionId), Arc<Image>>,
    batches: HashMap<u64, Batch>,
}

/// Scope tree of a source state; a file whose braces do not balance counts
/// as a file without blocks.
pub fn scope_tree(source: &SourceState, profile: &LanguageProfile) -> ScopeNode {
    let files = source
        .files
        .iter()
        .map(|(path, text)| {
            scope::parse_scopes(text, profile, path).unwrap_or_else(|e| {
                log::warn!("{e}; using a flat scope tree for {path}");
                ScopeNode { kind: ScopeKind::File, file: Some(path.clone()), span: None, children: Vec::new() }
            })
        })
        .collect();
    scope::merge_trees(files).expect("source paths are unique and non-empty")
}

impl Session {
    fn source_of(&self, id: &RevisionId) -> Result<SourceState, ApiError> {
        Ok(self.store.checkout(id)?)
    }

    fn current_source(&self) -> Option<SourceState> {
        self.current.and_then(|c| self.store.checkout(&c).ok())
    }

    fn sst(&mut self, id: &RevisionId) -> Option<ScopeNode> {
        if let Some(t) = self.ssts.get(id) {
            return Some(t.clone());
        }
        let tree = scope_tree(&self.store.checkout(id).ok()?, &self.profile);
        self.ssts.insert(*id, tree.clone());
        Some(tree)
    }

    fn decls(&mut self, id: &RevisionId) -> Vec<ParameterDecl> {
        if let Some(d) = self.decls.get(id) {
            return d.clone();
        }
        let decls = self
            .store
            .checkout(id)
            .ok()
            .and_then(|src| params::extract_params(&src, self.toolchain.as_ref()).ok())
            .unwrap_or_default();
        self.decls.insert(*id, decls.clone());
        decls
    }

    fn head(&self) -> Option<RevisionId> {
        self.current.and_then(|c| metavis::branch_head(&self.store, &c).ok())
    }

    fn branch(&self) -> Vec<RevisionId> {
        self.head().and_then(|h| self.store.branch_path(&h).ok()).unwrap_or_default()
    }

    /// Branch revisions in enqueue order: the current revision goes last so
    /// that it renders first, then the rest head to root.
    fn refresh_list(&self, only_missing: bool) -> Vec<RevisionId> {
        let generation = self.params.generation;
        let missing = |id: &RevisionId| !only_missing || self.images.get(id).is_none_or(|(g, _)| *g != generation);
        let mut list: Vec<RevisionId> =
            self.branch().into_iter().filter(|id| Some(*id) != self.current && missing(id)).collect();
        if let Some(c) = self.current.filter(|c| missing(c)) {
            list.push(c);
        }
        list
    }

    fn tree_view(&mut self) -> Result<TreeView, ApiError> {
        let mut groups = metavis::compress_tree(&self.store.tree_nodes());
        metavis::apply_expand_state(&mut groups, &self.expanded);
        let branch = match (self.head(), self.current) {
            (Some(head), Some(current)) => {
                let generation = self.params.generation;
                for id in self.store.branch_path(&head)? {
                    self.sst(&id);
                }
                let ssts = &self.ssts;
                let sst_of = |id: &RevisionId| ssts.get(id).cloned();
                let image_ref = |id: &RevisionId| ImageRef::Result { revision: *id, generation }.to_string();
                let variance_ref = |group: GroupId| ImageRef::Variance { group, generation }.to_string();
                let sources = ViewSources { sst_of: &sst_of, image_ref: &image_ref, variance_ref: &variance_ref };
                Some(metavis::branch_view(&self.store, &groups, &head, &current, &self.expanded, &sources)?)
            }
            _ => None,
        };
        Ok(TreeView { groups, branch })
    }

    fn persist(&self) {
        let Some(dir) = &self.dir else { return };
        let file = SessionFile {
            session_id: self.id.clone(),
            toolchain_id: self.toolchain.id().to_string(),
            current_revision: self.current,
            active_params: self.params.clone(),
            expand_state: self.expanded.clone(),
            width: self.width,
            height: self.height,
        };
        let tmp = dir.join("session.json.tmp");
        let result = fs::write(&tmp, serde_json::to_vec_pretty(&file).expect("session state serializes"))
            .and_then(|_| fs::rename(&tmp, dir.join("session.json")));
        if let Err(e) = result {
            log::error!("could not save session {}: {e}", self.id);
        }
    }

    /// Record a finished render and release whatever is now in order.
    fn complete(&mut self, batch: u64, order: usize, result: Option<(RevisionId, Arc<Image>)>) -> Vec<Notification> {
        let Some(b) = self.batches.get_mut(&batch) else { return Vec::new() };
        b.done.insert(order, result);
        let generation = b.generation;
        let mut ready = Vec::new();
        while let Some(entry) = b.done.remove(&b.next) {
            b.next += 1;
            if let Some((rev, img)) = entry {
                ready.push((rev, img));
            }
        }
        if b.next >= b.len {
            self.batches.remove(&batch);
        }
        ready
            .into_iter()
            .map(|(rev, img)| {
                self.images.insert(rev, (generation, img));
                let r = ImageRef::Result { revision: rev, generation };
                Notification::new(
                    "image.ready",
                    &self.id,
                    json!({"revisionId": rev, "ref": r.to_string(), "generation": generation}),
                )
            })
            .collect()
    }

    fn variance(&mut self, group: GroupId, generation: u64) -> Result<Arc<Image>, ApiError> {
        let unknown = || ApiError::UnknownImage(ImageRef::Variance { group, generation }.to_string());
        if generation != self.params.generation {
            return Err(unknown());
        }
        let head = self.head().ok_or_else(unknown)?;
        if let Some(img) = self.variance.get(&(group, generation, head)) {
            return Ok(img.clone());
        }
        let groups = metavis::compress_tree(&self.store.tree_nodes());
        let g = groups.get(group as usize).ok_or_else(unknown)?;
        let members = metavis::on_branch_members(&self.store, g, &head)?;
        if members.len() < 2 {
            return Err(unknown());
        }
        let images = members
            .iter()
            .map(|m| match self.images.get(m) {
                Some((g, img)) if *g == generation => Ok(Image::clone(img)),
                _ => Err(unknown()),
            })
            .collect::<Result<Vec<_>, _>>()?;
        let img = Arc::new(variance_image(&images).map_err(|e| ApiError::Internal(e.to_string()))?);
        self.variance.insert((group, generation, head), img.clone());
        Ok(img)
    }
}

struct Shared {
    config: ServerConfig,
    registry: Registry,
    queue: SharedQueue,
    sessions: Mutex<HashMap<String, Arc<Mutex<Session>>>>,
    sinks: Mutex<Vec<Sink>>,
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|e| e.into_inner())
}

fn valid_session_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 64 && id.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_')
}

/// Handle to the running engine. Dropping it stops the workers.
pub struct Engine {
    shared: Arc<Shared>,
    workers: Mutex<Vec<JoinHandle<()>>>,
}

impl Engine {
    pub fn start(config: ServerConfig, registry: Registry) -> Self {
        let debounce = Duration::from_millis(config.scheduler.debounce_ms);
        let render_workers = config.scheduler.render_workers.max(1);
        let shared = Arc::new(Shared {
            config,
            registry,
            queue: SharedQueue::new(debounce),
            sessions: Mutex::new(HashMap::new()),
            sinks: Mutex::new(Vec::new()),
        });
        let mut workers = Vec::new();
        let spawn = |name: String, f: Box<dyn FnOnce() + Send>| {
            std::thread::Builder::new().name(name).spawn(f).expect("spawn worker thread")
        };
        let sh = shared.clone();
        workers.push(spawn("debounce".into(), Box::new(move || sh.queue.run_debounce_timer())));
        let sh = shared.clone();
        workers.push(spawn("compile".into(), Box::new(move || sh.compile_loop())));
        for i in 0..render_workers {
            let sh = shared.clone();
            workers.push(spawn(format!("render-{i}"), Box::new(move || sh.render_loop())));
        }
        Engine { shared, workers: Mutex::new(workers) }
    }

    pub fn config(&self) -> &ServerConfig {
        &self.shared.config
    }

    pub fn subscribe(&self, sink: Sink) {
        lock(&self.shared.sinks).push(sink);
    }

    /// Stop the workers; queued jobs are abandoned.
    pub fn shutdown(&self) {
        self.shared.queue.close();
        for h in lock(&self.workers).drain(..) {
            let _ = h.join();
        }
    }

    fn session(&self, id: &str) -> Result<Arc<Mutex<Session>>, ApiError> {
        lock(&self.shared.sessions).get(id).cloned().ok_or_else(|| ApiError::UnknownSession(id.to_string()))
    }

    /// Open a session. With `resume`, a live or stored session of that id is
    /// returned; an unknown id starts a fresh session under that name.
    pub fn open_session(
        &self,
        toolchain_id: &str,
        width: Option<u32>,
        height: Option<u32>,
        resume: Option<&str>,
    ) -> Result<String, ApiError> {
        let toolchain =
            self.shared.registry.get(toolchain_id).ok_or_else(|| ApiError::UnknownToolchain(toolchain_id.into()))?;
        if width == Some(0) || height == Some(0) {
            return Err(ApiError::InvalidParams("resolution must be positive".into()));
        }
        let id = match resume {
            Some(id) if !valid_session_id(id) => return Err(ApiError::InvalidParams(format!("bad session id {id:?}"))),
            Some(id) => id.to_string(),
            None => uuid::Uuid::new_v4().simple().to_string(),
        };
        let mut sessions = lock(&self.shared.sessions);
        if let Some(existing) = sessions.get(&id) {
            let s = lock(existing);
            if s.toolchain.id() != toolchain_id {
                return Err(ApiError::InvalidParams(format!("session {id} uses toolchain {}", s.toolchain.id())));
            }
            return Ok(id);
        }
        let dir = self.shared.config.store_dir.as_ref().map(|d| d.join(&id));
        let saved: Option<SessionFile> = dir
            .as_ref()
            .and_then(|d| fs::read(d.join("session.json")).ok())
            .map(|bytes| serde_json::from_slice(&bytes))
            .transpose()
            .map_err(|e| ApiError::Internal(format!("session {id}: {e}")))?;
        if let Some(saved) = &saved {
            if saved.toolchain_id != toolchain_id {
                return Err(ApiError::InvalidParams(format!("session {id} uses toolchain {}", saved.toolchain_id)));
            }
        }
        let store = match &dir {
            Some(d) => RevisionStore::open(d.join("store"))?,
            None => RevisionStore::in_memory(),
        };
        let cfg = &self.shared.config;
        let mut session = Session {
            id: id.clone(),
            profile: toolchain.scope_profile(),
            toolchain,
            store,
            current: None,
            params: ParameterSet::new(),
            expanded: ExpandState::new(),
            width: width.unwrap_or(cfg.width),
            height: height.unwrap_or(cfg.height),
            dir,
            ssts: HashMap::new(),
            decls: HashMap::new(),
            artifacts: ArtifactCache::new(cfg.scheduler.artifact_cache_size),
            images: HashMap::new(),
            variance: HashMap::new(),
            batches: HashMap::new(),
        };
        if let Some(saved) = saved {
            session.current = saved.current_revision.filter(|c| session.store.contains(c));
            session.params = saved.active_params;
            session.expanded = saved.expand_state;
            session.width = width.unwrap_or(saved.width);
            session.height = height.unwrap_or(saved.height);
            log::info!("resumed session {id} with {} revisions", session.store.len());
        }
        session.persist();
        let list = session.refresh_list(false);
        self.shared.schedule(&mut session, list);
        sessions.insert(id.clone(), Arc::new(Mutex::new(session)));
        Ok(id)
    }

    /// Feed an edit into the debounce. A source equal to the current
    /// revision is dropped when its compile job comes up.
    pub fn update_source(&self, session: &str, files: BTreeMap<String, String>) -> Result<(), ApiError> {
        let s = self.session(session)?;
        let s = lock(&s);
        let source = SourceState::new(s.toolchain.id(), files)?;
        self.shared.queue.with(|q, now| q.on_edit(&s.id, source, now));
        Ok(())
    }

    pub fn checkout(&self, session: &str, revision: &str) -> Result<SourceState, ApiError> {
        let id: RevisionId = revision.parse().map_err(|_| ApiError::UnknownRevision(revision.into()))?;
        let s = self.session(session)?;
        let mut s = lock(&s);
        let source = s.source_of(&id)?;
        s.current = Some(id);
        s.persist();
        let list = s.refresh_list(true);
        self.shared.schedule(&mut s, list);
        let note = Notification::new("tree.changed", &s.id, json!({}));
        drop(s);
        self.shared.notify(vec![note]);
        Ok(source)
    }

    pub fn view_tree(&self, session: &str) -> Result<TreeView, ApiError> {
        let s = self.session(session)?;
        let mut s = lock(&s);
        s.tree_view()
    }

    /// Branch view only, for callers that do not need the groups.
    pub fn branch_view(&self, session: &str) -> Result<Option<BranchView>, ApiError> {
        Ok(self.view_tree(session)?.branch)
    }

    pub fn diff(&self, session: &str, from: &str, to: &str, direction: Direction) -> Result<Vec<FileDiff>, ApiError> {
        let parse = |r: &str| r.parse::<RevisionId>().map_err(|_| ApiError::UnknownRevision(r.into()));
        let (from, to) = (parse(from)?, parse(to)?);
        let s = self.session(session)?;
        let s = lock(&s);
        let (a, b) = (s.source_of(&from)?, s.source_of(&to)?);
        Ok(match direction {
            Direction::Forward => revision_diff(&a, &b),
            Direction::Reverse => revision_diff(&b, &a),
        })
    }

    /// Merge `values` into the active set and re-render the branch, current
    /// revision first. Returns the new generation.
    pub fn set_params(&self, session: &str, values: BTreeMap<String, ParamValue>) -> Result<u64, ApiError> {
        let s = self.session(session)?;
        let mut s = lock(&s);
        for id in s.branch() {
            let decls = s.decls(&id);
            params::check_types(&decls, &values).map_err(ApiError::TypeMismatch)?;
        }
        let generation = s.params.update(values);
        s.variance.clear();
        s.persist();
        let list = s.refresh_list(false);
        self.shared.schedule(&mut s, list);
        Ok(generation)
    }

    pub fn image(&self, session: &str, reference: &str) -> Result<Arc<Image>, ApiError> {
        let unknown = || ApiError::UnknownImage(reference.to_string());
        let r = ImageRef::parse(reference).ok_or_else(unknown)?;
        let s = self.session(session)?;
        let mut s = lock(&s);
        match r {
            ImageRef::Result { revision, generation } => match s.images.get(&revision) {
                Some((g, img)) if *g == generation => Ok(img.clone()),
                _ => Err(unknown()),
            },
            ImageRef::Variance { group, generation } => s.variance(group, generation),
        }
    }

    pub fn expand(&self, session: &str, group: GroupId, expanded: bool) -> Result<(), ApiError> {
        let s = self.session(session)?;
        let mut s = lock(&s);
        let groups = metavis::compress_tree(&s.store.tree_nodes());
        let g = groups.get(group as usize).ok_or(ApiError::UnknownGroup(group))?;
        if g.members.len() > 1 {
            if expanded {
                s.expanded.insert(group);
            } else {
                s.expanded.remove(&group);
            }
            s.persist();
        }
        Ok(())
    }

    /// Number of revisions in a session's store.
    pub fn revision_count(&self, session: &str) -> Result<usize, ApiError> {
        let s = self.session(session)?;
        let n = lock(&s).store.len();
        Ok(n)
    }

    pub fn current_revision(&self, session: &str) -> Result<Option<RevisionId>, ApiError> {
        let s = self.session(session)?;
        let current = lock(&s).current;
        Ok(current)
    }
}

impl Drop for Engine {
    fn drop(&mut self) {
        self.shutdown();
    }
}

impl Shared {
    fn session(&self, id: &str) -> Option<Arc<Mutex<Session>>> {
        lock(&self.sessions).get(id).cloned()
    }

    fn notify(&self, notes: Vec<Notification>) {
        if notes.is_empty() {
            return;
        }
        let mut sinks = lock(&self.sinks);
        for n in &notes {
            log::debug!("{} {}", n.method, n.params);
            sinks.retain(|sink| sink(n));
        }
    }

    /// Queue renders for `list` (enqueue order) at the session's generation.
    fn schedule(&self, s: &mut Session, list: Vec<RevisionId>) {
        let params = s.params.clone();
        let (enqueued, dropped) = self.queue.with(|q, now| q.schedule_branch_refresh(&s.id, &list, &params, now));
        if !dropped.is_empty() {
            log::debug!("dropped {} superseded renders of session {}", dropped.len(), s.id);
        }
        s.batches.retain(|_, b| b.generation >= params.generation);
        if let Some(&first) = enqueued.first() {
            s.batches.insert(
                first,
                Batch { generation: params.generation, len: enqueued.len(), next: 0, done: BTreeMap::new() },
            );
        }
    }

    fn compile_loop(&self) {
        while let Some(job) = self.queue.wait_compile() {
            let JobPayload::Compile { source } = job.payload else { continue };
            let Some(session) = self.session(&job.session) else { continue };
            let toolchain = {
                let s = lock(&session);
                if s.current_source().as_ref() == Some(&source) {
                    log::debug!("session {}: source equals the current revision; nothing to do", s.id);
                    continue;
                }
                s.toolchain.clone()
            };
            let result = toolchain.compile(&source);
            let (notes, committed) = self.finish_compile(&session, job.seq, source, result);
            // Notify before scheduling the render so compile.succeeded comes first.
            self.notify(notes);
            if let Some(id) = committed {
                let mut s = lock(&session);
                if s.current == Some(id) {
                    self.schedule(&mut s, vec![id]);
                }
            }
        }
    }

    fn finish_compile(
        &self,
        session: &Mutex<Session>,
        seq: u64,
        source: SourceState,
        result: Result<CompileResult, ToolchainError>,
    ) -> (Vec<Notification>, Option<RevisionId>) {
        let mut s = lock(session);
        let failed = |s: &Session, diagnostics: Vec<Diagnostic>| {
            (vec![Notification::new("compile.failed", &s.id, json!({"diagnostics": diagnostics}))], None)
        };
        let compiled = match result {
            Ok(r) => r,
            Err(e) => return failed(&s, vec![Diagnostic::general(e.to_string())]),
        };
        let Some(artifact) = compiled.artifact else { return failed(&s, compiled.diagnostics) };
        let decls = match params::extract_params(&source, s.toolchain.as_ref()) {
            Ok(d) => d,
            Err(e) => return failed(&s, vec![Diagnostic::general(e.to_string())]),
        };
        let tree = scope_tree(&source, &s.profile);
        let parent = s.current;
        let id = match s.store.commit(parent.as_ref(), source, tree.scope_hash()) {
            Ok(id) => id,
            Err(e) => return failed(&s, vec![Diagnostic::general(format!("could not store revision: {e}"))]),
        };
        s.ssts.insert(id, tree);
        s.decls.insert(id, decls);
        s.artifacts.insert(id, artifact);
        s.current = Some(id);
        s.persist();
        self.queue.with(|q, _| q.mark_compile_succeeded(&s.id, seq));
        let notes = vec![
            Notification::new(
                "compile.succeeded",
                &s.id,
                json!({"revisionId": id, "parent": parent, "diagnostics": compiled.diagnostics}),
            ),
            Notification::new("tree.changed", &s.id, json!({})),
        ];
        (notes, Some(id))
    }

    fn render_loop(&self) {
        while let Some(job) = self.queue.wait_render() {
            let JobPayload::Render { revision, params: active, order, batch } = job.payload else { continue };
            let Some(session) = self.session(&job.session) else { continue };
            let prepared = {
                let mut s = lock(&session);
                if active.generation < s.params.generation {
                    s.batches.remove(&batch);
                    continue;
                }
                let decls = s.decls(&revision);
                let effective = params::effective_params(&decls, &active);
                let cached = s.artifacts.get(&revision);
                let source = s.store.checkout(&revision).ok();
                (s.toolchain.clone(), cached, source, effective, s.width, s.height)
            };
            let (toolchain, cached, source, effective, width, height) = prepared;
            let image = self.render_one(&session, toolchain.as_ref(), revision, cached, source, effective, width, height);
            let notes = lock(&session).complete(batch, order, image.map(|img| (revision, Arc::new(img))));
            self.notify(notes);
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn render_one(
        &self,
        session: &Mutex<Session>,
        toolchain: &dyn ToolchainAdapter,
        revision: RevisionId,
        cached: Option<Artifact>,
        source: Option<SourceState>,
        effective: Result<ParameterSet, ParamError>,
        width: u32,
        height: u32,
    ) -> Option<Image> {
        let effective = effective.map_err(|e| log::warn!("render of {revision} skipped: {e}")).ok()?;
        let artifact = match cached {
            Some(a) => a,
            None => {
                let compiled = toolchain.compile(&source?).map_err(|e| log::warn!("recompile of {revision}: {e}")).ok()?;
                let Some(a) = compiled.artifact else {
                    log::warn!("revision {revision} no longer compiles");
                    return None;
                };
                lock(session).artifacts.insert(revision, a.clone());
                a
            }
        };
        toolchain
            .run(&artifact, &effective, width, height)
            .map_err(|e| log::warn!("render of {revision} failed: {e}"))
            .ok()
    }
}
