//! Compile/render job scheduling.
//!
//! Edits are debounced per session; a compile job is created once no newer
//! edit arrived for the debounce interval. Compiles always run before
//! renders, and within a class the most recent job runs first. Older queued
//! compiles are dropped when a newer compile of the same session succeeds,
//! and queued renders of a superseded parameter generation are dropped when
//! a branch refresh is scheduled.
//!
//! [`JobQueue`] is a plain state machine driven by an explicit clock, which
//! makes replays deterministic. [`SharedQueue`] wraps it for worker threads.

use std::collections::{BTreeMap, HashMap};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Condvar, Mutex, MutexGuard};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::params::ParameterSet;
use crate::revision::{RevisionId, SourceState};

pub type SessionId = String;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct SchedulerConfig {
    pub debounce_ms: u64,
    pub render_workers: usize,
    pub artifact_cache_size: usize,
}

impl Default for SchedulerConfig {
    fn default() -> Self {
        SchedulerConfig { debounce_ms: 1500, render_workers: 2, artifact_cache_size: 64 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum JobKind {
    Compile,
    Render,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum JobPayload {
    Compile {
        source: SourceState,
    },
    Render {
        revision: RevisionId,
        params: ParameterSet,
        /// Position in the refresh it belongs to; the first job to run is 0.
        order: usize,
        /// Sequence number of the first job of that refresh.
        batch: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Job {
    pub seq: u64,
    pub session: SessionId,
    pub payload: JobPayload,
    /// Clock time at which the job entered the queue.
    pub enqueued_at: Duration,
}

impl Job {
    pub fn kind(&self) -> JobKind {
        match self.payload {
            JobPayload::Compile { .. } => JobKind::Compile,
            JobPayload::Render { .. } => JobKind::Render,
        }
    }

    /// Parameter generation of a render job.
    pub fn param_gen(&self) -> Option<u64> {
        match &self.payload {
            JobPayload::Render { params, .. } => Some(params.generation),
            JobPayload::Compile { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("job queue is empty")]
pub struct QueueEmpty;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueueStats {
    pub enqueued: u64,
    pub dequeued: u64,
    pub dropped: u64,
}

#[derive(Debug)]
pub struct JobQueue {
    debounce: Duration,
    pending_edits: BTreeMap<SessionId, (SourceState, Duration)>,
    compiles: BTreeMap<u64, Job>,
    renders: BTreeMap<u64, Job>,
    next_seq: u64,
    stats: QueueStats,
}

impl JobQueue {
    pub fn new(debounce: Duration) -> Self {
        JobQueue {
            debounce,
            pending_edits: BTreeMap::new(),
            compiles: BTreeMap::new(),
            renders: BTreeMap::new(),
            next_seq: 1,
            stats: QueueStats::default(),
        }
    }

    pub fn debounce(&self) -> Duration {
        self.debounce
    }

    /// Record an edit; it replaces any pending edit of the session and
    /// restarts its quiet period.
    pub fn on_edit(&mut self, session: &str, source: SourceState, now: Duration) {
        self.pending_edits.insert(session.to_string(), (source, now + self.debounce));
    }

    /// Turn every edit whose quiet period has elapsed by `now` into a compile
    /// job. Returns the new job sequence numbers.
    pub fn advance(&mut self, now: Duration) -> Vec<u64> {
        let mut due: Vec<(Duration, SessionId)> = self
            .pending_edits
            .iter()
            .filter(|(_, (_, deadline))| *deadline <= now)
            .map(|(s, (_, deadline))| (*deadline, s.clone()))
            .collect();
        due.sort();
        due.into_iter()
            .map(|(deadline, session)| {
                let (source, _) = self.pending_edits.remove(&session).expect("due edit is pending");
                self.push(session, JobPayload::Compile { source }, deadline)
            })
            .collect()
    }

    /// Earliest time at which `advance` will produce a job.
    pub fn next_deadline(&self) -> Option<Duration> {
        self.pending_edits.values().map(|(_, d)| *d).min()
    }

    pub fn has_pending_edit(&self, session: &str) -> bool {
        self.pending_edits.contains_key(session)
    }

    fn push(&mut self, session: SessionId, payload: JobPayload, now: Duration) -> u64 {
        let seq = self.next_seq;
        self.next_seq += 1;
        let job = Job { seq, session, payload, enqueued_at: now };
        match job.kind() {
            JobKind::Compile => self.compiles.insert(seq, job),
            JobKind::Render => self.renders.insert(seq, job),
        };
        self.stats.enqueued += 1;
        seq
    }

    /// Enqueue a compile directly, bypassing the debounce.
    pub fn enqueue_compile(&mut self, session: &str, source: SourceState, now: Duration) -> u64 {
        self.push(session.to_string(), JobPayload::Compile { source }, now)
    }

    pub fn enqueue_render(&mut self, session: &str, revision: RevisionId, params: ParameterSet, now: Duration) -> u64 {
        let batch = self.next_seq;
        self.push(session.to_string(), JobPayload::Render { revision, params, order: 0, batch }, now)
    }

    /// The next job: the newest compile if any, otherwise the newest render.
    pub fn next(&mut self) -> Result<Job, QueueEmpty> {
        self.next_compile().or_else(|| self.next_render()).ok_or(QueueEmpty)
    }

    pub fn next_compile(&mut self) -> Option<Job> {
        let job = self.compiles.pop_last().map(|(_, j)| j)?;
        self.stats.dequeued += 1;
        Some(job)
    }

    /// The newest render, but only while no compile is waiting.
    pub fn next_render(&mut self) -> Option<Job> {
        if !self.compiles.is_empty() {
            return None;
        }
        let job = self.renders.pop_last().map(|(_, j)| j)?;
        self.stats.dequeued += 1;
        Some(job)
    }

    /// A compile of `session` with sequence `seq` succeeded: drop that
    /// session's queued compiles that are older. Returns the dropped seqs.
    pub fn mark_compile_succeeded(&mut self, session: &str, seq: u64) -> Vec<u64> {
        let stale: Vec<u64> = self
            .compiles
            .range(..seq)
            .filter(|(_, j)| j.session == session)
            .map(|(s, _)| *s)
            .collect();
        for s in &stale {
            self.compiles.remove(s);
        }
        self.stats.dropped += stale.len() as u64;
        stale
    }

    /// Queue one render per revision of `branch` (root first), so that the
    /// head renders first. Renders of this session from older parameter
    /// generations are dropped. Returns `(enqueued, dropped)` seqs.
    pub fn schedule_branch_refresh(
        &mut self,
        session: &str,
        branch: &[RevisionId],
        params: &ParameterSet,
        now: Duration,
    ) -> (Vec<u64>, Vec<u64>) {
        if branch.is_empty() {
            return (Vec::new(), Vec::new());
        }
        let dropped = self.drop_renders_where(|j| j.session == session && j.param_gen() < Some(params.generation));
        let last = branch.len() - 1;
        let batch = self.next_seq;
        let enqueued = branch
            .iter()
            .enumerate()
            .map(|(i, rev)| {
                self.push(
                    session.to_string(),
                    JobPayload::Render { revision: *rev, params: params.clone(), order: last - i, batch },
                    now,
                )
            })
            .collect();
        (enqueued, dropped)
    }

    /// Forget everything queued for `session`.
    pub fn drop_session(&mut self, session: &str) -> Vec<u64> {
        self.pending_edits.remove(session);
        let mut dropped = self.drop_renders_where(|j| j.session == session);
        let compiles: Vec<u64> = self.compiles.iter().filter(|(_, j)| j.session == session).map(|(s, _)| *s).collect();
        for s in &compiles {
            self.compiles.remove(s);
        }
        self.stats.dropped += compiles.len() as u64;
        dropped.extend(compiles);
        dropped
    }

    fn drop_renders_where(&mut self, pred: impl Fn(&Job) -> bool) -> Vec<u64> {
        let stale: Vec<u64> = self.renders.iter().filter(|(_, j)| pred(j)).map(|(s, _)| *s).collect();
        for s in &stale {
            self.renders.remove(s);
        }
        self.stats.dropped += stale.len() as u64;
        stale
    }

    pub fn len(&self) -> usize {
        self.compiles.len() + self.renders.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn queued(&self, kind: JobKind) -> usize {
        match kind {
            JobKind::Compile => self.compiles.len(),
            JobKind::Render => self.renders.len(),
        }
    }

    pub fn stats(&self) -> QueueStats {
        self.stats
    }
}

/// Thread-safe queue with blocking dequeue for worker threads.
#[derive(Debug)]
pub struct SharedQueue {
    inner: Mutex<JobQueue>,
    cond: Condvar,
    epoch: Instant,
    closed: AtomicBool,
}

impl SharedQueue {
    pub fn new(debounce: Duration) -> Self {
        SharedQueue {
            inner: Mutex::new(JobQueue::new(debounce)),
            cond: Condvar::new(),
            epoch: Instant::now(),
            closed: AtomicBool::new(false),
        }
    }

    pub fn now(&self) -> Duration {
        self.epoch.elapsed()
    }

    fn lock(&self) -> MutexGuard<'_, JobQueue> {
        self.inner.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Mutate the queue and wake waiting workers.
    pub fn with<R>(&self, f: impl FnOnce(&mut JobQueue, Duration) -> R) -> R {
        let now = self.now();
        let r = f(&mut self.lock(), now);
        self.cond.notify_all();
        r
    }

    pub fn close(&self) {
        self.closed.store(true, Ordering::SeqCst);
        self.cond.notify_all();
    }

    pub fn is_closed(&self) -> bool {
        self.closed.load(Ordering::SeqCst)
    }

    /// Move due edits into the queue until closed.
    pub fn run_debounce_timer(&self) {
        let mut q = self.lock();
        while !self.is_closed() {
            let now = self.now();
            if !q.advance(now).is_empty() {
                self.cond.notify_all();
            }
            let wait = q
                .next_deadline()
                .map_or(Duration::from_secs(1), |d| d.saturating_sub(now).max(Duration::from_millis(1)));
            q = self.cond.wait_timeout(q, wait).unwrap_or_else(|e| e.into_inner()).0;
        }
    }

    /// Block until a compile job is available or the queue is closed.
    pub fn wait_compile(&self) -> Option<Job> {
        self.wait(JobQueue::next_compile)
    }

    /// Block until a render job may run or the queue is closed.
    pub fn wait_render(&self) -> Option<Job> {
        self.wait(JobQueue::next_render)
    }

    fn wait(&self, take: impl Fn(&mut JobQueue) -> Option<Job>) -> Option<Job> {
        let mut q = self.lock();
        loop {
            if self.is_closed() {
                return None;
            }
            if let Some(job) = take(&mut q) {
                self.cond.notify_all();
                return Some(job);
            }
            q = self.cond.wait_timeout(q, Duration::from_millis(250)).unwrap_or_else(|e| e.into_inner()).0;
        }
    }
}

/// Least-recently-used map from revisions to compiled artifacts.
#[derive(Debug)]
pub struct ArtifactCache<V> {
    capacity: usize,
    tick: u64,
    entries: HashMap<RevisionId, (V, u64)>,
}

impl<V: Clone> ArtifactCache<V> {
    pub fn new(capacity: usize) -> Self {
        ArtifactCache { capacity: capacity.max(1), tick: 0, entries: HashMap::new() }
    }

    pub fn get(&mut self, id: &RevisionId) -> Option<V> {
        self.tick += 1;
        let tick = self.tick;
        self.entries.get_mut(id).map(|(v, used)| {
            *used = tick;
            v.clone()
        })
    }

    /// Insert or replace; returns the evicted revision, if any.
    pub fn insert(&mut self, id: RevisionId, value: V) -> Option<RevisionId> {
        self.tick += 1;
        self.entries.insert(id, (value, self.tick));
        if self.entries.len() <= self.capacity {
            return None;
        }
        let victim = self
            .entries
            .iter()
            .min_by_key(|(_, (_, used))| *used)
            .map(|(k, _)| *k)
            .expect("cache is non-empty");
        self.entries.remove(&victim);
        Some(victim)
    }

    pub fn contains(&self, id: &RevisionId) -> bool {
        self.entries.contains_key(id)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}
