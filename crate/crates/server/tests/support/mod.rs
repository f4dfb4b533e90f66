#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::mpsc::{channel, Receiver};
use std::sync::Arc;
use std::time::{Duration, Instant};

use livevis_core::SchedulerConfig;
use livevis_server::{Engine, Notification, ServerConfig};
use livevis_toolchain::Registry;

pub const WAIT: Duration = Duration::from_secs(20);

pub struct Harness {
    pub engine: Arc<Engine>,
    pub rx: Receiver<Notification>,
    pub seen: Vec<Notification>,
}

pub fn config(store: Option<&Path>) -> ServerConfig {
    ServerConfig {
        store_dir: store.map(Path::to_path_buf),
        width: 16,
        height: 16,
        scheduler: SchedulerConfig { debounce_ms: 20, ..SchedulerConfig::default() },
        ..ServerConfig::default()
    }
}

impl Harness {
    pub fn new(cfg: ServerConfig) -> Self {
        let engine = Arc::new(Engine::start(cfg, Registry::builtin()));
        let (tx, rx) = channel();
        engine.subscribe(Box::new(move |n| tx.send(n.clone()).is_ok()));
        Harness { engine, rx, seen: Vec::new() }
    }

    pub fn open(&self) -> String {
        self.engine.open_session("minivis", None, None, None).unwrap()
    }

    /// Receive notifications until `done` holds for the last one; returns
    /// everything received on the way.
    pub fn until(&mut self, done: impl Fn(&Notification) -> bool) -> Vec<Notification> {
        let deadline = Instant::now() + WAIT;
        let mut got = Vec::new();
        loop {
            let left = deadline.saturating_duration_since(Instant::now());
            let n = self.rx.recv_timeout(left).unwrap_or_else(|_| panic!("timed out; got {got:#?}"));
            self.seen.push(n.clone());
            let stop = done(&n);
            got.push(n);
            if stop {
                return got;
            }
        }
    }

    /// Everything that arrives within `quiet`.
    pub fn drain(&mut self, quiet: Duration) -> Vec<Notification> {
        let mut got = Vec::new();
        while let Ok(n) = self.rx.recv_timeout(quiet) {
            self.seen.push(n.clone());
            got.push(n);
        }
        got
    }

    /// Submit `text` as `main.mv` and wait for the compile outcome and, on
    /// success, the first image. Returns the compile notification.
    pub fn edit(&mut self, session: &str, text: &str) -> Notification {
        self.engine.update_source(session, files(text)).unwrap();
        let got = self.until(|n| n.method == "compile.failed" || n.method == "compile.succeeded");
        let outcome = got.last().unwrap().clone();
        if outcome.method == "compile.succeeded" {
            let rev = outcome.params["revisionId"].clone();
            self.until(|n| n.method == "image.ready" && n.params["revisionId"] == rev);
        }
        outcome
    }

    /// Wait for `count` image.ready events and return their revision ids in
    /// arrival order.
    pub fn images(&mut self, count: usize) -> Vec<String> {
        let mut out = Vec::new();
        while out.len() < count {
            let got = self.until(|n| n.method == "image.ready");
            out.push(got.last().unwrap().params["revisionId"].as_str().unwrap().to_string());
        }
        out
    }
}

pub fn files(text: &str) -> BTreeMap<String, String> {
    BTreeMap::from([("main.mv".to_string(), text.to_string())])
}

pub fn rev_of(n: &Notification) -> String {
    n.params["revisionId"].as_str().unwrap().to_string()
}
