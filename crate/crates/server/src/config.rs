use std::path::{Path, PathBuf};

use livevis_core::SchedulerConfig;
use serde::{Deserialize, Serialize};

/// Server settings, read from a JSON file with camelCase keys. Scheduler keys
/// (`debounceMs`, `renderWorkers`, `artifactCacheSize`) sit at the top level.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct ServerConfig {
    pub listen: String,
    /// Directory of `<id>.json` toolchain manifests.
    pub toolchain_dir: Option<PathBuf>,
    /// Root for per-session stores; sessions live in memory when unset.
    pub store_dir: Option<PathBuf>,
    pub width: u32,
    pub height: u32,
    #[serde(flatten)]
    pub scheduler: SchedulerConfig,
}

impl Default for ServerConfig {
    fn default() -> Self {
        ServerConfig {
            listen: "127.0.0.1:7878".into(),
            toolchain_dir: None,
            store_dir: None,
            width: 256,
            height: 256,
            scheduler: SchedulerConfig::default(),
        }
    }
}

impl ServerConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}
