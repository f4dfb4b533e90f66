use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use livevis_core::toolchain::{ToolchainAdapter, ToolchainError};

use crate::external::ExternalToolchain;
use crate::minivis::MiniVis;

/// Adapters by id.
#[derive(Clone, Default)]
pub struct Registry {
    adapters: BTreeMap<String, Arc<dyn ToolchainAdapter>>,
}

impl Registry {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Only the built-in MiniVis toolchain.
    pub fn builtin() -> Self {
        let mut r = Self::empty();
        r.register(Arc::new(MiniVis));
        r
    }

    /// Built-ins plus every `*.json` manifest in `dir`.
    pub fn with_manifests(dir: &Path) -> Result<Self, ToolchainError> {
        let mut r = Self::builtin();
        let mut paths: Vec<_> = std::fs::read_dir(dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|e| e == "json"))
            .collect();
        paths.sort();
        for path in paths {
            let tc = ExternalToolchain::from_file(&path)?;
            log::info!("registered toolchain {} from {}", tc.id(), path.display());
            r.register(Arc::new(tc));
        }
        Ok(r)
    }

    /// Add or replace an adapter.
    pub fn register(&mut self, adapter: Arc<dyn ToolchainAdapter>) {
        self.adapters.insert(adapter.id().to_string(), adapter);
    }

    pub fn get(&self, id: &str) -> Option<Arc<dyn ToolchainAdapter>> {
        self.adapters.get(id).cloned()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.adapters.keys().map(String::as_str)
    }
}

impl std::fmt::Debug for Registry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_list().entries(self.ids()).finish()
    }
}
