//! Contract between the server and the compile/run backends.

use std::any::Any;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::image::{Image, ImageError};
use crate::params::{ParameterDecl, ParameterSet};
use crate::revision::SourceState;
use crate::scope::LanguageProfile;

#[derive(Debug, Error)]
pub enum ToolchainError {
    #[error("command timed out after {0} s")]
    Timeout(f64),
    #[error("run produced no image at {0}")]
    MissingOutputImage(String),
    #[error("run command failed: {0}")]
    RunFailed(String),
    #[error("artifact was not produced by toolchain {0}")]
    ForeignArtifact(String),
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A compiler message. Messages that could not be attributed to a source
/// location have no `file`, `line` or `col`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub file: Option<String>,
    pub line: Option<usize>,
    pub col: Option<usize>,
    pub message: String,
    /// Machine-readable class, when the toolchain provides one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub code: Option<String>,
}

impl Diagnostic {
    pub fn at(file: &str, line: usize, col: usize, code: &str, message: impl Into<String>) -> Self {
        Diagnostic {
            file: Some(file.to_string()),
            line: Some(line),
            col: Some(col),
            message: message.into(),
            code: Some(code.to_string()),
        }
    }

    pub fn general(message: impl Into<String>) -> Self {
        Diagnostic { file: None, line: None, col: None, message: message.into(), code: None }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.file, self.line, self.col) {
            (Some(file), Some(l), Some(c)) => write!(f, "{file}:{l}:{c}: {}", self.message),
            (Some(file), _, _) => write!(f, "{file}: {}", self.message),
            _ => f.write_str(&self.message),
        }
    }
}

/// Opaque compiled program, shared immutably between render workers.
#[derive(Clone)]
pub struct Artifact(Arc<dyn Any + Send + Sync>);

impl Artifact {
    pub fn new<T: Any + Send + Sync>(inner: T) -> Self {
        Artifact(Arc::new(inner))
    }

    pub fn downcast_ref<T: Any>(&self) -> Option<&T> {
        self.0.downcast_ref()
    }
}

impl fmt::Debug for Artifact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Artifact")
    }
}

/// Outcome of a compile: an artifact, or at least one diagnostic.
#[derive(Debug, Clone)]
pub struct CompileResult {
    pub diagnostics: Vec<Diagnostic>,
    pub artifact: Option<Artifact>,
}

impl CompileResult {
    pub fn success(artifact: Artifact, warnings: Vec<Diagnostic>) -> Self {
        CompileResult { diagnostics: warnings, artifact: Some(artifact) }
    }

    /// A failure with no diagnostics gets a generic one.
    pub fn failure(mut diagnostics: Vec<Diagnostic>) -> Self {
        if diagnostics.is_empty() {
            diagnostics.push(Diagnostic::general("compilation failed"));
        }
        CompileResult { diagnostics, artifact: None }
    }

    pub fn ok(&self) -> bool {
        self.artifact.is_some()
    }
}

/// A compile/run backend for one language.
///
/// `run` must be deterministic in `(artifact, params, width, height)` and
/// `compile` must not modify the source.
pub trait ToolchainAdapter: Send + Sync {
    fn id(&self) -> &str;

    /// Comment and string syntax used to extract scope trees.
    fn scope_profile(&self) -> LanguageProfile {
        LanguageProfile::c_like()
    }

    fn declared_params(&self, source: &SourceState) -> Result<Vec<ParameterDecl>, ToolchainError>;

    fn compile(&self, source: &SourceState) -> Result<CompileResult, ToolchainError>;

    fn run(&self, artifact: &Artifact, params: &ParameterSet, width: u32, height: u32) -> Result<Image, ToolchainError>;
}
