//! Adapter that drives an external compiler and renderer through shell
//! commands described by a JSON manifest.
//!
//! Command templates may use `{srcDir}`, `{outDir}`, `{artifact}`,
//! `{width}`, `{height}`, `{paramsFile}` and `{runDir}`. Build commands run in
//! a scratch directory holding `src/` (the source files) and `out/`; each run
//! gets its own directory, so runs of one artifact may proceed in parallel.

use std::fs;
use std::os::unix::process::CommandExt;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitStatus, Stdio};
use std::sync::{Arc, OnceLock};
use std::time::{Duration, Instant};

use livevis_core::image::Image;
use livevis_core::params::{ParameterDecl, ParameterSet};
use livevis_core::scope::LanguageProfile;
use livevis_core::toolchain::{Artifact, CompileResult, Diagnostic, ToolchainAdapter, ToolchainError};
use livevis_core::SourceState;
use regex::Regex;
use serde::{Deserialize, Serialize};
use tempfile::TempDir;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Manifest {
    pub build_cmd: String,
    pub run_cmd: String,
    /// Where the run leaves its image; may use placeholders, relative paths
    /// resolve against the run directory.
    pub image_path: String,
    pub timeout_seconds: f64,
    /// Parameters every program of this toolchain accepts.
    #[serde(default)]
    pub params: Vec<ParameterDecl>,
    /// Comment and string syntax of the language.
    #[serde(default)]
    pub profile: Option<LanguageProfile>,
}

#[derive(Debug)]
pub struct ExternalToolchain {
    id: String,
    manifest: Manifest,
}

/// Build output kept alive for as long as any clone of the artifact exists.
#[derive(Debug)]
struct Built {
    toolchain: String,
    dir: TempDir,
}

impl Built {
    fn src_dir(&self) -> PathBuf {
        self.dir.path().join("src")
    }

    fn out_dir(&self) -> PathBuf {
        self.dir.path().join("out")
    }
}

struct Finished {
    status: ExitStatus,
    stderr: String,
}

fn diagnostic_line() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^(.+?):(\d+):(\d+): (.*)$").expect("valid regex"))
}

/// One diagnostic per non-empty stderr line; lines not in
/// `file:line:col: message` form keep their text without a location.
pub fn parse_diagnostics(stderr: &str) -> Vec<Diagnostic> {
    stderr
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|line| match diagnostic_line().captures(line) {
            Some(c) => Diagnostic {
                file: Some(c[1].to_string()),
                line: c[2].parse().ok(),
                col: c[3].parse().ok(),
                message: c[4].to_string(),
                code: None,
            },
            None => Diagnostic::general(line),
        })
        .collect()
}

fn expand(template: &str, vars: &[(&str, String)]) -> String {
    vars.iter().fold(template.to_string(), |acc, (k, v)| acc.replace(&format!("{{{k}}}"), v))
}

fn path_str(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

/// Run `cmd` through `sh -c` in `cwd`, killing its process group after
/// `timeout`.
fn run_shell(cmd: &str, cwd: &Path, timeout: Duration) -> Result<Finished, ToolchainError> {
    let stderr_path = cwd.join(".stderr");
    let mut child = Command::new("sh")
        .arg("-c")
        .arg(cmd)
        .current_dir(cwd)
        .stdin(Stdio::null())
        .stdout(Stdio::null())
        .stderr(fs::File::create(&stderr_path)?)
        .process_group(0)
        .spawn()?;
    let start = Instant::now();
    let status = loop {
        if let Some(status) = child.try_wait()? {
            break status;
        }
        if start.elapsed() >= timeout {
            // SAFETY: plain syscall on the child's own process group.
            unsafe {
                libc::kill(-(child.id() as i32), libc::SIGKILL);
            }
            let _ = child.wait();
            return Err(ToolchainError::Timeout(timeout.as_secs_f64()));
        }
        std::thread::sleep(Duration::from_millis(5));
    };
    let stderr = fs::read_to_string(&stderr_path).unwrap_or_default();
    Ok(Finished { status, stderr })
}

impl ExternalToolchain {
    pub fn new(id: impl Into<String>, manifest: Manifest) -> Self {
        ExternalToolchain { id: id.into(), manifest }
    }

    /// Load `<dir>/<id>.json`; the file stem is the toolchain id.
    pub fn from_file(path: &Path) -> Result<Self, ToolchainError> {
        let id = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .ok_or_else(|| ToolchainError::RunFailed(format!("bad manifest path {}", path.display())))?;
        let text = fs::read_to_string(path)?;
        let manifest = serde_json::from_str(&text)
            .map_err(|e| ToolchainError::RunFailed(format!("manifest {}: {e}", path.display())))?;
        Ok(Self::new(id, manifest))
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    fn timeout(&self) -> Duration {
        Duration::from_secs_f64(self.manifest.timeout_seconds.max(0.0))
    }
}

impl ToolchainAdapter for ExternalToolchain {
    fn id(&self) -> &str {
        &self.id
    }

    fn scope_profile(&self) -> LanguageProfile {
        self.manifest.profile.clone().unwrap_or_else(LanguageProfile::c_like)
    }

    fn declared_params(&self, _source: &SourceState) -> Result<Vec<ParameterDecl>, ToolchainError> {
        Ok(self.manifest.params.clone())
    }

    fn compile(&self, source: &SourceState) -> Result<CompileResult, ToolchainError> {
        let built = Built { toolchain: self.id.clone(), dir: tempfile::Builder::new().prefix("build-").tempdir()? };
        fs::create_dir(built.out_dir())?;
        for (path, text) in &source.files {
            let target = built.src_dir().join(path);
            fs::create_dir_all(target.parent().expect("file path has a parent"))?;
            fs::write(target, text)?;
        }
        let cmd = expand(&self.manifest.build_cmd, &[
            ("srcDir", path_str(&built.src_dir())),
            ("outDir", path_str(&built.out_dir())),
            ("artifact", path_str(&built.out_dir().join("artifact"))),
        ]);
        let done = run_shell(&cmd, built.dir.path(), self.timeout())?;
        let diags = parse_diagnostics(&done.stderr);
        Ok(if done.status.success() {
            CompileResult::success(Artifact::new(Arc::new(built)), diags)
        } else {
            log::debug!("{} build exited with {}", self.id, done.status);
            CompileResult::failure(diags)
        })
    }

    fn run(&self, artifact: &Artifact, params: &ParameterSet, width: u32, height: u32) -> Result<Image, ToolchainError> {
        let built = artifact
            .downcast_ref::<Arc<Built>>()
            .filter(|b| b.toolchain == self.id)
            .ok_or_else(|| ToolchainError::ForeignArtifact(self.id.clone()))?;
        let run_dir = tempfile::Builder::new().prefix("run-").tempdir()?;
        let params_file = run_dir.path().join("params.json");
        fs::write(&params_file, params.to_json().to_string())?;
        let vars = [
            ("srcDir", path_str(&built.src_dir())),
            ("outDir", path_str(&built.out_dir())),
            ("artifact", path_str(&built.out_dir().join("artifact"))),
            ("width", width.to_string()),
            ("height", height.to_string()),
            ("paramsFile", path_str(&params_file)),
            ("runDir", path_str(run_dir.path())),
        ];
        let done = run_shell(&expand(&self.manifest.run_cmd, &vars), run_dir.path(), self.timeout())?;
        if !done.status.success() {
            return Err(ToolchainError::RunFailed(format!("{}: {}", done.status, done.stderr.trim())));
        }
        let image_path = run_dir.path().join(expand(&self.manifest.image_path, &vars));
        let bytes = fs::read(&image_path).map_err(|_| ToolchainError::MissingOutputImage(path_str(&image_path)))?;
        Ok(if bytes.starts_with(b"P6") { Image::decode_ppm(&bytes)? } else { Image::decode_png(&bytes)? })
    }
}
