use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{anyhow, bail, Context};
use clap::{Parser, Subcommand};
use livevis_core::params::{ParamValue, ParameterSet};
use livevis_core::{line_diff, variance_image, Image, RevisionStore, SourceState};
use livevis_server::engine::scope_tree;
use livevis_server::{Engine, ServerConfig};
use livevis_toolchain::Registry;

#[derive(Parser)]
#[command(name = "livevis", version, about = "Live visualization development server and tools")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the JSON-RPC WebSocket server.
    Serve {
        /// JSON config file.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        listen: Option<String>,
        #[arg(long)]
        store_dir: Option<PathBuf>,
        #[arg(long)]
        toolchain_dir: Option<PathBuf>,
        #[arg(long)]
        debounce_ms: Option<u64>,
        #[arg(long)]
        render_workers: Option<usize>,
    },
    /// Compile and render source files to a PPM or PNG image.
    Render {
        files: Vec<PathBuf>,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long, default_value = "minivis")]
        toolchain: String,
        #[arg(long)]
        toolchain_dir: Option<PathBuf>,
        #[arg(long, default_value_t = 256)]
        width: u32,
        #[arg(long, default_value_t = 256)]
        height: u32,
        /// `name=value` or `name=x,y,z`; repeatable.
        #[arg(short, long = "param")]
        params: Vec<String>,
    },
    /// Print the scope tree of source files as JSON.
    Sst {
        files: Vec<PathBuf>,
        #[arg(long, default_value = "minivis")]
        toolchain: String,
        #[arg(long)]
        toolchain_dir: Option<PathBuf>,
    },
    /// Line diff of two files in unified format.
    Diff { from: PathBuf, to: PathBuf },
    /// Variance image of equally sized PPM/PNG images.
    Variance {
        images: Vec<PathBuf>,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// List the revisions of a session store directory.
    Log { store: PathBuf },
}

fn registry(dir: Option<&Path>) -> anyhow::Result<Registry> {
    Ok(match dir {
        Some(d) => Registry::with_manifests(d)?,
        None => Registry::builtin(),
    })
}

fn read_source(toolchain: &str, files: &[PathBuf]) -> anyhow::Result<SourceState> {
    if files.is_empty() {
        bail!("no source files given");
    }
    let mut map = BTreeMap::new();
    for f in files {
        let text = std::fs::read_to_string(f).with_context(|| format!("reading {}", f.display()))?;
        let name = f.to_string_lossy().into_owned();
        let key = if f.is_relative() && !name.split('/').any(|s| s == "..") {
            name
        } else {
            f.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or(name)
        };
        map.insert(key, text);
    }
    Ok(SourceState::new(toolchain, map)?)
}

fn parse_param(s: &str) -> anyhow::Result<(String, ParamValue)> {
    let (name, value) = s.split_once('=').ok_or_else(|| anyhow!("expected name=value, got {s}"))?;
    let nums = value.split(',').map(|v| v.trim().parse::<f64>()).collect::<Result<Vec<_>, _>>()?;
    let value = match nums.as_slice() {
        [v] => ParamValue::Float(*v),
        [x, y, z] => ParamValue::Vec3([*x, *y, *z]),
        _ => bail!("value of {name} must have 1 or 3 components"),
    };
    Ok((name.to_string(), value))
}

fn read_image(path: &Path) -> anyhow::Result<Image> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(if bytes.starts_with(b"P6") { Image::decode_ppm(&bytes)? } else { Image::decode_png(&bytes)? })
}

fn write_image(path: &Path, img: &Image) -> anyhow::Result<()> {
    let bytes = match path.extension().and_then(|e| e.to_str()) {
        Some("ppm") => img.encode_ppm(),
        _ => img.encode_png(),
    };
    std::fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

/// Write to stdout; a closed pipe (`livevis sst ... | head`) is not an error.
fn emit(text: &str) -> anyhow::Result<()> {
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

#[allow(clippy::too_many_arguments)]
fn serve(
    config: Option<PathBuf>,
    listen: Option<String>,
    store_dir: Option<PathBuf>,
    toolchain_dir: Option<PathBuf>,
    debounce_ms: Option<u64>,
    render_workers: Option<usize>,
) -> anyhow::Result<()> {
    let mut cfg = match config {
        Some(p) => ServerConfig::load(&p)?,
        None => ServerConfig::default(),
    };
    cfg.listen = listen.unwrap_or(cfg.listen);
    cfg.store_dir = store_dir.or(cfg.store_dir);
    cfg.toolchain_dir = toolchain_dir.or(cfg.toolchain_dir);
    cfg.scheduler.debounce_ms = debounce_ms.unwrap_or(cfg.scheduler.debounce_ms);
    cfg.scheduler.render_workers = render_workers.unwrap_or(cfg.scheduler.render_workers);
    let registry = registry(cfg.toolchain_dir.as_deref())?;
    let addr = cfg.listen.clone();
    let engine = Arc::new(Engine::start(cfg, registry));
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind(&addr).await?;
        log::info!("listening on ws://{}", listener.local_addr()?);
        let shutdown = async {
            let _ = tokio::signal::ctrl_c().await;
        };
        livevis_server::ws::serve(engine.clone(), listener, shutdown).await
    })?;
    engine.shutdown();
    Ok(())
}

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Serve { config, listen, store_dir, toolchain_dir, debounce_ms, render_workers } => {
            serve(config, listen, store_dir, toolchain_dir, debounce_ms, render_workers)?
        }
        Command::Render { files, output, toolchain, toolchain_dir, width, height, params } => {
            let tc = registry(toolchain_dir.as_deref())?
                .get(&toolchain)
                .ok_or_else(|| anyhow!("unknown toolchain {toolchain}"))?;
            let source = read_source(&toolchain, &files)?;
            let compiled = tc.compile(&source)?;
            for d in &compiled.diagnostics {
                eprintln!("{d}");
            }
            let artifact = compiled.artifact.ok_or_else(|| anyhow!("compilation failed"))?;
            let mut set = ParameterSet::new();
            set.values = params.iter().map(|p| parse_param(p)).collect::<anyhow::Result<_>>()?;
            let decls = livevis_core::params::extract_params(&source, tc.as_ref())?;
            let effective = livevis_core::params::effective_params(&decls, &set)?;
            write_image(&output, &tc.run(&artifact, &effective, width, height)?)?;
        }
        Command::Sst { files, toolchain, toolchain_dir } => {
            let tc = registry(toolchain_dir.as_deref())?
                .get(&toolchain)
                .ok_or_else(|| anyhow!("unknown toolchain {toolchain}"))?;
            let tree = scope_tree(&read_source(&toolchain, &files)?, &tc.scope_profile());
            emit(&format!("{}\n", serde_json::to_string_pretty(&tree)?))?;
        }
        Command::Diff { from, to } => {
            let a = std::fs::read_to_string(&from)?;
            let b = std::fs::read_to_string(&to)?;
            let mut d = line_diff(&a, &b);
            d.path = to.to_string_lossy().into_owned();
            emit(&d.to_unified())?;
        }
        Command::Variance { images, output } => {
            let imgs = images.iter().map(|p| read_image(p)).collect::<anyhow::Result<Vec<_>>>()?;
            write_image(&output, &variance_image(&imgs)?)?;
        }
        Command::Log { store } => {
            let store = RevisionStore::load(&store)?;
            let mut text = String::new();
            for r in store.revisions() {
                let parent = r.parent.map(|p| p.to_hex()[..12].to_string()).unwrap_or_else(|| "-".into());
                text += &format!("{:>4} {} parent {} sst {}\n", r.seq, &r.id.to_hex()[..12], parent, r.sst_hash);
            }
            emit(&text)?;
        }
    }
    Ok(())
}
