use std::path::Path;
use std::time::{Duration, Instant};

use livevis_core::params::{ParamValue, ParameterDecl, ParameterSet};
use livevis_core::toolchain::{ToolchainAdapter, ToolchainError};
use livevis_core::SourceState;
use livevis_toolchain::{ExternalToolchain, Manifest, Registry};

fn manifest(build: &str, run: &str, image: &str, timeout: f64) -> Manifest {
    Manifest {
        build_cmd: build.into(),
        run_cmd: run.into(),
        image_path: image.into(),
        timeout_seconds: timeout,
        params: Vec::new(),
        profile: None,
    }
}

fn source() -> SourceState {
    SourceState::new("stub", [
        ("main.cpp".to_string(), "int main() {}\n".to_string()),
        ("lib/util.h".to_string(), "// util\n".to_string()),
    ])
    .unwrap()
}

const RED_PPM: &str = r"printf 'P6\n2 2\n255\n\377\0\0\377\0\0\377\0\0\377\0\0' > out.ppm";

#[test]
fn stub_writing_red_ppm() {
    let tc = ExternalToolchain::new("stub", manifest("true", RED_PPM, "out.ppm", 5.0));
    let compiled = tc.compile(&source()).unwrap();
    assert!(compiled.ok());
    let img = tc.run(compiled.artifact.as_ref().unwrap(), &ParameterSet::new(), 2, 2).unwrap();
    assert_eq!((img.width(), img.height()), (2, 2));
    assert!(img.pixels().all(|p| p == [255, 0, 0]));
}

#[test]
fn failing_build_forwards_diagnostics() {
    let tc = ExternalToolchain::new("stub", manifest(r#"echo "main.cpp:3:5: expected ';'" >&2; echo oops >&2; exit 1"#, "true", "x", 5.0));
    let compiled = tc.compile(&source()).unwrap();
    assert!(!compiled.ok());
    let d = &compiled.diagnostics;
    assert_eq!(d.len(), 2);
    assert_eq!((d[0].file.as_deref(), d[0].line, d[0].col), (Some("main.cpp"), Some(3), Some(5)));
    assert_eq!(d[0].message, "expected ';'");
    assert_eq!((d[1].file.as_ref(), d[1].message.as_str()), (None, "oops"));
}

#[test]
fn silent_failure_still_has_a_diagnostic() {
    let tc = ExternalToolchain::new("stub", manifest("exit 2", "true", "x", 5.0));
    let compiled = tc.compile(&source()).unwrap();
    assert!(!compiled.ok());
    assert_eq!(compiled.diagnostics.len(), 1);
}

#[test]
fn build_sees_sources_and_run_sees_artifact_and_params() {
    let build = "test -f {srcDir}/main.cpp && test -f {srcDir}/lib/util.h && echo built > {artifact}";
    let run = r#"grep -q built {artifact} && grep -q '"k":0.5' {paramsFile} && test {width}x{height} = 1x1 && printf 'P6 1 1 255 \0\377\0' > {runDir}/g.ppm"#;
    let tc = ExternalToolchain::new("stub", manifest(build, run, "g.ppm", 5.0));
    let compiled = tc.compile(&source()).unwrap();
    assert!(compiled.ok(), "{:?}", compiled.diagnostics);
    let params = ParameterSet::new().with("k", ParamValue::Float(0.5));
    let img = tc.run(compiled.artifact.as_ref().unwrap(), &params, 1, 1).unwrap();
    assert_eq!(img.pixel(0, 0), [0, 255, 0]);
}

#[test]
fn timeout_kills_the_command() {
    let tc = ExternalToolchain::new("stub", manifest("sleep 5", "true", "x", 0.3));
    let start = Instant::now();
    assert!(matches!(tc.compile(&source()), Err(ToolchainError::Timeout(_))));
    assert!(start.elapsed() < Duration::from_secs(3));
}

#[test]
fn missing_image_and_failed_run() {
    let tc = ExternalToolchain::new("stub", manifest("true", "true", "nothing.ppm", 5.0));
    let art = tc.compile(&source()).unwrap().artifact.unwrap();
    assert!(matches!(tc.run(&art, &ParameterSet::new(), 1, 1), Err(ToolchainError::MissingOutputImage(_))));
    let tc = ExternalToolchain::new("stub", manifest("true", "echo bad >&2; exit 3", "x", 5.0));
    let art = tc.compile(&source()).unwrap().artifact.unwrap();
    assert!(matches!(tc.run(&art, &ParameterSet::new(), 1, 1), Err(ToolchainError::RunFailed(m)) if m.contains("bad")));
}

#[test]
fn png_output_is_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let png = dir.path().join("blue.png");
    let img = livevis_core::Image::filled(3, 2, [0, 0, 255]);
    std::fs::write(&png, img.encode_png()).unwrap();
    let run = format!("cp {} out.png", png.display());
    let tc = ExternalToolchain::new("stub", manifest("true", &run, "out.png", 5.0));
    let art = tc.compile(&source()).unwrap().artifact.unwrap();
    assert_eq!(tc.run(&art, &ParameterSet::new(), 3, 2).unwrap(), img);
}

#[test]
fn artifacts_are_not_interchangeable() {
    let a = ExternalToolchain::new("a", manifest("true", RED_PPM, "out.ppm", 5.0));
    let b = ExternalToolchain::new("b", manifest("true", RED_PPM, "out.ppm", 5.0));
    let art = a.compile(&source()).unwrap().artifact.unwrap();
    assert!(matches!(b.run(&art, &ParameterSet::new(), 2, 2), Err(ToolchainError::ForeignArtifact(_))));
    let minivis = livevis_toolchain::MiniVis;
    assert!(matches!(minivis.run(&art, &ParameterSet::new(), 2, 2), Err(ToolchainError::ForeignArtifact(_))));
}

fn write_manifest(dir: &Path, id: &str, json: &str) {
    std::fs::write(dir.join(format!("{id}.json")), json).unwrap();
}

#[test]
fn registry_loads_manifests() {
    let dir = tempfile::tempdir().unwrap();
    write_manifest(
        dir.path(),
        "cpp",
        r#"{"buildCmd": "true", "runCmd": "true", "imagePath": "o.ppm", "timeoutSeconds": 10,
            "params": [{"name": "k", "type": "float", "default": 1.0}]}"#,
    );
    std::fs::write(dir.path().join("README.txt"), "ignored").unwrap();
    let reg = Registry::with_manifests(dir.path()).unwrap();
    assert_eq!(reg.ids().collect::<Vec<_>>(), vec!["cpp", "minivis"]);
    let cpp = reg.get("cpp").unwrap();
    assert_eq!(cpp.declared_params(&source()).unwrap(), vec![ParameterDecl::float("k", 1.0)]);
    assert!(reg.get("nope").is_none());

    write_manifest(dir.path(), "broken", "{");
    assert!(Registry::with_manifests(dir.path()).is_err());
}
