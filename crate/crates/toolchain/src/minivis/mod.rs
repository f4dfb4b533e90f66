//! MiniVis: a small deterministic expression language for pixel images.
//!
//! ```text
//! param a = 0.5 range 0 1;
//! param c = (1, 0.5, 0);
//! fn ring(t) { step(a, t) - step(a + 0.1, t) }
//! pixel { rgb(ring(x) * c_x, y * c_y, c_z) }
//! ```
//!
//! Every file of a source state contributes definitions to one global
//! namespace; exactly one file holds the `pixel` block.

mod check;
mod eval;
mod lex;
mod parse;

use livevis_core::image::Image;
use livevis_core::params::{ParamValue, ParameterDecl, ParameterSet};
use livevis_core::scope::LanguageProfile;
use livevis_core::toolchain::{Artifact, CompileResult, Diagnostic, ToolchainAdapter, ToolchainError};
use livevis_core::SourceState;

pub use check::{
    Program, ARITY_MISMATCH, DUPLICATE_DEFINITION, MISSING_PIXEL_BLOCK, MULTIPLE_PIXEL_BLOCKS,
    RECURSION_NOT_SUPPORTED, SYNTAX_ERROR, UNKNOWN_IDENTIFIER,
};
pub use eval::Value;

pub const ID: &str = "minivis";

#[derive(Debug, Default, Clone, Copy)]
pub struct MiniVis;

fn parse_file(path: &str, text: &str) -> Result<Vec<parse::Item>, Diagnostic> {
    let toks = lex::tokenize(text)
        .map_err(|e| Diagnostic::at(path, e.pos.line, e.pos.col, SYNTAX_ERROR, e.message))?;
    parse::parse(toks).map_err(|e| Diagnostic::at(path, e.pos.line, e.pos.col, SYNTAX_ERROR, e.message))
}

/// Parse and check every file of `source`.
pub fn compile_program(source: &SourceState) -> Result<Program, Vec<Diagnostic>> {
    let mut files = Vec::new();
    let mut diags = Vec::new();
    for (path, text) in &source.files {
        match parse_file(path, text) {
            Ok(items) => files.push(check::FileItems { path, items }),
            Err(d) => diags.push(d),
        }
    }
    if !diags.is_empty() {
        return Err(diags);
    }
    check::check(&files)
}

/// Flatten parameter values into evaluation slots, in declaration order.
/// Missing or mistyped values fall back to the declared default.
fn slots(decls: &[ParameterDecl], params: &ParameterSet) -> Vec<f64> {
    let mut out = Vec::new();
    for decl in decls {
        let value = match params.get(&decl.name) {
            Some(v) if v.ty() == decl.ty => *v,
            Some(v) => {
                log::warn!("parameter {} expects {} but got {}; using default", decl.name, decl.ty, v.ty());
                decl.default
            }
            None => decl.default,
        };
        match value {
            ParamValue::Float(f) => out.push(f),
            ParamValue::Vec3(v) => out.extend(v),
        }
    }
    out
}

/// Render a checked program.
pub fn render(program: &Program, params: &ParameterSet, width: u32, height: u32) -> Result<Image, ToolchainError> {
    let slots = slots(&program.decls, params);
    let data = eval::render(program, &slots, width, height);
    Ok(Image::from_rgb(width, height, data)?)
}

impl ToolchainAdapter for MiniVis {
    fn id(&self) -> &str {
        ID
    }

    fn scope_profile(&self) -> LanguageProfile {
        LanguageProfile::minivis()
    }

    /// Declarations of every file that parses, in path order.
    fn declared_params(&self, source: &SourceState) -> Result<Vec<ParameterDecl>, ToolchainError> {
        Ok(source
            .files
            .iter()
            .filter_map(|(path, text)| parse_file(path, text).ok())
            .flatten()
            .filter_map(|item| match item {
                parse::Item::Param(p) => Some(check::param_decl(&p)),
                _ => None,
            })
            .collect())
    }

    fn compile(&self, source: &SourceState) -> Result<CompileResult, ToolchainError> {
        Ok(match compile_program(source) {
            Ok(program) => CompileResult::success(Artifact::new(program), Vec::new()),
            Err(diags) => CompileResult::failure(diags),
        })
    }

    fn run(&self, artifact: &Artifact, params: &ParameterSet, width: u32, height: u32) -> Result<Image, ToolchainError> {
        let program = artifact.downcast_ref::<Program>().ok_or_else(|| ToolchainError::ForeignArtifact(ID.into()))?;
        render(program, params, width, height)
    }
}
