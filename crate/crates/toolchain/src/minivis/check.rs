//! Name resolution, arity and recursion checks, lowering to [`Expr`].

use std::collections::{BTreeSet, HashMap};

use livevis_core::params::ParameterDecl;
use livevis_core::toolchain::Diagnostic;

use super::lex::Pos;
use super::parse::{Ast, AstKind, BinOp, FnDef, Item, Literal};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Builtin {
    Sin,
    Cos,
    Sqrt,
    Abs,
    Floor,
    Min,
    Max,
    Clamp,
    Step,
    Mix,
    Rgb,
}

impl Builtin {
    pub fn lookup(name: &str) -> Option<Builtin> {
        Some(match name {
            "sin" => Builtin::Sin,
            "cos" => Builtin::Cos,
            "sqrt" => Builtin::Sqrt,
            "abs" => Builtin::Abs,
            "floor" => Builtin::Floor,
            "min" => Builtin::Min,
            "max" => Builtin::Max,
            "clamp" => Builtin::Clamp,
            "step" => Builtin::Step,
            "mix" => Builtin::Mix,
            "rgb" => Builtin::Rgb,
            _ => return None,
        })
    }

    pub fn arity(self) -> usize {
        match self {
            Builtin::Sin | Builtin::Cos | Builtin::Sqrt | Builtin::Abs | Builtin::Floor => 1,
            Builtin::Min | Builtin::Max | Builtin::Step => 2,
            Builtin::Clamp | Builtin::Mix | Builtin::Rgb => 3,
        }
    }
}

/// Resolved expression. Slots index the flattened parameter values, locals
/// index the arguments of the enclosing user function.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    X,
    Y,
    Slot(usize),
    Local(usize),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Builtin(Builtin, Vec<Expr>),
    Call(usize, Vec<Expr>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Function {
    pub name: String,
    pub arity: usize,
    pub body: Expr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Program {
    pub decls: Vec<ParameterDecl>,
    pub functions: Vec<Function>,
    pub pixel: Expr,
}

pub const SYNTAX_ERROR: &str = "SyntaxError";
pub const UNKNOWN_IDENTIFIER: &str = "UnknownIdentifier";
pub const ARITY_MISMATCH: &str = "ArityMismatch";
pub const MISSING_PIXEL_BLOCK: &str = "MissingPixelBlock";
pub const MULTIPLE_PIXEL_BLOCKS: &str = "MultiplePixelBlocks";
pub const RECURSION_NOT_SUPPORTED: &str = "RecursionNotSupported";
pub const DUPLICATE_DEFINITION: &str = "DuplicateDefinition";

/// Parsed items of one file.
pub struct FileItems<'a> {
    pub path: &'a str,
    pub items: Vec<Item>,
}

enum Global {
    Scalar(usize),
    Vector,
    Function(usize),
}

struct Checker<'a> {
    globals: HashMap<String, Global>,
    fns: Vec<(&'a str, &'a FnDef)>,
    diags: Vec<Diagnostic>,
}

fn diag(path: &str, pos: Pos, code: &str, message: String) -> Diagnostic {
    Diagnostic::at(path, pos.line, pos.col, code, message)
}

pub fn param_decl(def: &super::parse::ParamDef) -> ParameterDecl {
    let decl = match def.value {
        Literal::Float(v) => ParameterDecl::float(&def.name, v),
        Literal::Vec3(v) => ParameterDecl::vec3(&def.name, v),
    };
    match def.range {
        Some((lo, hi)) => decl.with_range(lo, hi),
        None => decl,
    }
}

/// Check all files together. Returns the program or every problem found.
pub fn check(files: &[FileItems<'_>]) -> Result<Program, Vec<Diagnostic>> {
    let mut ck = Checker { globals: HashMap::new(), fns: Vec::new(), diags: Vec::new() };
    let mut decls = Vec::new();
    let mut slots = 0usize;
    let mut pixels: Vec<(&str, Pos, &Ast)> = Vec::new();

    for file in files {
        for item in &file.items {
            match item {
                Item::Param(p) => {
                    let decl = param_decl(p);
                    if let Err(e) = decl.validate() {
                        ck.diags.push(diag(file.path, p.pos, SYNTAX_ERROR, e.to_string()));
                    }
                    match p.value {
                        Literal::Float(_) => {
                            ck.define(file.path, &p.name, p.pos, Global::Scalar(slots));
                            slots += 1;
                        }
                        Literal::Vec3(_) => {
                            ck.define(file.path, &p.name, p.pos, Global::Vector);
                            for (i, axis) in ["x", "y", "z"].iter().enumerate() {
                                ck.define(file.path, &format!("{}_{axis}", p.name), p.pos, Global::Scalar(slots + i));
                            }
                            slots += 3;
                        }
                    }
                    decls.push(decl);
                }
                Item::Fn(f) => {
                    let index = ck.fns.len();
                    if ck.define(file.path, &f.name, f.pos, Global::Function(index)) {
                        ck.fns.push((file.path, f));
                    }
                }
                Item::Pixel { pos, body } => pixels.push((file.path, *pos, body)),
            }
        }
    }

    ck.check_recursion();
    let functions: Vec<Function> = ck
        .fns
        .clone()
        .into_iter()
        .map(|(path, f)| {
            let locals: Vec<&str> = f.params.iter().map(|(n, _)| n.as_str()).collect();
            for (i, (name, pos)) in f.params.iter().enumerate() {
                if locals[..i].contains(&name.as_str()) {
                    ck.diags.push(diag(path, *pos, DUPLICATE_DEFINITION, format!("parameter '{name}' appears twice")));
                }
            }
            Function { name: f.name.clone(), arity: f.params.len(), body: ck.lower(path, &f.body, &locals, false) }
        })
        .collect();

    let pixel = match pixels.as_slice() {
        [] => {
            let mut d = Diagnostic::general("program has no pixel block");
            d.code = Some(MISSING_PIXEL_BLOCK.to_string());
            ck.diags.push(d);
            None
        }
        [(path, _, body)] => Some(ck.lower(path, body, &[], true)),
        [_, rest @ ..] => {
            for (path, pos, _) in rest {
                ck.diags.push(diag(path, *pos, MULTIPLE_PIXEL_BLOCKS, "only one pixel block is allowed".into()));
            }
            None
        }
    };

    match pixel {
        Some(pixel) if ck.diags.is_empty() => Ok(Program { decls, functions, pixel }),
        _ => Err(ck.diags),
    }
}

impl<'a> Checker<'a> {
    fn define(&mut self, path: &str, name: &str, pos: Pos, global: Global) -> bool {
        if matches!(name, "x" | "y") || Builtin::lookup(name).is_some() {
            self.diags.push(diag(path, pos, SYNTAX_ERROR, format!("'{name}' is a reserved name")));
            return false;
        }
        if self.globals.contains_key(name) {
            self.diags.push(diag(path, pos, DUPLICATE_DEFINITION, format!("'{name}' is already defined")));
            return false;
        }
        self.globals.insert(name.to_string(), global);
        true
    }

    /// Report one call site per cycle in the user call graph.
    fn check_recursion(&mut self) {
        let mut calls: Vec<Vec<(usize, Pos)>> = Vec::with_capacity(self.fns.len());
        for (_, f) in &self.fns {
            let mut out = Vec::new();
            collect_calls(&f.body, &self.globals, &mut out);
            calls.push(out);
        }
        // 0 = unvisited, 1 = on stack, 2 = done
        let mut state = vec![0u8; self.fns.len()];
        let mut reported = BTreeSet::new();
        for start in 0..self.fns.len() {
            if state[start] == 0 {
                self.dfs(start, &calls, &mut state, &mut reported);
            }
        }
    }

    fn dfs(&mut self, f: usize, calls: &[Vec<(usize, Pos)>], state: &mut [u8], reported: &mut BTreeSet<usize>) {
        state[f] = 1;
        for &(g, pos) in &calls[f] {
            match state[g] {
                0 => self.dfs(g, calls, state, reported),
                1 if reported.insert(f) => {
                    let (path, def) = self.fns[f];
                    let target = &self.fns[g].1.name;
                    self.diags.push(diag(
                        path,
                        pos,
                        RECURSION_NOT_SUPPORTED,
                        format!("call to '{target}' from '{}' is recursive", def.name),
                    ));
                }
                _ => {}
            }
        }
        state[f] = 2;
    }

    fn lower(&mut self, path: &str, ast: &Ast, locals: &[&str], pixel_scope: bool) -> Expr {
        match &ast.kind {
            AstKind::Num(n) => Expr::Const(*n),
            AstKind::Var(name) => {
                if let Some(i) = locals.iter().position(|l| l == name) {
                    return Expr::Local(i);
                }
                match (name.as_str(), self.globals.get(name)) {
                    ("x", _) if pixel_scope => Expr::X,
                    ("y", _) if pixel_scope => Expr::Y,
                    (_, Some(Global::Scalar(slot))) => Expr::Slot(*slot),
                    (_, Some(Global::Vector)) => {
                        self.unknown(path, ast.pos, format!("'{name}' is a vector; use {name}_x, {name}_y or {name}_z"))
                    }
                    (_, Some(Global::Function(_))) => {
                        self.unknown(path, ast.pos, format!("'{name}' is a function and must be called"))
                    }
                    ("x" | "y", None) => {
                        self.unknown(path, ast.pos, format!("'{name}' is only available in the pixel block"))
                    }
                    (_, None) => self.unknown(path, ast.pos, format!("unknown identifier '{name}'")),
                }
            }
            AstKind::Neg(inner) => Expr::Neg(Box::new(self.lower(path, inner, locals, pixel_scope))),
            AstKind::Bin(op, a, b) => Expr::Bin(
                *op,
                Box::new(self.lower(path, a, locals, pixel_scope)),
                Box::new(self.lower(path, b, locals, pixel_scope)),
            ),
            AstKind::Call(name, args) => {
                let lowered: Vec<Expr> = args.iter().map(|a| self.lower(path, a, locals, pixel_scope)).collect();
                let (arity, expr) = if let Some(b) = Builtin::lookup(name) {
                    (b.arity(), Expr::Builtin(b, lowered))
                } else {
                    match self.globals.get(name) {
                        Some(Global::Function(i)) => (self.fns[*i].1.params.len(), Expr::Call(*i, lowered)),
                        Some(_) => return self.unknown(path, ast.pos, format!("'{name}' is not a function")),
                        None => return self.unknown(path, ast.pos, format!("unknown function '{name}'")),
                    }
                };
                if arity != args.len() {
                    self.diags.push(diag(
                        path,
                        ast.pos,
                        ARITY_MISMATCH,
                        format!("'{name}' takes {arity} argument(s) but {} were given", args.len()),
                    ));
                }
                expr
            }
        }
    }

    fn unknown(&mut self, path: &str, pos: Pos, message: String) -> Expr {
        self.diags.push(diag(path, pos, UNKNOWN_IDENTIFIER, message));
        Expr::Const(0.0)
    }
}

fn collect_calls(ast: &Ast, globals: &HashMap<String, Global>, out: &mut Vec<(usize, Pos)>) {
    match &ast.kind {
        AstKind::Num(_) | AstKind::Var(_) => {}
        AstKind::Neg(a) => collect_calls(a, globals, out),
        AstKind::Bin(_, a, b) => {
            collect_calls(a, globals, out);
            collect_calls(b, globals, out);
        }
        AstKind::Call(name, args) => {
            if Builtin::lookup(name).is_none() {
                if let Some(Global::Function(i)) = globals.get(name) {
                    out.push((*i, ast.pos));
                }
            }
            for a in args {
                collect_calls(a, globals, out);
            }
        }
    }
}
