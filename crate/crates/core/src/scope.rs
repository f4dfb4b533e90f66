//! Static scope trees: brace-delimited nesting structure of source files.
//!
//! A file is scanned once; `{`/`}` outside comments and string literals open
//! and close `Block` scopes. Per-file trees are merged under a single `Root`.
//! Structural equality ignores spans, so reformatting or editing the content
//! of a block does not change the tree's identity.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::revision::SourceState;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScopeError {
    #[error("unbalanced scope in {file} at {line}:{col}")]
    UnbalancedScope { file: String, line: usize, col: usize },
    #[error("duplicate file path {0}")]
    DuplicatePath(String),
    #[error("cannot merge an empty list of file trees")]
    NoFiles,
}

/// Comment and string-literal syntax of a brace-structured language.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LanguageProfile {
    pub line_comment: String,
    pub block_comment_open: String,
    pub block_comment_close: String,
    pub string_delims: Vec<char>,
    pub escape_char: char,
}

impl LanguageProfile {
    /// C, C++ and GLSL: `//`, `/* */`, `"` and `'` literals, `\` escapes.
    pub fn c_like() -> Self {
        Self {
            line_comment: "//".into(),
            block_comment_open: "/*".into(),
            block_comment_close: "*/".into(),
            string_delims: vec!['"', '\''],
            escape_char: '\\',
        }
    }

    /// The MiniVis reference language: C comments, `"` strings only.
    pub fn minivis() -> Self {
        Self {
            string_delims: vec!['"'],
            ..Self::c_like()
        }
    }

    /// Delimiters must be non-empty and must not collide with each other.
    pub fn is_valid(&self) -> bool {
        let non_empty = !self.line_comment.is_empty()
            && !self.block_comment_open.is_empty()
            && !self.block_comment_close.is_empty()
            && !self.string_delims.is_empty();
        let distinct_comments = self.line_comment != self.block_comment_open;
        let starts: Vec<char> = [&self.line_comment, &self.block_comment_open]
            .iter()
            .filter_map(|s| s.chars().next())
            .collect();
        let strings_distinct = self
            .string_delims
            .iter()
            .all(|d| !starts.contains(d) && *d != self.escape_char && *d != '{' && *d != '}');
        non_empty && distinct_comments && strings_distinct
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScopeKind {
    Root,
    File,
    Block,
}

/// 1-based, inclusive source range `(start_line, start_col, end_line, end_col)`.
/// Columns count Unicode scalar values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "[usize; 4]", into = "[usize; 4]")]
pub struct Span {
    pub start_line: usize,
    pub start_col: usize,
    pub end_line: usize,
    pub end_col: usize,
}

impl From<[usize; 4]> for Span {
    fn from(a: [usize; 4]) -> Self {
        Span { start_line: a[0], start_col: a[1], end_line: a[2], end_col: a[3] }
    }
}

impl From<Span> for [usize; 4] {
    fn from(s: Span) -> Self {
        [s.start_line, s.start_col, s.end_line, s.end_col]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScopeNode {
    pub kind: ScopeKind,
    pub file: Option<String>,
    pub span: Option<Span>,
    pub children: Vec<ScopeNode>,
}

impl ScopeNode {
    /// Number of nodes in the tree, this one included.
    pub fn node_count(&self) -> usize {
        1 + self.children.iter().map(ScopeNode::node_count).sum::<usize>()
    }

    /// Number of levels, counting this node as level 1.
    pub fn depth(&self) -> usize {
        1 + self.children.iter().map(ScopeNode::depth).max().unwrap_or(0)
    }

    /// Equality of kinds, file paths (for `File` nodes) and child structure.
    /// Spans are ignored.
    pub fn structurally_equal(&self, other: &ScopeNode) -> bool {
        if self.kind != other.kind || self.children.len() != other.children.len() {
            return false;
        }
        if self.kind == ScopeKind::File && self.file != other.file {
            return false;
        }
        self.children
            .iter()
            .zip(&other.children)
            .all(|(a, b)| a.structurally_equal(b))
    }

    /// 64-bit digest of the span-free canonical form.
    pub fn scope_hash(&self) -> ScopeHash {
        let mut hasher = Sha256::new();
        self.feed_canonical(&mut hasher);
        let digest = hasher.finalize();
        let mut first = [0u8; 8];
        first.copy_from_slice(&digest[..8]);
        ScopeHash(u64::from_be_bytes(first))
    }

    fn feed_canonical(&self, hasher: &mut Sha256) {
        let tag: u8 = match self.kind {
            ScopeKind::Root => 0,
            ScopeKind::File => 1,
            ScopeKind::Block => 2,
        };
        hasher.update([tag]);
        if self.kind == ScopeKind::File {
            let path = self.file.as_deref().unwrap_or("");
            hasher.update((path.len() as u64).to_be_bytes());
            hasher.update(path.as_bytes());
        }
        hasher.update((self.children.len() as u64).to_be_bytes());
        for child in &self.children {
            child.feed_canonical(hasher);
        }
    }
}

/// Structural hash of a scope tree, rendered as 16 lowercase hex digits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct ScopeHash(pub u64);

impl fmt::Display for ScopeHash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:016x}", self.0)
    }
}

impl FromStr for ScopeHash {
    type Err = std::num::ParseIntError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        u64::from_str_radix(s, 16).map(ScopeHash)
    }
}

impl Serialize for ScopeHash {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ScopeHash {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

enum LexState {
    Code,
    LineComment,
    BlockComment,
    Str(char),
}

struct Frame {
    open: (usize, usize),
    children: Vec<ScopeNode>,
}

/// Parse one file into a `File` node whose descendants are its brace blocks.
///
/// Unterminated comments and strings run to the end of the file.
pub fn parse_scopes(text: &str, profile: &LanguageProfile, path: &str) -> Result<ScopeNode, ScopeError> {
    let mut stack: Vec<Frame> = Vec::new();
    let mut top: Vec<ScopeNode> = Vec::new();
    let mut state = LexState::Code;
    let (mut line, mut col) = (1usize, 0usize);
    let mut last = (1usize, 0usize);
    let mut skip = 0usize;

    for (idx, ch) in text.char_indices() {
        if ch == '\n' {
            line += 1;
            col = 0;
        } else {
            col += 1;
            last = (line, col);
        }
        if skip > 0 {
            skip -= 1;
            continue;
        }
        let rest = &text[idx..];
        match state {
            LexState::Code => {
                if rest.starts_with(profile.line_comment.as_str()) {
                    state = LexState::LineComment;
                    skip = profile.line_comment.chars().count() - 1;
                } else if rest.starts_with(profile.block_comment_open.as_str()) {
                    state = LexState::BlockComment;
                    skip = profile.block_comment_open.chars().count() - 1;
                } else if profile.string_delims.contains(&ch) {
                    state = LexState::Str(ch);
                } else if ch == '{' {
                    stack.push(Frame { open: (line, col), children: Vec::new() });
                } else if ch == '}' {
                    let frame = stack.pop().ok_or_else(|| ScopeError::UnbalancedScope {
                        file: path.to_string(),
                        line,
                        col,
                    })?;
                    let node = ScopeNode {
                        kind: ScopeKind::Block,
                        file: Some(path.to_string()),
                        span: Some(Span {
                            start_line: frame.open.0,
                            start_col: frame.open.1,
                            end_line: line,
                            end_col: col,
                        }),
                        children: frame.children,
                    };
                    match stack.last_mut() {
                        Some(parent) => parent.children.push(node),
                        None => top.push(node),
                    }
                }
            }
            LexState::LineComment => {
                if ch == '\n' {
                    state = LexState::Code;
                }
            }
            LexState::BlockComment => {
                if rest.starts_with(profile.block_comment_close.as_str()) {
                    state = LexState::Code;
                    skip = profile.block_comment_close.chars().count() - 1;
                }
            }
            LexState::Str(delim) => {
                if ch == profile.escape_char {
                    skip = 1;
                } else if ch == delim {
                    state = LexState::Code;
                }
            }
        }
    }

    if let Some(frame) = stack.last() {
        return Err(ScopeError::UnbalancedScope {
            file: path.to_string(),
            line: frame.open.0,
            col: frame.open.1,
        });
    }

    Ok(ScopeNode {
        kind: ScopeKind::File,
        file: Some(path.to_string()),
        span: Some(Span { start_line: 1, start_col: 1, end_line: last.0, end_col: last.1 }),
        children: top,
    })
}

/// Link per-file trees under one `Root`, ordered by path.
pub fn merge_trees(mut files: Vec<ScopeNode>) -> Result<ScopeNode, ScopeError> {
    if files.is_empty() {
        return Err(ScopeError::NoFiles);
    }
    files.sort_by(|a, b| a.file.cmp(&b.file));
    for pair in files.windows(2) {
        if pair[0].file == pair[1].file {
            return Err(ScopeError::DuplicatePath(pair[0].file.clone().unwrap_or_default()));
        }
    }
    Ok(ScopeNode { kind: ScopeKind::Root, file: None, span: None, children: files })
}

/// Scope tree of a whole source state: every file parsed and merged.
pub fn extract_scope_tree(source: &SourceState, profile: &LanguageProfile) -> Result<ScopeNode, ScopeError> {
    let trees = source
        .files
        .iter()
        .map(|(path, text)| parse_scopes(text, profile, path))
        .collect::<Result<Vec<_>, _>>()?;
    merge_trees(trees)
}
