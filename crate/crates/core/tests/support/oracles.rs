//! Independent reference implementations used by the property and
//! acceptance tests. None of these share code paths with the library.

#![allow(dead_code)]

use std::collections::HashMap;

use livevis_core::scope::{LanguageProfile, ScopeKind, ScopeNode, Span};
use rand::Rng;

/// Pass 1: blank out comments and string literals (newlines are kept so
/// positions do not move).
pub fn strip_comments_and_strings(text: &str, profile: &LanguageProfile) -> Vec<char> {
    let chars: Vec<char> = text.chars().collect();
    let lc: Vec<char> = profile.line_comment.chars().collect();
    let bo: Vec<char> = profile.block_comment_open.chars().collect();
    let bc: Vec<char> = profile.block_comment_close.chars().collect();
    let at = |i: usize, pat: &[char]| chars.len() >= i + pat.len() && chars[i..i + pat.len()] == *pat;
    let blank = |c: char| if c == '\n' { '\n' } else { ' ' };

    let mut out = Vec::with_capacity(chars.len());
    let mut i = 0;
    while i < chars.len() {
        if at(i, &lc) {
            while i < chars.len() && chars[i] != '\n' {
                out.push(' ');
                i += 1;
            }
        } else if at(i, &bo) {
            out.extend(bo.iter().map(|_| ' '));
            i += bo.len();
            while i < chars.len() && !at(i, &bc) {
                out.push(blank(chars[i]));
                i += 1;
            }
            if i < chars.len() {
                out.extend(bc.iter().map(|_| ' '));
                i += bc.len();
            }
        } else if profile.string_delims.contains(&chars[i]) {
            let delim = chars[i];
            out.push(' ');
            i += 1;
            while i < chars.len() && chars[i] != delim {
                if chars[i] == profile.escape_char && i + 1 < chars.len() {
                    out.push(blank(chars[i]));
                    i += 1;
                }
                out.push(blank(chars[i]));
                i += 1;
            }
            if i < chars.len() {
                out.push(' ');
                i += 1;
            }
        } else {
            out.push(chars[i]);
            i += 1;
        }
    }
    out
}

/// Pass 2: match braces of the stripped text with an explicit stack.
/// Returns the unmatched brace position on failure.
pub fn stack_scopes(stripped: &[char], path: &str) -> Result<ScopeNode, (usize, usize)> {
    let mut opens: Vec<((usize, usize), Vec<ScopeNode>)> = vec![((0, 0), Vec::new())];
    let (mut line, mut col) = (1, 0);
    let mut end = (1, 0);
    for &c in stripped {
        if c == '\n' {
            line += 1;
            col = 0;
            continue;
        }
        col += 1;
        end = (line, col);
        if c == '{' {
            opens.push(((line, col), Vec::new()));
        } else if c == '}' {
            if opens.len() == 1 {
                return Err((line, col));
            }
            let (start, children) = opens.pop().unwrap();
            let node = ScopeNode {
                kind: ScopeKind::Block,
                file: Some(path.to_string()),
                span: Some(Span { start_line: start.0, start_col: start.1, end_line: line, end_col: col }),
                children,
            };
            opens.last_mut().unwrap().1.push(node);
        }
    }
    if opens.len() > 1 {
        return Err(opens.last().unwrap().0);
    }
    let (_, children) = opens.pop().unwrap();
    Ok(ScopeNode {
        kind: ScopeKind::File,
        file: Some(path.to_string()),
        span: Some(Span { start_line: 1, start_col: 1, end_line: end.0, end_col: end.1 }),
        children,
    })
}

pub fn scope_oracle(text: &str, profile: &LanguageProfile, path: &str) -> Result<ScopeNode, (usize, usize)> {
    stack_scopes(&strip_comments_and_strings(text, profile), path)
}

/// Random C-like program with balanced code braces; comments and string
/// literals contain stray braces, quotes and escapes.
pub fn random_program(rng: &mut impl Rng, balanced: bool) -> String {
    let mut out = String::new();
    let mut depth = 0usize;
    let noise = ["{", "}", "{{", "}}", "\\\"", "'", "x", " ", "/", "*"];
    let n = rng.gen_range(0..60);
    for _ in 0..n {
        match rng.gen_range(0..10) {
            0 | 1 => {
                out.push('{');
                depth += 1;
            }
            2 | 3 if depth > 0 => {
                out.push('}');
                depth -= 1;
            }
            4 => {
                out.push_str("// ");
                for _ in 0..rng.gen_range(0..4) {
                    out.push_str(noise[rng.gen_range(0..noise.len())]);
                }
                out.push('\n');
            }
            5 => {
                out.push_str("/* ");
                for _ in 0..rng.gen_range(0..4) {
                    out.push_str(noise[rng.gen_range(0..noise.len())]);
                    if rng.gen_bool(0.2) {
                        out.push('\n');
                    }
                }
                out.push_str(" */");
            }
            6 => {
                out.push('"');
                for _ in 0..rng.gen_range(0..4) {
                    let s = noise[rng.gen_range(0..noise.len())];
                    out.push_str(if s == "'" { "{" } else { s });
                }
                out.push('"');
            }
            7 => {
                let c = ["'{'", "'}'", "'\\''", "'x'"][rng.gen_range(0..4)];
                out.push_str(c);
            }
            8 => out.push('\n'),
            _ => out.push_str(["int x = 1;", " a * b / c ", "f(y);", "if (t) "][rng.gen_range(0..4)]),
        }
    }
    if balanced {
        for _ in 0..depth {
            out.push('}');
        }
    } else if depth == 0 || rng.gen_bool(0.5) {
        out.push('}');
    }
    out
}

/// Random tree of depth-first nested blocks, for hashing tests.
pub fn random_tree(rng: &mut impl Rng, files: usize) -> ScopeNode {
    fn blocks(rng: &mut impl Rng, depth: usize) -> Vec<ScopeNode> {
        let n = if depth > 3 { 0 } else { rng.gen_range(0..3) };
        (0..n)
            .map(|_| ScopeNode { kind: ScopeKind::Block, file: None, span: None, children: blocks(rng, depth + 1) })
            .collect()
    }
    let children = (0..files)
        .map(|i| ScopeNode {
            kind: ScopeKind::File,
            file: Some(format!("f{i}")),
            span: None,
            children: blocks(rng, 0),
        })
        .collect();
    ScopeNode { kind: ScopeKind::Root, file: None, span: None, children }
}

/// Length of a longest common subsequence, O(n·m) dynamic programming.
pub fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    for x in a {
        let mut cur = vec![0usize; b.len() + 1];
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { prev[j + 1].max(cur[j]) };
        }
        prev = cur;
    }
    prev[b.len()]
}

/// Random text of up to `max_lines` lines over a small alphabet, so that
/// pairs share many lines.
pub fn random_text(rng: &mut impl Rng, max_lines: usize) -> String {
    let words = ["a", "b", "c", "d", "{", "}", "x = 1;", ""];
    let n = rng.gen_range(0..=max_lines);
    let mut out: Vec<&str> = (0..n).map(|_| words[rng.gen_range(0..words.len())]).collect();
    let mut text = out.join("\n");
    if n > 0 && rng.gen_bool(0.8) {
        text.push('\n');
    }
    out.clear();
    text
}

/// Mutate `text` by random line edits.
pub fn mutate_text(rng: &mut impl Rng, text: &str) -> String {
    let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
    for _ in 0..rng.gen_range(0..8) {
        match rng.gen_range(0..3) {
            0 if !lines.is_empty() => {
                let i = rng.gen_range(0..lines.len());
                lines.remove(i);
            }
            1 => {
                let i = rng.gen_range(0..=lines.len());
                lines.insert(i, format!("new {}", rng.gen_range(0..5)));
            }
            _ if !lines.is_empty() => {
                let i = rng.gen_range(0..lines.len());
                lines[i] = "changed".into();
            }
            _ => {}
        }
    }
    let mut out = lines.join("\n");
    if rng.gen_bool(0.7) && !lines.is_empty() {
        out.push('\n');
    }
    out
}

/// Per-pixel population variance computed directly from the definition:
/// mean first, then mean squared deviation, per channel.
pub fn variance_oracle(stack: &[Vec<[u8; 3]>], px: usize) -> f64 {
    let k = stack.len() as f64;
    let mut total = 0.0;
    for ch in 0..3 {
        let samples: Vec<f64> = stack.iter().map(|img| img[px][ch] as f64 / 255.0).collect();
        let mean = samples.iter().sum::<f64>() / k;
        total += samples.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / k;
    }
    total / 3.0
}

pub fn gray_oracle(avg_var: f64) -> u8 {
    (255.0 * (avg_var.sqrt() / 0.5).min(1.0)).round() as u8
}

/// Connected components of the equal-hash edges of a parent forest, via
/// union-find. Each component is returned as a sorted list of node indices.
pub fn equal_hash_components(parents: &[Option<usize>], hashes: &[u64]) -> Vec<Vec<usize>> {
    fn find(uf: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while uf[r] != r {
            r = uf[r];
        }
        let mut c = x;
        while uf[c] != r {
            let next = uf[c];
            uf[c] = r;
            c = next;
        }
        r
    }
    let n = parents.len();
    let mut uf: Vec<usize> = (0..n).collect();
    for (i, p) in parents.iter().enumerate() {
        if let Some(p) = *p {
            if hashes[p] == hashes[i] {
                let (a, b) = (find(&mut uf, i), find(&mut uf, p));
                uf[a] = b;
            }
        }
    }
    let mut comps: HashMap<usize, Vec<usize>> = HashMap::new();
    for i in 0..n {
        let r = find(&mut uf, i);
        comps.entry(r).or_default().push(i);
    }
    let mut out: Vec<Vec<usize>> = comps.into_values().collect();
    for c in &mut out {
        c.sort();
    }
    out.sort();
    out
}

/// Random recursive tree: node `i` gets a parent among `0..i` (node 0 is the
/// root). Hashes come from a small alphabet so equal neighbours are common.
pub fn random_revision_tree(rng: &mut impl Rng, max_nodes: usize) -> (Vec<Option<usize>>, Vec<u64>) {
    let n = rng.gen_range(1..=max_nodes);
    let alphabet = rng.gen_range(1..5u64);
    let parents = (0..n).map(|i| if i == 0 { None } else { Some(rng.gen_range(0..i)) }).collect();
    let hashes = (0..n).map(|_| rng.gen_range(0..alphabet)).collect();
    (parents, hashes)
}
