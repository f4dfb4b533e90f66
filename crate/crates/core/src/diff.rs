//! Line diffs between revisions.
//!
//! `line_diff` produces a minimal edit script (Myers' O(ND) shortest edit
//! path, which removes and adds exactly the lines outside a longest common
//! subsequence) grouped into hunks with three lines of context.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::revision::SourceState;

pub const CONTEXT_LINES: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DiffError {
    #[error("diff does not apply: {0}")]
    DiffMismatch(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DiffTag {
    Keep,
    Remove,
    Add,
}

/// One line of a hunk. `Keep` lines carry both line numbers, `Remove` only
/// the `from` number and `Add` only the `to` number (all 1-based).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DiffOp {
    pub tag: DiffTag,
    pub from_line: Option<usize>,
    pub to_line: Option<usize>,
    pub text: String,
}

/// `from_start`/`to_start` are the 1-based position of the first covered
/// line, or of the insertion point when the side is empty.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Hunk {
    pub from_start: usize,
    pub from_len: usize,
    pub to_start: usize,
    pub to_len: usize,
    pub ops: Vec<DiffOp>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FileStatus {
    Modified,
    Added,
    Deleted,
    Unchanged,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FileDiff {
    pub path: String,
    pub status: FileStatus,
    pub hunks: Vec<Hunk>,
    /// The `from` text does not end with `\n`.
    pub from_missing_newline: bool,
    /// The `to` text does not end with `\n`.
    pub to_missing_newline: bool,
}

impl FileDiff {
    pub fn count(&self, tag: DiffTag) -> usize {
        self.hunks
            .iter()
            .flat_map(|h| &h.ops)
            .filter(|op| op.tag == tag)
            .count()
    }

    /// The same change seen from the other side.
    pub fn reversed(&self) -> FileDiff {
        let status = match self.status {
            FileStatus::Added => FileStatus::Deleted,
            FileStatus::Deleted => FileStatus::Added,
            s => s,
        };
        let hunks = self
            .hunks
            .iter()
            .map(|h| Hunk {
                from_start: h.to_start,
                from_len: h.to_len,
                to_start: h.from_start,
                to_len: h.from_len,
                ops: h
                    .ops
                    .iter()
                    .map(|op| DiffOp {
                        tag: match op.tag {
                            DiffTag::Add => DiffTag::Remove,
                            DiffTag::Remove => DiffTag::Add,
                            DiffTag::Keep => DiffTag::Keep,
                        },
                        from_line: op.to_line,
                        to_line: op.from_line,
                        text: op.text.clone(),
                    })
                    .collect::<Vec<_>>(),
            })
            .map(reorder_hunk)
            .collect();
        FileDiff {
            path: self.path.clone(),
            status,
            hunks,
            from_missing_newline: self.to_missing_newline,
            to_missing_newline: self.from_missing_newline,
        }
    }

    /// Plain unified-diff rendering, for logs.
    pub fn to_unified(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "--- a/{}", self.path);
        let _ = writeln!(out, "+++ b/{}", self.path);
        for h in &self.hunks {
            let _ = writeln!(out, "@@ -{},{} +{},{} @@", h.from_start, h.from_len, h.to_start, h.to_len);
            for op in &h.ops {
                let sign = match op.tag {
                    DiffTag::Keep => ' ',
                    DiffTag::Remove => '-',
                    DiffTag::Add => '+',
                };
                let _ = writeln!(out, "{sign}{}", op.text);
            }
        }
        if self.from_missing_newline != self.to_missing_newline {
            out.push_str("\\ No newline at end of file\n");
        }
        out
    }
}

// Within a run of changes, removals come before additions.
fn reorder_hunk(mut h: Hunk) -> Hunk {
    let mut ops = Vec::with_capacity(h.ops.len());
    let mut adds = Vec::new();
    for op in h.ops {
        match op.tag {
            DiffTag::Add => adds.push(op),
            DiffTag::Remove => ops.push(op),
            DiffTag::Keep => {
                ops.append(&mut adds);
                ops.push(op);
            }
        }
    }
    ops.append(&mut adds);
    h.ops = ops;
    h
}

/// Lines of `text` split on `\n`, plus whether the final newline is missing.
pub fn split_lines(text: &str) -> (Vec<&str>, bool) {
    if text.is_empty() {
        return (Vec::new(), false);
    }
    let mut lines: Vec<&str> = text.split('\n').collect();
    if lines.last() == Some(&"") {
        lines.pop();
        (lines, false)
    } else {
        (lines, true)
    }
}

fn join_lines(lines: &[String], missing_newline: bool) -> String {
    let mut out = lines.join("\n");
    if !lines.is_empty() && !missing_newline {
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Edit {
    Keep(usize, usize),
    Remove(usize),
    Add(usize),
}

/// Shortest edit script between `a` and `b`.
fn myers<T: PartialEq>(a: &[T], b: &[T]) -> Vec<Edit> {
    let prefix = a.iter().zip(b).take_while(|(x, y)| x == y).count();
    let suffix = a[prefix..]
        .iter()
        .rev()
        .zip(b[prefix..].iter().rev())
        .take_while(|(x, y)| x == y)
        .count();
    let am = &a[prefix..a.len() - suffix];
    let bm = &b[prefix..b.len() - suffix];

    let mut edits: Vec<Edit> = (0..prefix).map(|i| Edit::Keep(i, i)).collect();
    let mut middle = myers_core(am, bm);
    for e in &mut middle {
        *e = match *e {
            Edit::Keep(i, j) => Edit::Keep(i + prefix, j + prefix),
            Edit::Remove(i) => Edit::Remove(i + prefix),
            Edit::Add(j) => Edit::Add(j + prefix),
        };
    }
    edits.extend(middle);
    let (a0, b0) = (a.len() - suffix, b.len() - suffix);
    edits.extend((0..suffix).map(|i| Edit::Keep(a0 + i, b0 + i)));
    edits
}

fn myers_core<T: PartialEq>(a: &[T], b: &[T]) -> Vec<Edit> {
    let n = a.len() as isize;
    let m = b.len() as isize;
    let max = n + m;
    let off = max + 1;
    let mut v = vec![0isize; (2 * max + 3) as usize];
    // trace[d] holds v[k] for k in -d..=d as it was before step d.
    let mut trace: Vec<Vec<isize>> = Vec::new();
    let at = |k: isize| (k + off) as usize;

    'search: for d in 0..=max {
        trace.push(v[at(-d)..=at(d)].to_vec());
        let mut k = -d;
        while k <= d {
            let mut x = if k == -d || (k != d && v[at(k - 1)] < v[at(k + 1)]) {
                v[at(k + 1)]
            } else {
                v[at(k - 1)] + 1
            };
            let mut y = x - k;
            while x < n && y < m && a[x as usize] == b[y as usize] {
                x += 1;
                y += 1;
            }
            v[at(k)] = x;
            if x >= n && y >= m {
                break 'search;
            }
            k += 2;
        }
    }

    let mut edits = Vec::new();
    let (mut x, mut y) = (n, m);
    for (d, row) in trace.iter().enumerate().rev() {
        let d = d as isize;
        if d == 0 {
            while x > 0 && y > 0 {
                x -= 1;
                y -= 1;
                edits.push(Edit::Keep(x as usize, y as usize));
            }
            break;
        }
        let get = |k: isize| row[(k + d) as usize];
        let k = x - y;
        let prev_k = if k == -d || (k != d && get(k - 1) < get(k + 1)) { k + 1 } else { k - 1 };
        let prev_x = get(prev_k);
        let prev_y = prev_x - prev_k;
        while x > prev_x && y > prev_y {
            x -= 1;
            y -= 1;
            edits.push(Edit::Keep(x as usize, y as usize));
        }
        if x == prev_x {
            edits.push(Edit::Add(prev_y as usize));
        } else {
            edits.push(Edit::Remove(prev_x as usize));
        }
        x = prev_x;
        y = prev_y;
    }
    edits.reverse();
    edits
}

fn diff_lines(path: &str, a: &str, b: &str) -> FileDiff {
    let (al, a_missing) = split_lines(a);
    let (bl, b_missing) = split_lines(b);
    let edits = myers(&al, &bl);

    // Indices of edits that are changes; hunks are the changes plus context,
    // merged when their context windows touch.
    let changes: Vec<usize> = edits
        .iter()
        .enumerate()
        .filter(|(_, e)| !matches!(e, Edit::Keep(..)))
        .map(|(i, _)| i)
        .collect();
    let mut ranges: Vec<(usize, usize)> = Vec::new();
    for &c in &changes {
        let lo = c.saturating_sub(CONTEXT_LINES);
        let hi = (c + CONTEXT_LINES).min(edits.len() - 1);
        match ranges.last_mut() {
            Some(last) if lo <= last.1 + 1 => last.1 = hi,
            _ => ranges.push((lo, hi)),
        }
    }

    // Running (from, to) position before each edit.
    let mut positions = Vec::with_capacity(edits.len());
    let (mut fi, mut ti) = (0usize, 0usize);
    for e in &edits {
        positions.push((fi, ti));
        match e {
            Edit::Keep(..) => {
                fi += 1;
                ti += 1;
            }
            Edit::Remove(_) => fi += 1,
            Edit::Add(_) => ti += 1,
        }
    }

    let hunks = ranges
        .into_iter()
        .map(|(lo, hi)| {
            let (fs, ts) = positions[lo];
            let ops: Vec<DiffOp> = edits[lo..=hi]
                .iter()
                .map(|e| match *e {
                    Edit::Keep(i, j) => DiffOp {
                        tag: DiffTag::Keep,
                        from_line: Some(i + 1),
                        to_line: Some(j + 1),
                        text: al[i].to_string(),
                    },
                    Edit::Remove(i) => DiffOp {
                        tag: DiffTag::Remove,
                        from_line: Some(i + 1),
                        to_line: None,
                        text: al[i].to_string(),
                    },
                    Edit::Add(j) => DiffOp {
                        tag: DiffTag::Add,
                        from_line: None,
                        to_line: Some(j + 1),
                        text: bl[j].to_string(),
                    },
                })
                .collect();
            let from_len = ops.iter().filter(|o| o.tag != DiffTag::Add).count();
            let to_len = ops.iter().filter(|o| o.tag != DiffTag::Remove).count();
            Hunk { from_start: fs + 1, from_len, to_start: ts + 1, to_len, ops }
        })
        .collect::<Vec<_>>();

    let status = if hunks.is_empty() && a_missing == b_missing {
        FileStatus::Unchanged
    } else {
        FileStatus::Modified
    };
    FileDiff {
        path: path.to_string(),
        status,
        hunks,
        from_missing_newline: a_missing,
        to_missing_newline: b_missing,
    }
}

/// Minimal line edit script turning `a` into `b`.
pub fn line_diff(a: &str, b: &str) -> FileDiff {
    diff_lines("", a, b)
}

/// One diff per path in the union of both states, in path order.
pub fn revision_diff(from: &SourceState, to: &SourceState) -> Vec<FileDiff> {
    let paths: BTreeSet<&String> = from.files.keys().chain(to.files.keys()).collect();
    paths
        .into_iter()
        .map(|path| match (from.files.get(path), to.files.get(path)) {
            (Some(a), Some(b)) => diff_lines(path, a, b),
            (None, Some(b)) => FileDiff { status: FileStatus::Added, ..diff_lines(path, "", b) },
            (Some(a), None) => FileDiff { status: FileStatus::Deleted, ..diff_lines(path, a, "") },
            (None, None) => unreachable!("path comes from one of the two states"),
        })
        .collect()
}

/// Apply `diff` to its base text `a`, reproducing the target text.
pub fn apply_diff(a: &str, diff: &FileDiff) -> Result<String, DiffError> {
    let (lines, missing) = split_lines(a);
    if missing != diff.from_missing_newline {
        return Err(DiffError::DiffMismatch("trailing newline differs from diff base".into()));
    }
    let mut out: Vec<String> = Vec::with_capacity(lines.len());
    let mut pos = 0usize;
    for hunk in &diff.hunks {
        let start = hunk.from_start.checked_sub(1).ok_or_else(|| DiffError::DiffMismatch("hunk starts at line 0".into()))?;
        if start < pos || start > lines.len() {
            return Err(DiffError::DiffMismatch(format!("hunk at line {} out of order or range", hunk.from_start)));
        }
        out.extend(lines[pos..start].iter().map(|s| s.to_string()));
        pos = start;
        for op in &hunk.ops {
            match op.tag {
                DiffTag::Keep | DiffTag::Remove => {
                    match lines.get(pos) {
                        Some(line) if *line == op.text => {}
                        found => {
                            return Err(DiffError::DiffMismatch(format!(
                                "line {}: expected {:?}, found {:?}",
                                pos + 1,
                                op.text,
                                found
                            )))
                        }
                    }
                    if op.tag == DiffTag::Keep {
                        out.push(op.text.clone());
                    }
                    pos += 1;
                }
                DiffTag::Add => out.push(op.text.clone()),
            }
        }
    }
    out.extend(lines[pos..].iter().map(|s| s.to_string()));
    Ok(join_lines(&out, diff.to_missing_newline))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_is_unchanged() {
        let d = line_diff("a\nb\n", "a\nb\n");
        assert_eq!(d.status, FileStatus::Unchanged);
        assert!(d.hunks.is_empty());
    }

    #[test]
    fn single_insertion() {
        let d = line_diff("a\nb\n", "a\nx\nb\n");
        assert_eq!(d.hunks.len(), 1);
        let tags: Vec<_> = d.hunks[0].ops.iter().map(|o| (o.tag, o.text.as_str())).collect();
        assert_eq!(tags, [(DiffTag::Keep, "a"), (DiffTag::Add, "x"), (DiffTag::Keep, "b")]);
        assert_eq!(d.hunks[0].ops[1].to_line, Some(2));
        assert_eq!(apply_diff("a\nb\n", &d).unwrap(), "a\nx\nb\n");
    }

    #[test]
    fn trailing_newline_is_tracked() {
        for (a, b) in [("a", "a\n"), ("a\n", "a"), ("", "\n"), ("x", ""), ("", "")] {
            let d = line_diff(a, b);
            assert_eq!(apply_diff(a, &d).unwrap(), b, "{a:?} -> {b:?}");
        }
        assert_eq!(line_diff("a", "a\n").status, FileStatus::Modified);
    }

    #[test]
    fn mismatched_base() {
        let d = line_diff("a\nb\n", "a\nc\n");
        assert!(matches!(apply_diff("a\nz\n", &d), Err(DiffError::DiffMismatch(_))));
        assert!(matches!(apply_diff("a\nb", &d), Err(DiffError::DiffMismatch(_))));
    }

    #[test]
    fn far_apart_changes_make_separate_hunks() {
        let a: String = (0..20).map(|i| format!("{i}\n")).collect();
        let b: String = (0..20)
            .map(|i| match i {
                2 => "two\n".to_string(),
                17 => "seventeen\n".to_string(),
                _ => format!("{i}\n"),
            })
            .collect();
        let d = line_diff(&a, &b);
        assert_eq!(d.hunks.len(), 2);
        assert_eq!(d.hunks[0].from_start, 1);
        assert_eq!(d.hunks[1].from_start, 15);
        assert_eq!(apply_diff(&a, &d).unwrap(), b);
    }

    #[test]
    fn reversed_swaps_counts_and_applies() {
        let a = "one\ntwo\nthree\nfour\n";
        let b = "zero\none\nthree\n4\nfive";
        let d = line_diff(a, b);
        let r = d.reversed();
        assert_eq!(d.count(DiffTag::Add), r.count(DiffTag::Remove));
        assert_eq!(d.count(DiffTag::Remove), r.count(DiffTag::Add));
        assert_eq!(apply_diff(b, &r).unwrap(), a);
    }

    #[test]
    fn revision_diff_statuses() {
        let from = SourceState::new("t", [("main.cpp", "int x;\n")]).unwrap();
        let to = SourceState::new("t", [("main.cpp", "int x;\n"), ("shader.glsl", "void main(){}\n")]).unwrap();
        let diffs = revision_diff(&from, &to);
        assert_eq!(diffs.len(), 2);
        assert_eq!(diffs[0].status, FileStatus::Unchanged);
        assert_eq!(diffs[1].status, FileStatus::Added);
        assert_eq!(diffs[1].count(DiffTag::Add), 1);
        let back = revision_diff(&to, &from);
        assert_eq!(back[1].status, FileStatus::Deleted);
        assert_eq!(apply_diff("void main(){}\n", &back[1]).unwrap(), "");
    }

    #[test]
    fn unified_rendering() {
        let text = line_diff("a\nb\n", "a\nc\n").to_unified();
        assert!(text.contains("@@ -1,2 +1,2 @@\n a\n-b\n+c\n"));
    }
}
