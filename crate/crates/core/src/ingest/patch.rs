//! Parsing of `git log --raw -p -U0` output blocks.

use std::collections::HashMap;

use super::{FileDiff, HunkEdit};

const GITLINK_MODE: &str = "160000";

/// One `--raw` line: blob ids and paths for a file pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct RawEntry {
    pub old_mode: String,
    pub new_mode: String,
    pub old_blob: String,
    pub new_blob: String,
    pub status: char,
    pub old_path: String,
    pub new_path: String,
}

impl RawEntry {
    pub fn is_gitlink(&self) -> bool {
        self.old_mode == GITLINK_MODE || self.new_mode == GITLINK_MODE
    }
}

/// Undo git's C-style path quoting. Unquoted input is returned unchanged.
pub(crate) fn unquote(s: &str) -> String {
    let s = s.trim_end_matches('\t');
    if !(s.len() >= 2 && s.starts_with('"') && s.ends_with('"')) {
        return s.to_string();
    }
    let inner = &s.as_bytes()[1..s.len() - 1];
    let mut out = Vec::with_capacity(inner.len());
    let mut i = 0;
    while i < inner.len() {
        let b = inner[i];
        if b != b'\\' || i + 1 >= inner.len() {
            out.push(b);
            i += 1;
            continue;
        }
        let e = inner[i + 1];
        i += 2;
        match e {
            b'n' => out.push(b'\n'),
            b't' => out.push(b'\t'),
            b'r' => out.push(b'\r'),
            b'a' => out.push(7),
            b'b' => out.push(8),
            b'f' => out.push(12),
            b'v' => out.push(11),
            b'0'..=b'7' => {
                let mut v = (e - b'0') as u32;
                let mut n = 1;
                while n < 3 && i < inner.len() && (b'0'..=b'7').contains(&inner[i]) {
                    v = v * 8 + (inner[i] - b'0') as u32;
                    i += 1;
                    n += 1;
                }
                out.push(v as u8);
            }
            other => out.push(other),
        }
    }
    String::from_utf8_lossy(&out).into_owned()
}

/// Splits a line into (possibly quoted) path tokens separated by tabs.
fn split_raw_paths(s: &str) -> Vec<String> {
    s.split('\t').map(unquote).collect()
}

pub(crate) fn parse_raw_line(line: &str) -> Option<RawEntry> {
    let rest = line.strip_prefix(':')?;
    let (meta, paths) = rest.split_once('\t')?;
    let mut it = meta.split_whitespace();
    let old_mode = it.next()?.to_string();
    let new_mode = it.next()?.to_string();
    let old_blob = it.next()?.to_string();
    let new_blob = it.next()?.to_string();
    let status = it.next()?.chars().next()?;
    let paths = split_raw_paths(paths);
    let (old_path, new_path) = match paths.as_slice() {
        [p] => (p.clone(), p.clone()),
        [a, b, ..] => (a.clone(), b.clone()),
        [] => return None,
    };
    Some(RawEntry { old_mode, new_mode, old_blob, new_blob, status, old_path, new_path })
}

fn parse_range(s: &str) -> Option<(u32, u32)> {
    match s.split_once(',') {
        Some((a, b)) => Some((a.parse().ok()?, b.parse().ok()?)),
        None => Some((s.parse().ok()?, 1)),
    }
}

pub(crate) fn parse_hunk_header(line: &str) -> Option<HunkEdit> {
    let body = line.strip_prefix("@@ ")?;
    let end = body.find(" @@")?;
    let mut parts = body[..end].split_whitespace();
    let (old_start, old_len) = parse_range(parts.next()?.strip_prefix('-')?)?;
    let (new_start, new_len) = parse_range(parts.next()?.strip_prefix('+')?)?;
    Some(HunkEdit {
        old_start,
        old_len,
        new_start,
        new_len,
        removed_lines: old_len,
        added_lines: new_len,
    })
}

fn strip_side(path: &str, prefix: &str) -> Option<String> {
    let p = unquote(path);
    if p == "/dev/null" {
        return None;
    }
    Some(p.strip_prefix(prefix).map(str::to_string).unwrap_or(p))
}

/// Paths from `diff --git a/X b/Y` when no other header names them.
fn paths_from_diff_line(rest: &str) -> Option<(String, String)> {
    if rest.starts_with('"') {
        let close = rest[1..].find("\" ").map(|i| i + 1)?;
        let a = unquote(&rest[..=close]);
        let b = unquote(rest[close + 2..].trim());
        return Some((
            a.strip_prefix("a/").unwrap_or(&a).to_string(),
            b.strip_prefix("b/").unwrap_or(&b).to_string(),
        ));
    }
    // Unquoted, same path on both sides: "a/P b/P".
    let n = rest.len();
    if n >= 5 && (n - 5) % 2 == 0 {
        let half = (n - 5) / 2;
        let a = &rest[2..2 + half];
        let b = &rest[n - half..];
        if rest.starts_with("a/") && &rest[2 + half..n - half] == " b/" && a == b {
            return Some((a.to_string(), b.to_string()));
        }
    }
    let idx = rest.find(" b/")?;
    Some((rest[2..idx].to_string(), rest[idx + 3..].to_string()))
}

#[derive(Default)]
struct Section {
    git_line: Option<(String, String)>,
    minus: Option<Option<String>>,
    plus: Option<Option<String>>,
    rename_from: Option<String>,
    rename_to: Option<String>,
    new_file: bool,
    deleted_file: bool,
    binary: bool,
    gitlink: bool,
    hunks: Vec<HunkEdit>,
}

impl Section {
    fn finish(self) -> Option<FileDiff> {
        if self.gitlink {
            return None;
        }
        let (git_old, git_new) = self.git_line.clone().unwrap_or_default();
        let is_rename = self.rename_from.is_some() && self.rename_to.is_some();
        let mut old_path = self
            .rename_from
            .clone()
            .or_else(|| self.minus.clone().flatten())
            .or_else(|| (!git_old.is_empty()).then(|| git_old.clone()));
        let mut new_path = self
            .rename_to
            .clone()
            .or_else(|| self.plus.clone().flatten())
            .or_else(|| (!git_new.is_empty()).then(|| git_new.clone()));
        if self.new_file || matches!(self.minus, Some(None)) {
            old_path = None;
        }
        if self.deleted_file || matches!(self.plus, Some(None)) {
            new_path = None;
        }
        if old_path.is_none() && new_path.is_none() {
            return None;
        }
        Some(FileDiff {
            old_path,
            new_path,
            is_binary: self.binary,
            too_large: false,
            is_rename,
            hunks: if self.binary { Vec::new() } else { self.hunks },
        })
    }
}

/// Parses the patch part of one commit's output into file diffs, in order.
pub(crate) fn parse_patch(lines: &[&str]) -> Vec<FileDiff> {
    let mut out = Vec::new();
    let mut cur: Option<Section> = None;
    let mut in_hunk = false;
    for line in lines {
        if let Some(rest) = line.strip_prefix("diff --git ") {
            if let Some(s) = cur.take().and_then(Section::finish) {
                out.push(s);
            }
            cur = Some(Section { git_line: paths_from_diff_line(rest), ..Default::default() });
            in_hunk = false;
            continue;
        }
        let Some(sec) = cur.as_mut() else { continue };
        if in_hunk {
            match line.as_bytes().first() {
                Some(b'+') | Some(b'-') | Some(b' ') | Some(b'\\') => continue,
                _ => {}
            }
        }
        if line.starts_with("@@ ") {
            if let Some(h) = parse_hunk_header(line) {
                sec.hunks.push(h);
            }
            in_hunk = true;
        } else if let Some(p) = line.strip_prefix("--- ") {
            sec.minus = Some(strip_side(p, "a/"));
        } else if let Some(p) = line.strip_prefix("+++ ") {
            sec.plus = Some(strip_side(p, "b/"));
        } else if let Some(p) = line.strip_prefix("rename from ") {
            sec.rename_from = Some(unquote(p));
        } else if let Some(p) = line.strip_prefix("rename to ") {
            sec.rename_to = Some(unquote(p));
        } else if let Some(mode) = line.strip_prefix("new file mode ") {
            sec.new_file = true;
            sec.gitlink |= mode.trim() == GITLINK_MODE;
        } else if let Some(mode) = line.strip_prefix("deleted file mode ") {
            sec.deleted_file = true;
            sec.gitlink |= mode.trim() == GITLINK_MODE;
        } else if let Some(idx) = line.strip_prefix("index ") {
            sec.gitlink |= idx.trim_end().ends_with(GITLINK_MODE);
        } else if line.starts_with("Binary files ") || line.starts_with("GIT binary patch") {
            sec.binary = true;
        }
    }
    if let Some(s) = cur.take().and_then(Section::finish) {
        out.push(s);
    }
    out
}

/// Marks diffs whose old or new blob exceeds `max_bytes` and drops gitlinks.
pub(crate) fn apply_size_limit(
    diffs: &mut Vec<FileDiff>,
    raw: &[RawEntry],
    sizes: &HashMap<String, u64>,
    max_bytes: u64,
) {
    let gitlinks: Vec<&str> = raw
        .iter()
        .filter(|r| r.is_gitlink())
        .map(|r| r.new_path.as_str())
        .collect();
    diffs.retain(|d| {
        let p = d.new_path.as_deref().or(d.old_path.as_deref()).unwrap_or("");
        !gitlinks.contains(&p)
    });
    for d in diffs.iter_mut() {
        let entry = raw.iter().find(|r| {
            Some(r.new_path.as_str()) == d.new_path.as_deref()
                || (d.new_path.is_none() && Some(r.old_path.as_str()) == d.old_path.as_deref())
        });
        let Some(r) = entry else { continue };
        let big = [&r.old_blob, &r.new_blob]
            .iter()
            .any(|b| sizes.get(b.as_str()).copied().unwrap_or(0) > max_bytes);
        if big {
            d.too_large = true;
            d.hunks.clear();
        }
    }
}
