//! Commit history extraction from local git repositories.
//!
//! The walk shells out to the system `git` and parses `--raw -p -U0`
//! output, so every hunk header maps directly onto a line-range edit.

mod git;
mod identity;
pub(crate) mod patch;

use std::collections::HashMap;
use std::path::Path;

use chrono::{DateTime, TimeZone, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use git::GitRepo;
pub use identity::{resolve_identity, wildcard_match, AliasMap, AuthorId, DEFAULT_BOT_PATTERNS};

use patch::{apply_size_limit, parse_patch, parse_raw_line, RawEntry};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("not a git repository: {0}")]
    NotARepository(String),
    #[error("repository has no commits: {0}")]
    EmptyRepository(String),
    #[error("corrupt or unreadable object in commit {commit}: {detail}")]
    CorruptObject { commit: String, detail: String },
    #[error("author has neither name nor email")]
    UnidentifiableAuthor,
    #[error("git failed: {0}")]
    Git(String),
}

/// One contiguous line-range edit, as in a `-U0` hunk header.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HunkEdit {
    /// 1-based; for pure insertions this is the line *after which* lines are added (may be 0).
    pub old_start: u32,
    pub old_len: u32,
    pub new_start: u32,
    pub new_len: u32,
    pub removed_lines: u32,
    pub added_lines: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDiff {
    pub old_path: Option<String>,
    pub new_path: Option<String>,
    pub is_binary: bool,
    /// Old or new blob exceeded the configured size limit; hunks are dropped.
    #[serde(default)]
    pub too_large: bool,
    pub is_rename: bool,
    pub hunks: Vec<HunkEdit>,
}

impl FileDiff {
    /// Whether line-level tracking applies to this diff.
    pub fn is_tracked(&self) -> bool {
        !self.is_binary && !self.too_large
    }

    pub fn path(&self) -> &str {
        self.new_path
            .as_deref()
            .or(self.old_path.as_deref())
            .expect("file diff has at least one path")
    }

    pub fn added(&self) -> u64 {
        self.hunks.iter().map(|h| h.added_lines as u64).sum()
    }

    pub fn removed(&self) -> u64 {
        self.hunks.iter().map(|h| h.removed_lines as u64).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommitRecord {
    pub commit_id: String,
    pub author: AuthorId,
    pub author_time: DateTime<Utc>,
    pub parent_ids: Vec<String>,
    pub is_merge: bool,
    pub file_diffs: Vec<FileDiff>,
    /// For skipped merges: the diff against each parent, in parent order.
    /// Used only to keep line ownership in sync; never produces events.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub merge_parent_diffs: Vec<Vec<FileDiff>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MergePolicy {
    /// Merges carry no diffs; their changes are attributed via the branch commits.
    #[default]
    Skip,
    /// Merges are diffed against their first parent like ordinary commits.
    FirstParent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestOptions {
    pub merge_policy: MergePolicy,
    /// Files whose blob exceeds this many bytes are excluded from line tracking.
    pub max_file_bytes: u64,
    /// Rename detection similarity, in percent.
    pub rename_threshold: u8,
    pub alias_map: AliasMap,
    pub bot_patterns: Vec<String>,
}

impl Default for IngestOptions {
    fn default() -> Self {
        Self {
            merge_policy: MergePolicy::Skip,
            max_file_bytes: 1 << 20,
            rename_threshold: 50,
            alias_map: AliasMap::new(),
            bot_patterns: DEFAULT_BOT_PATTERNS.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl IngestOptions {
    /// Stable hex digest of the options, used in cache keys.
    pub fn options_hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("options serialize");
        hex::encode(Sha256::digest(json))
    }
}

const HEADER_SEP: char = '\u{1f}';
const RECORD_SEP: char = '\u{1e}';
const LOG_FORMAT: &str = "--format=%x1e%H%x1f%P%x1f%an%x1f%ae%x1f%at";

fn diff_args(opts: &IngestOptions) -> Vec<String> {
    vec![
        "--raw".into(),
        "--no-abbrev".into(),
        "-p".into(),
        "-U0".into(),
        format!("-M{}%", opts.rename_threshold.min(100)),
        "--no-color".into(),
        "--no-ext-diff".into(),
        "--no-textconv".into(),
        "--diff-algorithm=myers".into(),
    ]
}

struct ParsedBlock {
    commit_id: String,
    parents: Vec<String>,
    name: String,
    email: String,
    time: i64,
    raw: Vec<RawEntry>,
    diffs: Vec<FileDiff>,
}

fn parse_block(block: &str) -> Option<ParsedBlock> {
    let mut lines = block.lines();
    let header = lines.next()?;
    let fields: Vec<&str> = header.split(HEADER_SEP).collect();
    if fields.len() < 5 {
        return None;
    }
    let rest: Vec<&str> = lines.collect();
    let raw = rest.iter().filter_map(|l| parse_raw_line(l)).collect();
    Some(ParsedBlock {
        commit_id: fields[0].trim().to_string(),
        parents: fields[1].split_whitespace().map(str::to_string).collect(),
        name: fields[2].to_string(),
        email: fields[3].to_string(),
        time: fields[4].trim().parse().ok()?,
        raw,
        diffs: parse_patch(&rest),
    })
}

fn diff_against(
    repo: &GitRepo,
    opts: &IngestOptions,
    parent: &str,
    commit: &str,
) -> Result<(Vec<RawEntry>, Vec<FileDiff>), IngestError> {
    let mut args = vec!["diff-tree".to_string(), "-r".into()];
    args.extend(diff_args(opts));
    args.push(parent.to_string());
    args.push(commit.to_string());
    let refs: Vec<&str> = args.iter().map(String::as_str).collect();
    let out = repo.run(&refs).map_err(|e| IngestError::CorruptObject {
        commit: commit.to_string(),
        detail: e.to_string(),
    })?;
    let lines: Vec<&str> = out.lines().collect();
    let raw = lines.iter().filter_map(|l| parse_raw_line(l)).collect();
    Ok((raw, parse_patch(&lines)))
}

/// Walks the default branch's full ancestry, parents before children.
pub fn walk_history(repo_path: &Path, opts: &IngestOptions) -> Result<Vec<CommitRecord>, IngestError> {
    let repo = GitRepo::open(repo_path)?;
    let head = repo.head()?;

    let mut args: Vec<String> = vec![
        "log".into(),
        "--topo-order".into(),
        "--reverse".into(),
        "--root".into(),
        LOG_FORMAT.into(),
    ];
    args.extend(diff_args(opts));
    args.push(head.clone());
    let refs: Vec<&str> = args.iter().map(String::as_str).collect();
    let out = repo.run(&refs).map_err(|e| IngestError::CorruptObject {
        commit: head.clone(),
        detail: e.to_string(),
    })?;

    let mut blocks: Vec<ParsedBlock> = Vec::new();
    for chunk in out.split(RECORD_SEP).filter(|c| !c.trim().is_empty()) {
        let block = parse_block(chunk).ok_or_else(|| IngestError::CorruptObject {
            commit: chunk.lines().next().unwrap_or("").chars().take(40).collect(),
            detail: "unparseable log record".into(),
        })?;
        blocks.push(block);
    }

    // Merge diffs come from separate diff-tree calls.
    let mut merge_diffs: HashMap<String, Vec<(Vec<RawEntry>, Vec<FileDiff>)>> = HashMap::new();
    for b in blocks.iter().filter(|b| b.parents.len() >= 2) {
        let per_parent = match opts.merge_policy {
            MergePolicy::Skip => b
                .parents
                .iter()
                .map(|p| diff_against(&repo, opts, p, &b.commit_id))
                .collect::<Result<Vec<_>, _>>()?,
            MergePolicy::FirstParent => vec![diff_against(&repo, opts, &b.parents[0], &b.commit_id)?],
        };
        merge_diffs.insert(b.commit_id.clone(), per_parent);
    }

    let mut blob_ids: Vec<&str> = blocks
        .iter()
        .flat_map(|b| b.raw.iter())
        .chain(merge_diffs.values().flatten().flat_map(|(r, _)| r.iter()))
        .flat_map(|r| [r.old_blob.as_str(), r.new_blob.as_str()])
        .collect();
    blob_ids.sort_unstable();
    blob_ids.dedup();
    let sizes = repo.blob_sizes(&blob_ids)?;

    let mut records = Vec::with_capacity(blocks.len());
    for b in blocks {
        if b.time < 0 {
            return Err(IngestError::CorruptObject {
                commit: b.commit_id,
                detail: "author time before 1970".into(),
            });
        }
        let author = resolve_identity(&b.name, &b.email, &opts.alias_map, &opts.bot_patterns)
            .map_err(|e| IngestError::CorruptObject { commit: b.commit_id.clone(), detail: e.to_string() })?;
        let author_time = Utc.timestamp_opt(b.time, 0).single().ok_or_else(|| IngestError::CorruptObject {
            commit: b.commit_id.clone(),
            detail: "invalid author time".into(),
        })?;
        let is_merge = b.parents.len() >= 2;
        let (file_diffs, merge_parent_diffs) = if is_merge {
            let per_parent = merge_diffs.remove(&b.commit_id).unwrap_or_default();
            let mut limited: Vec<Vec<FileDiff>> = per_parent
                .into_iter()
                .map(|(raw, mut d)| {
                    apply_size_limit(&mut d, &raw, &sizes, opts.max_file_bytes);
                    d
                })
                .collect();
            match opts.merge_policy {
                MergePolicy::Skip => (Vec::new(), limited),
                MergePolicy::FirstParent => (limited.pop().unwrap_or_default(), Vec::new()),
            }
        } else {
            let mut d = b.diffs;
            apply_size_limit(&mut d, &b.raw, &sizes, opts.max_file_bytes);
            (d, Vec::new())
        };
        records.push(CommitRecord {
            commit_id: b.commit_id,
            author,
            author_time,
            parent_ids: b.parents,
            is_merge,
            file_diffs,
            merge_parent_diffs,
        });
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_log_block() {
        let block = "abc\u{1f}p1 p2\u{1f}Alice\u{1f}a@x\u{1f}1600000000\n\n:100644 100644 1111 2222 M\tf\n\ndiff --git a/f b/f\nindex 1..2 100644\n--- a/f\n+++ b/f\n@@ -1 +1 @@\n-a\n+b\n";
        let b = parse_block(block).unwrap();
        assert_eq!(b.commit_id, "abc");
        assert_eq!(b.parents, vec!["p1", "p2"]);
        assert_eq!(b.time, 1_600_000_000);
        assert_eq!(b.raw.len(), 1);
        assert_eq!(b.diffs.len(), 1);
        assert_eq!(b.diffs[0].hunks[0].removed_lines, 1);
    }

    #[test]
    fn options_hash_is_stable() {
        let a = IngestOptions::default();
        assert_eq!(a.options_hash(), IngestOptions::default().options_hash());
        let b = IngestOptions { max_file_bytes: 10, ..Default::default() };
        assert_ne!(a.options_hash(), b.options_hash());
    }

    #[test]
    fn missing_repo() {
        let err = walk_history(Path::new("/definitely/not/here"), &IngestOptions::default()).unwrap_err();
        assert!(matches!(err, IngestError::NotARepository(_)));
    }
}
