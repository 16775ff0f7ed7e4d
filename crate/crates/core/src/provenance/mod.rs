//! Streaming line ownership and co-editing event extraction.
//!
//! Every tracked file is a vector of line owners. A commit's hunks splice
//! that vector; each removed line whose owner differs from the committing
//! author becomes one line of a co-editing event.

pub mod cache;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;
use std::sync::Arc;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{walk_history, AuthorId, CommitRecord, FileDiff, IngestError, IngestOptions};

pub use cache::{CacheError, CacheStatus, EventCache, LogHeader};

#[derive(Debug, Error)]
pub enum ProvenanceError {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error("state desync in {commit} at {file}: {detail}")]
    StateDesync { commit: String, file: String, detail: String },
    #[error("parent state missing for {commit} (parent {parent})")]
    MissingParent { commit: String, parent: String },
}

/// Owner of one line. `owner` is `None` when the line's history was not
/// tracked (it passed through a binary or oversized version of the file).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LineEntry {
    pub owner: Option<Arc<AuthorId>>,
    pub written_at: DateTime<Utc>,
}

/// Per-file line ownership for one snapshot of the repository.
#[derive(Debug, Clone, Default)]
pub struct LineOwnershipState {
    files: BTreeMap<String, Arc<Vec<LineEntry>>>,
    /// Paths whose line count is not fully known.
    untracked: BTreeSet<String>,
}

impl LineOwnershipState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Lines of `path`; index 0 is line 1.
    pub fn lines(&self, path: &str) -> Option<&[LineEntry]> {
        self.files.get(path).map(|v| v.as_slice())
    }

    pub fn owner_of(&self, path: &str, line: usize) -> Option<&AuthorId> {
        self.lines(path)?
            .get(line.checked_sub(1)?)?
            .owner
            .as_deref()
    }

    pub fn is_untracked(&self, path: &str) -> bool {
        self.untracked.contains(path)
    }

    pub fn paths(&self) -> impl Iterator<Item = &str> {
        self.files.keys().map(String::as_str)
    }

    pub fn file_count(&self) -> usize {
        self.files.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoEditEvent {
    pub editor: AuthorId,
    pub original_author: AuthorId,
    pub file: String,
    pub commit_id: String,
    pub time: DateTime<Utc>,
    pub lines: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContributionEvent {
    pub developer: AuthorId,
    pub file: String,
    pub commit_id: String,
    pub time: DateTime<Utc>,
    pub lines_added: u64,
    pub lines_removed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventLog {
    pub repo: String,
    pub head_commit: String,
    pub coedits: Vec<CoEditEvent>,
    pub contributions: Vec<ContributionEvent>,
}

impl EventLog {
    /// Sorts both event lists by time, then commit id, then remaining fields.
    pub fn canonicalize(&mut self) {
        self.coedits.sort_by(|a, b| {
            (a.time, &a.commit_id, &a.file, &a.editor.canonical_key, &a.original_author.canonical_key).cmp(&(
                b.time,
                &b.commit_id,
                &b.file,
                &b.editor.canonical_key,
                &b.original_author.canonical_key,
            ))
        });
        self.contributions.sort_by(|a, b| {
            (a.time, &a.commit_id, &a.file, &a.developer.canonical_key)
                .cmp(&(b.time, &b.commit_id, &b.file, &b.developer.canonical_key))
        });
    }

    /// Commit timestamps of all contributions, ascending.
    pub fn activity_times(&self) -> Vec<DateTime<Utc>> {
        let mut seen = BTreeSet::new();
        for c in &self.contributions {
            seen.insert((c.time, c.commit_id.as_str()));
        }
        seen.into_iter().map(|(t, _)| t).collect()
    }
}

/// Output of applying one commit.
#[derive(Debug, Clone, Default)]
pub struct CommitEvents {
    pub coedits: Vec<CoEditEvent>,
    pub contributions: Vec<ContributionEvent>,
}

fn desync(commit: &CommitRecord, file: &str, detail: String) -> ProvenanceError {
    ProvenanceError::StateDesync { commit: commit.commit_id.clone(), file: file.to_string(), detail }
}

/// Applies hunks to `old`, producing the new line vector and the removed entries.
/// `fill` produces entries for added lines. Untracked files are padded with
/// unknown owners instead of failing on out-of-range hunks.
fn splice<F>(
    commit: &CommitRecord,
    diff: &FileDiff,
    old: &[LineEntry],
    untracked: bool,
    mut fill: F,
) -> Result<(Vec<LineEntry>, Vec<LineEntry>), ProvenanceError>
where
    F: FnMut() -> LineEntry,
{
    let mut old = old.to_vec();
    let unknown = LineEntry { owner: None, written_at: commit.author_time };
    let mut new = Vec::with_capacity(old.len() + diff.added() as usize);
    let mut removed = Vec::with_capacity(diff.removed() as usize);
    let mut pos = 0usize;
    for h in &diff.hunks {
        let before = if h.old_len == 0 { h.old_start as usize } else { h.old_start as usize - 1 };
        let end = before + h.old_len as usize;
        if before < pos {
            return Err(desync(commit, diff.path(), format!("overlapping hunk at old line {}", h.old_start)));
        }
        if end > old.len() {
            if untracked {
                old.resize(end, unknown.clone());
            } else {
                return Err(desync(
                    commit,
                    diff.path(),
                    format!("hunk -{},{} exceeds tracked length {}", h.old_start, h.old_len, old.len()),
                ));
            }
        }
        new.extend_from_slice(&old[pos..before]);
        let expect_new_before = if h.new_len == 0 { h.new_start as usize } else { h.new_start as usize - 1 };
        if new.len() != expect_new_before {
            return Err(desync(
                commit,
                diff.path(),
                format!("hunk +{} expected {} preceding lines, have {}", h.new_start, expect_new_before, new.len()),
            ));
        }
        removed.extend_from_slice(&old[before..end]);
        for _ in 0..h.new_len {
            new.push(fill());
        }
        pos = end;
    }
    new.extend_from_slice(&old[pos.min(old.len())..]);
    Ok((new, removed))
}

/// Applies a non-merge commit (or a first-parent-diffed merge) to the parent snapshot.
pub fn apply_commit(
    mut state: LineOwnershipState,
    commit: &CommitRecord,
) -> Result<(LineOwnershipState, CommitEvents), ProvenanceError> {
    let author = Arc::new(commit.author.clone());
    let mut events = CommitEvents::default();

    // Renames can chain or swap within one commit, so read all sources first.
    let sources: Vec<(Option<Arc<Vec<LineEntry>>>, bool)> = commit
        .file_diffs
        .iter()
        .map(|d| match &d.old_path {
            Some(p) => (state.files.get(p).cloned(), state.untracked.contains(p)),
            None => (None, false),
        })
        .collect();
    for d in &commit.file_diffs {
        if let Some(p) = &d.old_path {
            state.files.remove(p);
            state.untracked.remove(p);
        }
    }

    for (d, (src, src_untracked)) in commit.file_diffs.iter().zip(sources) {
        let file = d.path().to_string();
        if !d.is_tracked() {
            if let Some(p) = &d.new_path {
                state.untracked.insert(p.clone());
                state.files.insert(p.clone(), Arc::new(Vec::new()));
            }
            continue;
        }
        let untracked = src_untracked || (d.old_path.is_some() && src.is_none());
        let old: &[LineEntry] = src.as_deref().map(|v| v.as_slice()).unwrap_or(&[]);
        let fill_entry = LineEntry { owner: Some(author.clone()), written_at: commit.author_time };
        let (new, removed) = splice(commit, d, old, untracked, || fill_entry.clone())?;

        let mut per_owner: BTreeMap<&str, (&AuthorId, u64)> = BTreeMap::new();
        for e in &removed {
            if let Some(o) = e.owner.as_deref() {
                if o.canonical_key != author.canonical_key {
                    per_owner.entry(o.canonical_key.as_str()).or_insert((o, 0)).1 += 1;
                }
            }
        }
        for (_, (owner, lines)) in per_owner {
            events.coedits.push(CoEditEvent {
                editor: commit.author.clone(),
                original_author: owner.clone(),
                file: file.clone(),
                commit_id: commit.commit_id.clone(),
                time: commit.author_time,
                lines,
            });
        }
        let (added, rem) = (d.added(), d.removed());
        if added + rem > 0 {
            events.contributions.push(ContributionEvent {
                developer: commit.author.clone(),
                file: file.clone(),
                commit_id: commit.commit_id.clone(),
                time: commit.author_time,
                lines_added: added,
                lines_removed: rem,
            });
        }
        if let Some(p) = &d.new_path {
            if untracked {
                state.untracked.insert(p.clone());
            }
            state.files.insert(p.clone(), Arc::new(new));
        }
    }
    Ok((state, events))
}

/// Line origins of `path` at the merge, as inherited from one parent.
/// `None` entries were introduced relative to that parent.
fn inherited(
    merge: &CommitRecord,
    parent: &LineOwnershipState,
    diffs: &[FileDiff],
    path: &str,
) -> Option<Vec<Option<LineEntry>>> {
    match diffs.iter().find(|d| d.new_path.as_deref() == Some(path)) {
        None => {
            if parent.untracked.contains(path) {
                return None;
            }
            parent
                .files
                .get(path)
                .map(|v| v.iter().cloned().map(Some).collect())
        }
        Some(d) if !d.is_tracked() => None,
        Some(d) => {
            let (old, untracked) = match &d.old_path {
                Some(p) => (parent.files.get(p)?.as_slice().to_vec(), parent.untracked.contains(p)),
                None => (Vec::new(), false),
            };
            if untracked {
                return None;
            }
            let marker = LineEntry { owner: None, written_at: DateTime::<Utc>::MIN_UTC };
            let (new, _) = splice(merge, d, &old, false, || marker.clone()).ok()?;
            Some(
                new.into_iter()
                    .map(|e| (e.written_at != DateTime::<Utc>::MIN_UTC).then_some(e))
                    .collect(),
            )
        }
    }
}

/// Snapshot after a merge under the skip policy. Lines pass to the first
/// parent they are unchanged against (in parent order); lines new against
/// every parent belong to the merge author. No events are produced.
pub fn apply_merge(
    parents: &[&LineOwnershipState],
    merge: &CommitRecord,
) -> Result<LineOwnershipState, ProvenanceError> {
    let Some(first) = parents.first() else {
        return Ok(LineOwnershipState::new());
    };
    let Some(first_diffs) = merge.merge_parent_diffs.first() else {
        return Ok((*first).clone());
    };
    let author = Arc::new(merge.author.clone());
    let mut state = (*first).clone();
    for d in first_diffs {
        if let Some(p) = &d.old_path {
            state.files.remove(p);
            state.untracked.remove(p);
        }
    }
    for d in first_diffs {
        let Some(path) = &d.new_path else { continue };
        if !d.is_tracked() {
            state.untracked.insert(path.clone());
            state.files.insert(path.clone(), Arc::new(Vec::new()));
            continue;
        }
        let maps: Vec<Option<Vec<Option<LineEntry>>>> = parents
            .iter()
            .zip(merge.merge_parent_diffs.iter())
            .map(|(p, diffs)| inherited(merge, p, diffs, path))
            .collect();
        let Some(Some(base)) = maps.first() else {
            // First parent's copy is untracked: keep the path untracked.
            state.untracked.insert(path.clone());
            state.files.insert(path.clone(), Arc::new(Vec::new()));
            continue;
        };
        let n = base.len();
        let lines = (0..n)
            .map(|i| {
                maps.iter()
                    .flatten()
                    .filter(|m| m.len() == n)
                    .find_map(|m| m[i].clone())
                    .unwrap_or_else(|| LineEntry { owner: Some(author.clone()), written_at: merge.author_time })
            })
            .collect();
        state.files.insert(path.clone(), Arc::new(lines));
    }
    Ok(state)
}

fn take_parent<'a>(
    snaps: &mut HashMap<&'a str, LineOwnershipState>,
    pending: &mut HashMap<&'a str, usize>,
    commit: &CommitRecord,
    parent: &str,
) -> Result<LineOwnershipState, ProvenanceError> {
    let left = pending.get_mut(parent).map(|n| {
        *n -= 1;
        *n
    });
    match left {
        Some(0) => snaps.remove(parent),
        _ => snaps.get(parent).cloned(),
    }
    .ok_or_else(|| ProvenanceError::MissingParent { commit: commit.commit_id.clone(), parent: parent.to_string() })
}

/// Replays a full history, calling `visit` with each commit and the
/// snapshot after it. Snapshots are shared between commits where possible.
pub fn replay<F>(records: &[CommitRecord], mut visit: F) -> Result<CommitEvents, ProvenanceError>
where
    F: FnMut(&CommitRecord, &LineOwnershipState),
{
    let mut pending_children: HashMap<&str, usize> = HashMap::new();
    for r in records {
        for p in &r.parent_ids {
            *pending_children.entry(p.as_str()).or_default() += 1;
        }
    }
    let mut snapshots: HashMap<&str, LineOwnershipState> = HashMap::new();
    let mut all = CommitEvents::default();

    for r in records {
        let state = if r.is_merge && r.file_diffs.is_empty() && !r.merge_parent_diffs.is_empty() {
            let parents = r
                .parent_ids
                .iter()
                .map(|p| take_parent(&mut snapshots, &mut pending_children, r, p))
                .collect::<Result<Vec<_>, _>>()?;
            let refs: Vec<&LineOwnershipState> = parents.iter().collect();
            apply_merge(&refs, r)?
        } else {
            let parent = match r.parent_ids.first() {
                Some(p) => take_parent(&mut snapshots, &mut pending_children, r, p)?,
                None => LineOwnershipState::new(),
            };
            for p in r.parent_ids.iter().skip(1) {
                take_parent(&mut snapshots, &mut pending_children, r, p)?;
            }
            let (state, ev) = apply_commit(parent, r)?;
            all.coedits.extend(ev.coedits);
            all.contributions.extend(ev.contributions);
            state
        };
        visit(r, &state);
        if pending_children.get(r.commit_id.as_str()).copied().unwrap_or(0) > 0 {
            snapshots.insert(r.commit_id.as_str(), state);
        }
    }
    Ok(all)
}

/// Builds an event log from already-ingested records.
pub fn events_from_records(
    repo: &str,
    records: &[CommitRecord],
) -> Result<EventLog, ProvenanceError> {
    let ev = replay(records, |_, _| {})?;
    let mut log = EventLog {
        repo: repo.to_string(),
        head_commit: records.last().map(|r| r.commit_id.clone()).unwrap_or_default(),
        coedits: ev.coedits,
        contributions: ev.contributions,
    };
    log.canonicalize();
    Ok(log)
}

/// Walks the repository and folds every commit into an event log.
pub fn extract_events(repo_path: &Path, opts: &IngestOptions) -> Result<EventLog, ProvenanceError> {
    let records = walk_history(repo_path, opts)?;
    let repo = repo_path
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| repo_path.display().to_string());
    events_from_records(&repo, &records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::HunkEdit;
    use chrono::TimeZone;

    fn who(name: &str) -> AuthorId {
        AuthorId { canonical_key: format!("{name}@x"), display_name: name.into(), is_bot: false }
    }

    fn hunk(old_start: u32, old_len: u32, new_start: u32, new_len: u32) -> HunkEdit {
        HunkEdit { old_start, old_len, new_start, new_len, removed_lines: old_len, added_lines: new_len }
    }

    fn commit(id: &str, author: &str, t: i64, diffs: Vec<FileDiff>) -> CommitRecord {
        CommitRecord {
            commit_id: id.into(),
            author: who(author),
            author_time: Utc.timestamp_opt(t, 0).unwrap(),
            parent_ids: vec![],
            is_merge: false,
            file_diffs: diffs,
            merge_parent_diffs: vec![],
        }
    }

    fn modify(path: &str, hunks: Vec<HunkEdit>) -> FileDiff {
        FileDiff {
            old_path: Some(path.into()),
            new_path: Some(path.into()),
            is_binary: false,
            too_large: false,
            is_rename: false,
            hunks,
        }
    }

    fn add(path: &str, n: u32) -> FileDiff {
        FileDiff { old_path: None, ..modify(path, vec![hunk(0, 0, 1, n)]) }
    }

    fn owners(s: &LineOwnershipState, p: &str) -> Vec<String> {
        s.lines(p).unwrap().iter().map(|e| e.owner.as_ref().unwrap().display_name.clone()).collect()
    }

    #[test]
    fn three_commit_scenario() {
        let c1 = commit("c1", "Alice", 10, vec![add("f", 3)]);
        let (s, e1) = apply_commit(LineOwnershipState::new(), &c1).unwrap();
        assert!(e1.coedits.is_empty());
        assert_eq!(e1.contributions.len(), 1);

        let c2 = commit("c2", "Bob", 20, vec![modify("f", vec![hunk(2, 1, 2, 1)])]);
        let (s, e2) = apply_commit(s, &c2).unwrap();
        assert_eq!(e2.coedits.len(), 1);
        let ev = &e2.coedits[0];
        assert_eq!((ev.editor.display_name.as_str(), ev.original_author.display_name.as_str(), ev.lines), ("Bob", "Alice", 1));
        assert_eq!(ev.time, Utc.timestamp_opt(20, 0).unwrap());
        assert_eq!(owners(&s, "f"), ["Alice", "Bob", "Alice"]);

        // Carol deletes line 1 (Alice) and line 3 (Alice) -> aggregated per original author.
        let c3 = commit("c3", "Carol", 30, vec![modify("f", vec![hunk(1, 1, 0, 0), hunk(3, 1, 1, 0)])]);
        let (s, e3) = apply_commit(s, &c3).unwrap();
        assert_eq!(e3.coedits.len(), 1);
        assert_eq!(e3.coedits[0].lines, 2);
        assert_eq!(owners(&s, "f"), ["Bob"]);
    }

    #[test]
    fn self_edit_produces_no_coedit() {
        let (s, _) = apply_commit(LineOwnershipState::new(), &commit("c1", "Alice", 1, vec![add("f", 3)])).unwrap();
        let (_, e) = apply_commit(s, &commit("c2", "Alice", 2, vec![modify("f", vec![hunk(2, 1, 2, 1)])])).unwrap();
        assert!(e.coedits.is_empty());
        assert_eq!(e.contributions.len(), 1);
        assert_eq!((e.contributions[0].lines_added, e.contributions[0].lines_removed), (1, 1));
    }

    #[test]
    fn insertion_after_line() {
        let (s, _) = apply_commit(LineOwnershipState::new(), &commit("c1", "Alice", 1, vec![add("f", 2)])).unwrap();
        let (s, e) = apply_commit(s, &commit("c2", "Bob", 2, vec![modify("f", vec![hunk(1, 0, 2, 2)])])).unwrap();
        assert!(e.coedits.is_empty());
        assert_eq!(owners(&s, "f"), ["Alice", "Bob", "Bob", "Alice"]);
    }

    #[test]
    fn out_of_range_hunk_is_desync() {
        let (s, _) = apply_commit(LineOwnershipState::new(), &commit("c1", "Alice", 1, vec![add("f", 2)])).unwrap();
        let err = apply_commit(s, &commit("c2", "Bob", 2, vec![modify("f", vec![hunk(5, 1, 5, 1)])])).unwrap_err();
        assert!(matches!(err, ProvenanceError::StateDesync { .. }));
    }

    #[test]
    fn rename_keeps_ownership() {
        let (s, _) = apply_commit(LineOwnershipState::new(), &commit("c1", "Alice", 1, vec![add("a", 2)])).unwrap();
        let mut d = modify("a", vec![hunk(2, 1, 2, 1)]);
        d.new_path = Some("b".into());
        d.is_rename = true;
        let (s, e) = apply_commit(s, &commit("c2", "Bob", 2, vec![d])).unwrap();
        assert!(s.lines("a").is_none());
        assert_eq!(owners(&s, "b"), ["Alice", "Bob"]);
        assert_eq!(e.coedits[0].file, "b");
    }

    #[test]
    fn deletion_counts_every_line() {
        let (s, _) = apply_commit(LineOwnershipState::new(), &commit("c1", "Alice", 1, vec![add("f", 4)])).unwrap();
        let mut d = modify("f", vec![hunk(1, 4, 0, 0)]);
        d.new_path = None;
        let (s, e) = apply_commit(s, &commit("c2", "Bob", 2, vec![d])).unwrap();
        assert!(s.lines("f").is_none());
        assert_eq!(e.coedits[0].lines, 4);
    }

    #[test]
    fn binary_then_text_is_untracked() {
        let mut bin = add("f", 0);
        bin.is_binary = true;
        bin.hunks.clear();
        let (s, e) = apply_commit(LineOwnershipState::new(), &commit("c1", "Alice", 1, vec![bin])).unwrap();
        assert!(e.contributions.is_empty());
        assert!(s.is_untracked("f"));
        let (s, e) = apply_commit(s, &commit("c2", "Bob", 2, vec![modify("f", vec![hunk(3, 1, 3, 1)])])).unwrap();
        assert!(e.coedits.is_empty());
        assert_eq!(s.lines("f").unwrap().len(), 3);
        assert!(s.owner_of("f", 1).is_none());
        assert_eq!(s.owner_of("f", 3).unwrap().display_name, "Bob");
    }

    #[test]
    fn merge_takes_owners_from_both_sides() {
        let mut base = commit("base", "Alice", 1, vec![add("f", 3)]);
        base.parent_ids = vec![];
        let mut left = commit("left", "Bob", 2, vec![modify("f", vec![hunk(1, 1, 1, 1)])]);
        left.parent_ids = vec!["base".into()];
        let mut right = commit("right", "Carol", 3, vec![modify("f", vec![hunk(3, 1, 3, 1)])]);
        right.parent_ids = vec!["base".into()];
        let mut merge = commit("merge", "Dan", 4, vec![]);
        merge.parent_ids = vec!["left".into(), "right".into()];
        merge.is_merge = true;
        merge.merge_parent_diffs = vec![
            vec![modify("f", vec![hunk(3, 1, 3, 1)])],
            vec![modify("f", vec![hunk(1, 1, 1, 1)])],
        ];
        let mut last = None;
        let ev = replay(&[base, left, right, merge], |c, s| {
            if c.commit_id == "merge" {
                last = Some(owners(s, "f"));
            }
        })
        .unwrap();
        assert_eq!(last.unwrap(), ["Bob", "Alice", "Carol"]);
        assert_eq!(ev.coedits.len(), 2);
    }
}
