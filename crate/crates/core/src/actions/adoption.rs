use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use chrono::{DateTime, TimeZone, Utc};
use serde::{Deserialize, Serialize};

use super::{is_workflow_path, parse_workflow, ActionRef, ActionsError, BotCatalog, WORKFLOW_DIR};
use crate::ingest::patch::parse_raw_line;
use crate::ingest::{GitRepo, IngestError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Evidence {
    WorkflowFileCommit,
    WorkflowRun,
}

/// One execution of a workflow, as reported by the hosting platform.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkflowRun {
    pub workflow_path: String,
    pub created_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdoptionRecord {
    pub repo: String,
    pub action: ActionRef,
    pub category: String,
    pub t_ga: DateTime<Utc>,
    pub commit_id: String,
    pub evidence: Evidence,
    pub first_run_time: Option<DateTime<Utc>>,
    /// Another catalog action of the same category adopted strictly earlier.
    pub prior_tool: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseFailure {
    pub commit_id: String,
    pub file: String,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdoptionScan {
    /// Sorted by adoption time, then action.
    pub records: Vec<AdoptionRecord>,
    pub parse_errors: Vec<ParseFailure>,
}

struct Touch {
    commit: String,
    time: i64,
    path: String,
    blob: String,
}

fn workflow_touches(repo: &GitRepo) -> Result<Vec<Touch>, IngestError> {
    let out = repo.run(&[
        "log", "--topo-order", "--reverse", "--full-history", "--no-renames", "--raw", "--no-abbrev",
        "--format=%x1e%H%x1f%at", "HEAD", "--", WORKFLOW_DIR,
    ])?;
    let mut touches = Vec::new();
    for block in out.split('\x1e').filter(|b| !b.trim().is_empty()) {
        let mut lines = block.lines();
        let header = lines.next().unwrap_or_default();
        let (commit, time) = header.split_once('\x1f').unwrap_or((header, "0"));
        let time: i64 = time.trim().parse().unwrap_or(0);
        for raw in lines.filter_map(parse_raw_line) {
            if raw.status == 'D' || raw.is_gitlink() || !is_workflow_path(&raw.new_path) {
                continue;
            }
            touches.push(Touch { commit: commit.to_string(), time, path: raw.new_path, blob: raw.new_blob });
        }
    }
    Ok(touches)
}

fn utc(secs: i64) -> DateTime<Utc> {
    Utc.timestamp_opt(secs, 0).single().unwrap_or_default()
}

/// Dates every catalog action ever introduced into a workflow file.
///
/// `t_ga` is the earliest author time of a commit whose version of a
/// workflow file references the action, so later removals do not hide an
/// adoption. Runs, when given, set `first_run_time` to the earliest run of
/// the adopting workflow at or after `t_ga`.
pub fn detect_adoption(
    repo_path: &Path,
    repo_id: &str,
    catalog: &BotCatalog,
    runs: Option<&[WorkflowRun]>,
) -> Result<AdoptionScan, ActionsError> {
    let repo = GitRepo::open(repo_path)?;
    if repo.head().is_err() {
        return Ok(AdoptionScan::default());
    }
    let touches = workflow_touches(&repo)?;
    let mut unique: Vec<&str> = touches.iter().map(|t| t.blob.as_str()).collect();
    unique.sort_unstable();
    unique.dedup();
    let contents = repo.blob_contents(&unique)?;
    let blobs: HashMap<&str, Option<Vec<u8>>> = unique.iter().copied().zip(contents).collect();

    let mut parsed: HashMap<&str, Result<Vec<ActionRef>, String>> = HashMap::new();
    let mut scan = AdoptionScan::default();
    // slug (lower case) -> (time, commit, action, category)
    let mut earliest: BTreeMap<String, (i64, String, ActionRef, String)> = BTreeMap::new();
    for t in &touches {
        let refs = parsed.entry(t.blob.as_str()).or_insert_with(|| {
            let text = blobs.get(t.blob.as_str()).cloned().flatten().unwrap_or_default();
            parse_workflow(&String::from_utf8_lossy(&text), &t.path).map_err(|e| e.to_string())
        });
        let refs = match refs {
            Ok(r) => r,
            Err(detail) => {
                scan.parse_errors.push(ParseFailure { commit_id: t.commit.clone(), file: t.path.clone(), detail: detail.clone() });
                continue;
            }
        };
        for r in refs.iter() {
            let Some(category) = catalog.category_of(r) else { continue };
            let key = r.slug().to_ascii_lowercase();
            let newer = earliest.get(&key).map_or(true, |(time, ..)| t.time < *time);
            if newer {
                earliest.insert(key, (t.time, t.commit.clone(), r.clone(), category.to_string()));
            }
        }
    }

    let mut records: Vec<AdoptionRecord> = earliest
        .into_values()
        .map(|(time, commit, action, category)| {
            let t_ga = utc(time);
            let first_run_time = runs.and_then(|runs| {
                runs.iter()
                    .filter(|r| r.workflow_path == action.source_file && r.created_at >= t_ga)
                    .map(|r| r.created_at)
                    .min()
            });
            AdoptionRecord {
                repo: repo_id.to_string(),
                evidence: if first_run_time.is_some() { Evidence::WorkflowRun } else { Evidence::WorkflowFileCommit },
                action,
                category,
                t_ga,
                commit_id: commit,
                first_run_time,
                prior_tool: None,
            }
        })
        .collect();
    records.sort_by(|a, b| (a.t_ga, a.action.slug()).cmp(&(b.t_ga, b.action.slug())));
    for i in 0..records.len() {
        let prior = records[..i]
            .iter()
            .find(|p| p.category == records[i].category && p.t_ga < records[i].t_ga)
            .map(|p| p.action.slug());
        records[i].prior_tool = prior;
    }
    scan.records = records;
    Ok(scan)
}

/// The study's treatment event: the earliest adoption in `category` that
/// has no earlier tool of the same category.
pub fn first_adoption<'a>(records: &'a [AdoptionRecord], category: &str) -> Option<&'a AdoptionRecord> {
    records
        .iter()
        .filter(|r| r.category == category)
        .min_by_key(|r| r.t_ga)
        .filter(|r| r.prior_tool.is_none())
}

/// References in the workflow files present at `rev`, with any files that
/// failed to parse.
pub fn workflow_refs_at(repo_path: &Path, rev: &str) -> Result<(Vec<ActionRef>, Vec<ParseFailure>), ActionsError> {
    let repo = GitRepo::open(repo_path)?;
    let listing = repo.run(&["ls-tree", "-r", "--full-tree", rev, "--", WORKFLOW_DIR])?;
    let mut files = Vec::new();
    for line in listing.lines() {
        let Some((meta, path)) = line.split_once('\t') else { continue };
        let mut it = meta.split_whitespace();
        let (Some(_mode), Some(kind), Some(id)) = (it.next(), it.next(), it.next()) else { continue };
        let path = crate::ingest::patch::unquote(path);
        if kind == "blob" && is_workflow_path(&path) {
            files.push((path, id.to_string()));
        }
    }
    let ids: Vec<&str> = files.iter().map(|f| f.1.as_str()).collect();
    let contents = repo.blob_contents(&ids)?;
    let mut refs = Vec::new();
    let mut failures = Vec::new();
    for ((path, _), body) in files.iter().zip(contents) {
        let text = String::from_utf8_lossy(&body.unwrap_or_default()).into_owned();
        match parse_workflow(&text, path) {
            Ok(r) => refs.extend(r),
            Err(e) => failures.push(ParseFailure { commit_id: rev.to_string(), file: path.clone(), detail: e.to_string() }),
        }
    }
    Ok((refs, failures))
}
