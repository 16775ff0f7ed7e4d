use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::{extract_events, CoEditEvent, ContributionEvent, EventLog, ProvenanceError};
use crate::ingest::{GitRepo, IngestOptions};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum CacheError {
    #[error("cache io: {0}")]
    Io(#[from] std::io::Error),
    #[error("cache corrupt: {0}")]
    CacheCorrupt(String),
}

/// First line of a cache file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogHeader {
    pub repo: String,
    pub head_commit: String,
    pub options_hash: String,
    pub tool_version: String,
    /// SHA-256 over the event lines that follow the header.
    pub checksum: String,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum EventLine {
    Coedit(CoEditEvent),
    Contribution(ContributionEvent),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CacheStatus {
    Hit,
    Miss,
    /// A cache file existed but failed validation and was recomputed.
    Recomputed,
}

fn event_lines(log: &EventLog) -> Vec<String> {
    log.coedits
        .iter()
        .cloned()
        .map(EventLine::Coedit)
        .chain(log.contributions.iter().cloned().map(EventLine::Contribution))
        .map(|e| serde_json::to_string(&e).expect("event serializes"))
        .collect()
}

fn checksum(lines: &[String]) -> String {
    let mut h = Sha256::new();
    for l in lines {
        h.update(l.as_bytes());
        h.update(b"\n");
    }
    hex::encode(h.finalize())
}

/// Serializes a log as NDJSON: header object, then one event per line.
pub fn encode(log: &EventLog, options_hash: &str) -> String {
    let lines = event_lines(log);
    let header = LogHeader {
        repo: log.repo.clone(),
        head_commit: log.head_commit.clone(),
        options_hash: options_hash.to_string(),
        tool_version: TOOL_VERSION.to_string(),
        checksum: checksum(&lines),
    };
    let mut out = serde_json::to_string(&header).expect("header serializes");
    out.push('\n');
    for l in lines {
        out.push_str(&l);
        out.push('\n');
    }
    out
}

pub fn decode(text: &str) -> Result<(LogHeader, EventLog), CacheError> {
    let mut it = text.lines();
    let header: LogHeader = serde_json::from_str(it.next().unwrap_or(""))
        .map_err(|e| CacheError::CacheCorrupt(format!("header: {e}")))?;
    let lines: Vec<String> = it.filter(|l| !l.is_empty()).map(str::to_string).collect();
    if checksum(&lines) != header.checksum {
        return Err(CacheError::CacheCorrupt("checksum mismatch".into()));
    }
    let mut log = EventLog {
        repo: header.repo.clone(),
        head_commit: header.head_commit.clone(),
        coedits: Vec::new(),
        contributions: Vec::new(),
    };
    for (i, l) in lines.iter().enumerate() {
        match serde_json::from_str(l).map_err(|e| CacheError::CacheCorrupt(format!("line {}: {e}", i + 2)))? {
            EventLine::Coedit(e) => log.coedits.push(e),
            EventLine::Contribution(e) => log.contributions.push(e),
        }
    }
    Ok((header, log))
}

/// Writes `contents` to `path` through a temp file and rename.
pub fn write_atomic(path: &Path, contents: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    fs::create_dir_all(dir)?;
    let mut tmp = tempfile_in(dir, path)?;
    tmp.1.write_all(contents)?;
    tmp.1.sync_all()?;
    drop(tmp.1);
    fs::rename(&tmp.0, path)
}

fn tempfile_in(dir: &Path, target: &Path) -> std::io::Result<(PathBuf, fs::File)> {
    let stem = target.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    for n in 0..1000u32 {
        let p = dir.join(format!(".{stem}.{}.{n}.tmp", std::process::id()));
        match fs::OpenOptions::new().write(true).create_new(true).open(&p) {
            Ok(f) => return Ok((p, f)),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(e),
        }
    }
    Err(std::io::Error::other("could not create temp file"))
}

/// Directory of per-repository event-log caches.
#[derive(Debug, Clone)]
pub struct EventCache {
    dir: PathBuf,
}

impl EventCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn path_for(&self, repo_id: &str) -> PathBuf {
        let safe: String = repo_id
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' { c } else { '_' })
            .collect();
        self.dir.join(format!("{safe}.ndjson"))
    }

    /// Reads a cached log without validating it against a repository.
    pub fn read(&self, repo_id: &str) -> Result<(LogHeader, EventLog), CacheError> {
        decode(&fs::read_to_string(self.path_for(repo_id))?)
    }

    pub fn write(&self, log: &EventLog, options_hash: &str) -> Result<(), CacheError> {
        write_atomic(&self.path_for(&log.repo), encode(log, options_hash).as_bytes())?;
        Ok(())
    }

    /// Returns the cached log when its key matches, else extracts and stores it.
    pub fn load_or_extract(
        &self,
        repo_id: &str,
        repo_path: &Path,
        opts: &IngestOptions,
    ) -> Result<(EventLog, CacheStatus), ProvenanceError> {
        let head = GitRepo::open(repo_path)?.head()?;
        let options_hash = opts.options_hash();
        let mut status = CacheStatus::Miss;
        if self.path_for(repo_id).exists() {
            match self.read(repo_id) {
                Ok((h, log))
                    if h.repo == repo_id
                        && h.head_commit == head
                        && h.options_hash == options_hash
                        && h.tool_version == TOOL_VERSION =>
                {
                    return Ok((log, CacheStatus::Hit));
                }
                Ok(_) => {}
                Err(e) => {
                    log::warn!("{repo_id}: {e}; recomputing");
                    status = CacheStatus::Recomputed;
                }
            }
        }
        let mut log = extract_events(repo_path, opts)?;
        log.repo = repo_id.to_string();
        self.write(&log, &options_hash)
            .map_err(|e| ProvenanceError::Ingest(crate::ingest::IngestError::Git(e.to_string())))?;
        Ok((log, status))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::AuthorId;
    use chrono::{TimeZone, Utc};

    fn sample() -> EventLog {
        let a = AuthorId { canonical_key: "a@x".into(), display_name: "A".into(), is_bot: false };
        let b = AuthorId { canonical_key: "b@x".into(), display_name: "B".into(), is_bot: true };
        let t = Utc.timestamp_opt(1_600_000_000, 0).unwrap();
        EventLog {
            repo: "acme/widgets".into(),
            head_commit: "f".repeat(40),
            coedits: vec![CoEditEvent {
                editor: a.clone(),
                original_author: b.clone(),
                file: "src/x.rs".into(),
                commit_id: "c".repeat(40),
                time: t,
                lines: 3,
            }],
            contributions: vec![ContributionEvent {
                developer: a,
                file: "src/x.rs".into(),
                commit_id: "c".repeat(40),
                time: t,
                lines_added: 3,
                lines_removed: 3,
            }],
        }
    }

    #[test]
    fn encode_decode() {
        let log = sample();
        let text = encode(&log, "h");
        let header: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
        for k in ["repo", "head_commit", "options_hash", "tool_version"] {
            assert!(header.get(k).is_some(), "{k}");
        }
        let ev: serde_json::Value = serde_json::from_str(text.lines().nth(1).unwrap()).unwrap();
        for k in ["editor", "original_author", "file", "commit_id", "time", "lines"] {
            assert!(ev.get(k).is_some(), "{k}");
        }
        let (h, back) = decode(&text).unwrap();
        assert_eq!(h.options_hash, "h");
        assert_eq!(back, log);
        assert_eq!(encode(&back, "h"), text);
    }

    #[test]
    fn tampering_is_detected() {
        let text = encode(&sample(), "h").replace("\"lines\":3", "\"lines\":4");
        assert!(matches!(decode(&text), Err(CacheError::CacheCorrupt(_))));
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a/b.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(fs::read(&p).unwrap(), b"two");
        assert_eq!(fs::read_dir(p.parent().unwrap()).unwrap().count(), 1);
    }
}
