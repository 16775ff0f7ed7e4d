//! Repository list: which local clones make up the corpus.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::PipelineError;

/// One corpus entry. Optional columns fill in a profile when no other
/// source is configured.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct RepoEntry {
    pub full_name: String,
    pub path: PathBuf,
    #[serde(default)]
    pub language: Option<String>,
    #[serde(default)]
    pub stars: Option<u64>,
    #[serde(default)]
    pub is_fork: Option<bool>,
    #[serde(default)]
    pub pull_requests: Option<u64>,
}

/// Reads `full_name,path[,...]` rows, sorted by name. Relative clone paths
/// are resolved against the list's directory.
pub fn read_repo_list(path: &Path) -> Result<Vec<RepoEntry>, PipelineError> {
    let bad = |detail: String| PipelineError::Config(format!("{}: {detail}", path.display()));
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path).map_err(|e| bad(e.to_string()))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for (i, row) in rdr.deserialize::<RepoEntry>().enumerate() {
        let mut e = row.map_err(|e| bad(format!("row {}: {e}", i + 2)))?;
        if e.full_name.is_empty() {
            return Err(bad(format!("row {}: empty full_name", i + 2)));
        }
        if !seen.insert(e.full_name.clone()) {
            return Err(bad(format!("duplicate repository `{}`", e.full_name)));
        }
        if e.path.is_relative() {
            e.path = base.join(&e.path);
        }
        out.push(e);
    }
    out.sort_by(|a, b| a.full_name.cmp(&b.full_name));
    Ok(out)
}

/// File-name-safe form of a repository name.
pub fn safe_name(full_name: &str) -> String {
    full_name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' { c } else { '_' })
        .collect()
}
