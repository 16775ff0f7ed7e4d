//! Workflow parsing, Code Review bot adoption dating and usage census.

mod adoption;
mod census;

use serde::{Deserialize, Serialize};
use serde_yaml::Value;
use thiserror::Error;

use crate::ingest::IngestError;

pub use adoption::{
    detect_adoption, first_adoption, workflow_refs_at, AdoptionRecord, AdoptionScan, Evidence, ParseFailure, WorkflowRun,
};
pub use census::{census, format_share, Census, CensusAccumulator, CensusRow};

pub const CODE_REVIEW: &str = "code-review";
pub const NON_MARKETPLACE: &str = "non-marketplace";
pub const WORKFLOW_DIR: &str = ".github/workflows";

#[derive(Debug, Error)]
pub enum ActionsError {
    #[error("malformed workflow {file}: {detail}")]
    MalformedYaml { file: String, detail: String },
    #[error("catalog line {line}: {detail}")]
    InvalidCatalog { line: usize, detail: String },
    #[error(transparent)]
    Ingest(#[from] IngestError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionKind {
    Marketplace,
    Local,
    Docker,
}

/// A `uses:` reference. Local references carry owner `.`, docker ones owner
/// `docker`; both keep the remainder in `name`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ActionRef {
    pub owner: String,
    pub name: String,
    /// Path inside the action repository, e.g. for reusable workflows.
    pub subpath: Option<String>,
    pub version_ref: Option<String>,
    pub source_file: String,
    pub kind: ActionKind,
}

impl ActionRef {
    /// Parses a `uses:` value. Returns `None` for values with no usable
    /// owner/name part.
    pub fn parse(uses: &str, source_file: &str) -> Option<Self> {
        let uses = uses.trim();
        if uses.is_empty() {
            return None;
        }
        if let Some(image) = uses.strip_prefix("docker://") {
            return (!image.is_empty()).then(|| ActionRef {
                owner: "docker".into(),
                name: image.into(),
                subpath: None,
                version_ref: None,
                source_file: source_file.into(),
                kind: ActionKind::Docker,
            });
        }
        if uses.starts_with("./") || uses.starts_with("../") {
            return Some(ActionRef {
                owner: ".".into(),
                name: uses.trim_start_matches("./").into(),
                subpath: None,
                version_ref: None,
                source_file: source_file.into(),
                kind: ActionKind::Local,
            });
        }
        let (target, version_ref) = match uses.split_once('@') {
            Some((t, v)) => (t, (!v.is_empty()).then(|| v.to_string())),
            None => (uses, None),
        };
        let mut parts = target.splitn(3, '/');
        let owner = parts.next().filter(|s| !s.is_empty())?;
        let name = parts.next().filter(|s| !s.is_empty())?;
        let subpath = parts.next().filter(|s| !s.is_empty()).map(str::to_string);
        Some(ActionRef {
            owner: owner.into(),
            name: name.into(),
            subpath,
            version_ref,
            source_file: source_file.into(),
            kind: ActionKind::Marketplace,
        })
    }

    /// `owner/name`, the key used for catalog matching and the census.
    pub fn slug(&self) -> String {
        format!("{}/{}", self.owner, self.name)
    }

    pub fn is_marketplace(&self) -> bool {
        self.kind == ActionKind::Marketplace
    }
}

/// Is `path` a workflow file GitHub would pick up?
pub fn is_workflow_path(path: &str) -> bool {
    let Some(rest) = path.strip_prefix(".github/workflows/") else {
        return false;
    };
    !rest.contains('/') && (rest.ends_with(".yml") || rest.ends_with(".yaml"))
}

/// Every `uses:` reference of a workflow's jobs and steps, deduplicated
/// and in document order. An empty document yields no references.
pub fn parse_workflow(text: &str, source_file: &str) -> Result<Vec<ActionRef>, ActionsError> {
    let doc: Value = serde_yaml::from_str(text).map_err(|e| ActionsError::MalformedYaml {
        file: source_file.into(),
        detail: e.to_string(),
    })?;
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::new();
    let mut push = |v: &Value| {
        if let Some(s) = v.as_str() {
            if seen.insert(s.trim().to_string()) {
                out.extend(ActionRef::parse(s, source_file));
            }
        }
    };
    let jobs = match &doc {
        Value::Null => return Ok(Vec::new()),
        Value::Mapping(m) => m.get("jobs"),
        _ => {
            return Err(ActionsError::MalformedYaml {
                file: source_file.into(),
                detail: "top level is not a mapping".into(),
            })
        }
    };
    if let Some(Value::Mapping(jobs)) = jobs {
        for job in jobs.values() {
            if let Some(u) = job.get("uses") {
                push(u);
            }
            if let Some(Value::Sequence(steps)) = job.get("steps") {
                for step in steps {
                    if let Some(u) = step.get("uses") {
                        push(u);
                    }
                }
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub pattern: String,
    pub category: String,
}

/// Actions of interest keyed by `owner/name`; matching ignores case and
/// version.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BotCatalog {
    entries: Vec<CatalogEntry>,
}

impl Default for BotCatalog {
    fn default() -> Self {
        let entries = [
            "codecov/codecov-action",
            "coverallsapp/github-action",
            "paambaati/codeclimate-action",
            "aws-actions/codeguru-reviewer",
            "sturdy-dev/codeball-action",
        ]
        .into_iter()
        .map(|p| CatalogEntry { pattern: p.into(), category: CODE_REVIEW.into() })
        .collect();
        BotCatalog { entries }
    }
}

impl BotCatalog {
    pub fn new(entries: Vec<CatalogEntry>) -> Result<Self, ActionsError> {
        let mut seen = std::collections::HashSet::new();
        for (i, e) in entries.iter().enumerate() {
            if !e.pattern.contains('/') {
                return Err(ActionsError::InvalidCatalog { line: i + 1, detail: format!("`{}` is not owner/name", e.pattern) });
            }
            if !seen.insert(e.pattern.to_ascii_lowercase()) {
                return Err(ActionsError::InvalidCatalog { line: i + 1, detail: format!("duplicate pattern `{}`", e.pattern) });
            }
        }
        Ok(BotCatalog { entries })
    }

    /// Reads `owner/name,category` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, ActionsError> {
        let mut entries = Vec::new();
        let mut seen = std::collections::HashSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (pattern, category) = line.split_once(',').ok_or_else(|| ActionsError::InvalidCatalog {
                line: i + 1,
                detail: "expected `owner/name,category`".into(),
            })?;
            let (pattern, category) = (pattern.trim(), category.trim());
            if !pattern.contains('/') || category.is_empty() {
                return Err(ActionsError::InvalidCatalog { line: i + 1, detail: format!("bad entry `{line}`") });
            }
            if !seen.insert(pattern.to_ascii_lowercase()) {
                return Err(ActionsError::InvalidCatalog { line: i + 1, detail: format!("duplicate pattern `{pattern}`") });
            }
            entries.push(CatalogEntry { pattern: pattern.into(), category: category.into() });
        }
        Ok(BotCatalog { entries })
    }

    pub fn entries(&self) -> &[CatalogEntry] {
        &self.entries
    }

    pub fn to_text(&self) -> String {
        self.entries.iter().map(|e| format!("{},{}\n", e.pattern, e.category)).collect()
    }

    pub fn category_of(&self, action: &ActionRef) -> Option<&str> {
        if !action.is_marketplace() {
            return None;
        }
        let slug = action.slug();
        self.entries
            .iter()
            .find(|e| e.pattern.eq_ignore_ascii_case(&slug))
            .map(|e| e.category.as_str())
    }
}

/// Category label for any reference: the catalog's, `non-marketplace` for
/// local and docker references, otherwise `None`.
pub fn categorize<'a>(catalog: &'a BotCatalog, action: &ActionRef) -> Option<&'a str> {
    if !action.is_marketplace() {
        return Some(NON_MARKETPLACE);
    }
    catalog.category_of(action)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_steps_and_jobs() {
        let yml = r#"
name: CI
on: [push]
jobs:
  test:
    runs-on: ubuntu-latest
    steps:
      - uses: actions/checkout@v3
      - run: cargo test
      - uses: codecov/codecov-action@v2
        with: {token: x}
      - uses: actions/checkout@v3
      - uses: ./local/action
      - uses: docker://alpine:3.18
  call:
    uses: org/shared/.github/workflows/build.yml@main
"#;
        let refs = parse_workflow(yml, ".github/workflows/ci.yml").unwrap();
        let slugs: Vec<String> = refs.iter().map(|r| r.slug()).collect();
        assert_eq!(slugs, ["actions/checkout", "codecov/codecov-action", "./local/action", "docker/alpine:3.18", "org/shared"]);
        let checkout = &refs[0];
        assert_eq!((checkout.owner.as_str(), checkout.name.as_str(), checkout.version_ref.as_deref()), ("actions", "checkout", Some("v3")));
        assert_eq!(refs[4].subpath.as_deref(), Some(".github/workflows/build.yml"));
        let catalog = BotCatalog::default();
        assert_eq!(categorize(&catalog, &refs[1]), Some(CODE_REVIEW));
        assert_eq!(categorize(&catalog, &refs[0]), None);
        assert_eq!(categorize(&catalog, &refs[2]), Some(NON_MARKETPLACE));
        assert_eq!(categorize(&catalog, &refs[3]), Some(NON_MARKETPLACE));
    }

    #[test]
    fn no_uses_and_malformed() {
        assert!(parse_workflow("name: x\njobs:\n  a:\n    steps:\n      - run: ls\n", "w.yml").unwrap().is_empty());
        assert!(parse_workflow("", "w.yml").unwrap().is_empty());
        assert!(matches!(parse_workflow("jobs: [\n", "w.yml"), Err(ActionsError::MalformedYaml { .. })));
        assert!(matches!(parse_workflow("- a\n- b\n", "w.yml"), Err(ActionsError::MalformedYaml { .. })));
    }

    #[test]
    fn catalog_text() {
        let c = BotCatalog::parse("# bots\ncodecov/codecov-action, code-review\n\nfoo/bar,lint # trailing\n").unwrap();
        assert_eq!(c.entries().len(), 2);
        assert_eq!(BotCatalog::parse(&BotCatalog::default().to_text()).unwrap(), BotCatalog::default());
        assert!(BotCatalog::parse("a/b,x\nA/B,y\n").is_err());
        assert!(BotCatalog::parse("nonsense\n").is_err());
        let r = ActionRef::parse("CodeCov/Codecov-Action@v4", "f").unwrap();
        assert_eq!(c.category_of(&r), Some("code-review"));
    }

    #[test]
    fn workflow_paths() {
        assert!(is_workflow_path(".github/workflows/ci.yml"));
        assert!(is_workflow_path(".github/workflows/ci.yaml"));
        assert!(!is_workflow_path(".github/workflows/sub/ci.yml"));
        assert!(!is_workflow_path(".github/workflows/readme.md"));
        assert!(!is_workflow_path("ci.yml"));
    }
}
