//! Optional online ingestion: repository metadata, workflow files and
//! workflow runs over the REST API, plus a fixture replay transport so that
//! everything downstream runs offline.

mod limits;
mod transport;

use std::collections::BTreeMap;

use base64::Engine;
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

pub use coedit_core::study::{read_profiles_csv, RepoProfile};
pub use limits::{thread_sleeper, ConcurrencyCap, RateBudget, RetryPolicy, Sleeper};
pub use transport::{
    fixture_name, HttpResponse, LiveTransport, RecordingTransport, ReplayTransport, Transport, DEFAULT_API, TOKEN_ENV,
};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GhError {
    #[error("rate limited on {path} after {attempts} attempts")]
    RateLimited { path: String, attempts: u32 },
    #[error("not found: {0}")]
    NotFound(String),
    #[error("authentication failed for {0}")]
    AuthFailure(String),
    #[error("HTTP {status} for {path}")]
    Http { status: u16, path: String },
    #[error("invalid repository name `{0}`, expected owner/name")]
    InvalidName(String),
    #[error("transport: {0}")]
    Transport(String),
    #[error("unexpected response: {0}")]
    Decode(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkflowRunRecord {
    pub workflow_file: String,
    pub run_started_at: DateTime<Utc>,
    pub conclusion: String,
}

impl From<&WorkflowRunRecord> for coedit_core::actions::WorkflowRun {
    fn from(r: &WorkflowRunRecord) -> Self {
        Self { workflow_path: r.workflow_file.clone(), created_at: r.run_started_at }
    }
}

#[derive(Debug, Clone)]
pub struct ClientOptions {
    pub retry: RetryPolicy,
    /// `None` for no throttling.
    pub requests_per_hour: Option<u32>,
    pub max_concurrent: usize,
    pub runs_per_page: u32,
}

impl Default for ClientOptions {
    fn default() -> Self {
        Self { retry: RetryPolicy::default(), requests_per_hour: Some(5000), max_concurrent: 4, runs_per_page: 100 }
    }
}

pub struct GhClient<T> {
    transport: T,
    options: ClientOptions,
    budget: RateBudget,
    cap: ConcurrencyCap,
    sleeper: Sleeper,
}

fn split_name(full_name: &str) -> Result<(), GhError> {
    match full_name.split_once('/') {
        Some((o, n)) if !o.is_empty() && !n.is_empty() && !n.contains('/') => Ok(()),
        _ => Err(GhError::InvalidName(full_name.to_string())),
    }
}

fn json(path: &str, body: &[u8]) -> Result<Value, GhError> {
    serde_json::from_slice(body).map_err(|e| GhError::Decode(format!("{path}: {e}")))
}

fn time_field(v: &Value, key: &str) -> Option<DateTime<Utc>> {
    v.get(key)?.as_str().and_then(|s| DateTime::parse_from_rfc3339(s).ok()).map(|t| t.with_timezone(&Utc))
}

/// Last page number from a `Link` header, if any.
fn last_page(link: &str) -> Option<u64> {
    link.split(',').find(|p| p.contains("rel=\"last\"")).and_then(|p| {
        let url = p.split(';').next()?.trim().trim_start_matches('<').trim_end_matches('>');
        let query = url.split_once('?')?.1;
        query.split('&').find_map(|kv| kv.strip_prefix("page=")).and_then(|v| v.parse().ok())
    })
}

impl<T: Transport> GhClient<T> {
    pub fn new(transport: T, options: ClientOptions) -> Self {
        Self {
            budget: RateBudget::new(options.requests_per_hour),
            cap: ConcurrencyCap::new(options.max_concurrent),
            transport,
            options,
            sleeper: thread_sleeper(),
        }
    }

    /// Replaces the sleep function, e.g. to observe backoff in tests.
    pub fn with_sleeper(mut self, sleeper: Sleeper) -> Self {
        self.sleeper = sleeper;
        self
    }

    fn throttle_wait(&self, resp: &HttpResponse, attempt: u32) -> Option<std::time::Duration> {
        let limited = resp.status == 429
            || (resp.status == 403
                && (resp.header("x-ratelimit-remaining") == Some("0") || resp.header("retry-after").is_some()));
        if !limited {
            return None;
        }
        if let Some(secs) = resp.header("retry-after").and_then(|s| s.trim().parse::<u64>().ok()) {
            return Some(std::time::Duration::from_secs(secs));
        }
        if let Some(reset) = resp.header("x-ratelimit-reset").and_then(|s| s.trim().parse::<i64>().ok()) {
            let wait = (reset - Utc::now().timestamp()).max(0) as u64;
            return Some(std::time::Duration::from_secs(wait));
        }
        Some(self.options.retry.backoff(attempt))
    }

    /// GET with throttling, retries and status mapping. `Ok(None)` is 404.
    fn fetch(&self, path: &str) -> Result<Option<HttpResponse>, GhError> {
        let _permit = self.cap.acquire();
        let max = self.options.retry.max_attempts.max(1);
        let mut attempt = 0;
        loop {
            attempt += 1;
            let wait = self.budget.reserve();
            if !wait.is_zero() {
                (self.sleeper)(wait);
            }
            let resp = self.transport.get(path)?;
            if let Some(wait) = self.throttle_wait(&resp, attempt) {
                if attempt >= max {
                    return Err(GhError::RateLimited { path: path.to_string(), attempts: attempt });
                }
                log::warn!("rate limited on {path}, retrying in {wait:?}");
                (self.sleeper)(wait);
                continue;
            }
            match resp.status {
                200..=299 => return Ok(Some(resp)),
                404 => return Ok(None),
                401 | 403 => return Err(GhError::AuthFailure(path.to_string())),
                500..=599 if attempt < max => {
                    (self.sleeper)(self.options.retry.backoff(attempt));
                }
                status => return Err(GhError::Http { status, path: path.to_string() }),
            }
        }
    }

    fn fetch_required(&self, path: &str) -> Result<HttpResponse, GhError> {
        self.fetch(path)?.ok_or_else(|| GhError::NotFound(path.to_string()))
    }

    /// Item count of a list endpoint using one-item pages.
    fn count(&self, path: &str) -> Result<(u64, Option<Value>), GhError> {
        let Some(resp) = self.fetch(path)? else { return Ok((0, None)) };
        let body = if resp.body.is_empty() { Value::Array(vec![]) } else { json(path, &resp.body)? };
        let first = body.as_array().and_then(|a| a.first().cloned());
        let n = match resp.header("link").and_then(last_page) {
            Some(n) => n,
            None => body.as_array().map_or(0, |a| a.len() as u64),
        };
        Ok((n, first))
    }

    pub fn fetch_repo_profile(&self, full_name: &str) -> Result<RepoProfile, GhError> {
        split_name(full_name)?;
        let path = format!("/repos/{full_name}");
        let repo = json(&path, &self.fetch_required(&path)?.body)?;
        let created_at =
            time_field(&repo, "created_at").ok_or_else(|| GhError::Decode(format!("{path}: missing created_at")))?;
        let pushed_at = time_field(&repo, "pushed_at").unwrap_or(created_at);
        let (contributors, _) = self.count(&format!("/repos/{full_name}/contributors?per_page=1&anon=true"))?;
        let (commits, newest) = self.count(&format!("/repos/{full_name}/commits?per_page=1"))?;
        let (pull_requests, _) = self.count(&format!("/repos/{full_name}/pulls?state=all&per_page=1"))?;
        let last_commit_at = newest
            .as_ref()
            .and_then(|c| c.pointer("/commit/committer").and_then(|v| time_field(v, "date")))
            .filter(|t| *t >= created_at)
            .unwrap_or(pushed_at.max(created_at));
        Ok(RepoProfile {
            full_name: repo.get("full_name").and_then(Value::as_str).unwrap_or(full_name).to_string(),
            primary_language: repo.get("language").and_then(Value::as_str).unwrap_or("").to_string(),
            stars: repo.get("stargazers_count").and_then(Value::as_u64).unwrap_or(0),
            contributors,
            commits,
            pull_requests,
            is_fork: repo.get("fork").and_then(Value::as_bool).unwrap_or(false),
            created_at,
            last_commit_at,
        })
    }

    /// Workflow files with their exact bytes, sorted by path. A repository
    /// without the directory yields an empty list.
    pub fn fetch_workflow_dir(&self, full_name: &str) -> Result<Vec<(String, Vec<u8>)>, GhError> {
        split_name(full_name)?;
        let path = format!("/repos/{full_name}/contents/.github/workflows");
        let Some(listing) = self.fetch(&path)? else { return Ok(Vec::new()) };
        let entries = json(&path, &listing.body)?;
        let mut files: Vec<String> = entries
            .as_array()
            .into_iter()
            .flatten()
            .filter(|e| e.get("type").and_then(Value::as_str) == Some("file"))
            .filter_map(|e| e.get("path").and_then(Value::as_str))
            .filter(|p| p.ends_with(".yml") || p.ends_with(".yaml"))
            .map(str::to_string)
            .collect();
        files.sort();
        let mut out = Vec::with_capacity(files.len());
        for file in files {
            let fpath = format!("/repos/{full_name}/contents/{file}");
            let doc = json(&fpath, &self.fetch_required(&fpath)?.body)?;
            let encoded: String = doc
                .get("content")
                .and_then(Value::as_str)
                .unwrap_or("")
                .chars()
                .filter(|c| !c.is_whitespace())
                .collect();
            let bytes = base64::engine::general_purpose::STANDARD
                .decode(encoded)
                .map_err(|e| GhError::Decode(format!("{fpath}: {e}")))?;
            out.push((file, bytes));
        }
        Ok(out)
    }

    /// All workflow runs across pages, ascending by start time.
    pub fn fetch_workflow_runs(&self, full_name: &str) -> Result<Vec<WorkflowRunRecord>, GhError> {
        split_name(full_name)?;
        let per_page = self.options.runs_per_page.max(1);
        let mut runs = Vec::new();
        let mut page = 1;
        loop {
            let path = format!("/repos/{full_name}/actions/runs?per_page={per_page}&page={page}");
            let Some(resp) = self.fetch(&path)? else { break };
            let doc = json(&path, &resp.body)?;
            let items = doc.get("workflow_runs").and_then(Value::as_array).cloned().unwrap_or_default();
            let total = doc.get("total_count").and_then(Value::as_u64);
            for r in &items {
                let started = time_field(r, "run_started_at").or_else(|| time_field(r, "created_at"));
                let (Some(started), Some(file)) = (started, r.get("path").and_then(Value::as_str)) else {
                    continue;
                };
                runs.push(WorkflowRunRecord {
                    workflow_file: file.split('@').next().unwrap_or(file).to_string(),
                    run_started_at: started,
                    conclusion: r.get("conclusion").and_then(Value::as_str).unwrap_or("").to_string(),
                });
            }
            let fetched = (page as u64) * per_page as u64;
            if items.len() < per_page as usize || total.is_some_and(|t| fetched >= t) {
                break;
            }
            page += 1;
        }
        runs.sort_by_key(|r| r.run_started_at);
        Ok(runs)
    }
}

/// Convenience for a fully offline client over a fixture directory.
pub fn replay_client(dir: &std::path::Path) -> GhClient<ReplayTransport> {
    GhClient::new(ReplayTransport::new(dir), ClientOptions { requests_per_hour: None, ..Default::default() })
}

/// Profiles keyed by full name, for joining with locally mined data.
pub fn index_profiles(profiles: Vec<RepoProfile>) -> BTreeMap<String, RepoProfile> {
    profiles.into_iter().map(|p| (p.full_name.clone(), p)).collect()
}
