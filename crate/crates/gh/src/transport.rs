use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Duration;

use percent_encoding::{utf8_percent_encode, AsciiSet, NON_ALPHANUMERIC};
use serde::{Deserialize, Serialize};

use crate::GhError;

pub const DEFAULT_API: &str = "https://api.github.com";
/// Environment variable holding the API token.
pub const TOKEN_ENV: &str = "GITHUB_TOKEN";

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct HttpResponse {
    pub status: u16,
    /// Lower-case header names.
    pub headers: BTreeMap<String, String>,
    pub body: Vec<u8>,
}

impl HttpResponse {
    pub fn header(&self, name: &str) -> Option<&str> {
        self.headers.get(&name.to_ascii_lowercase()).map(String::as_str)
    }
}

/// Performs GET requests for API paths such as `/repos/o/n?page=2`.
pub trait Transport: Send + Sync {
    fn get(&self, path: &str) -> Result<HttpResponse, GhError>;
}

pub struct LiveTransport {
    base: String,
    token: Option<String>,
    agent: ureq::Agent,
}

impl LiveTransport {
    pub fn new(base: &str, token: Option<String>) -> Self {
        let agent = ureq::AgentBuilder::new().timeout(Duration::from_secs(60)).build();
        Self { base: base.trim_end_matches('/').to_string(), token, agent }
    }

    /// Uses the public API and the token from the environment, if set.
    pub fn from_env() -> Self {
        Self::new(DEFAULT_API, std::env::var(TOKEN_ENV).ok().filter(|t| !t.is_empty()))
    }
}

impl Transport for LiveTransport {
    fn get(&self, path: &str) -> Result<HttpResponse, GhError> {
        let mut req = self
            .agent
            .get(&format!("{}{}", self.base, path))
            .set("Accept", "application/vnd.github+json")
            .set("User-Agent", concat!("coedit/", env!("CARGO_PKG_VERSION")));
        if let Some(t) = &self.token {
            req = req.set("Authorization", &format!("Bearer {t}"));
        }
        let resp = match req.call() {
            Ok(r) => r,
            Err(ureq::Error::Status(_, r)) => r,
            Err(e) => return Err(GhError::Transport(e.to_string())),
        };
        let mut headers = BTreeMap::new();
        for name in resp.headers_names() {
            if let Some(v) = resp.header(&name) {
                headers.insert(name.to_ascii_lowercase(), v.to_string());
            }
        }
        let status = resp.status();
        let mut body = Vec::new();
        std::io::Read::read_to_end(&mut resp.into_reader(), &mut body).map_err(|e| GhError::Transport(e.to_string()))?;
        Ok(HttpResponse { status, headers, body })
    }
}

const KEEP: &AsciiSet = &NON_ALPHANUMERIC.remove(b'-').remove(b'.').remove(b'_').remove(b'~');

/// File name under which a request path is stored in a fixture directory.
pub fn fixture_name(path: &str) -> String {
    utf8_percent_encode(path, KEEP).to_string()
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
struct Meta {
    #[serde(default = "ok")]
    status: u16,
    #[serde(default)]
    headers: BTreeMap<String, String>,
}

fn ok() -> u16 {
    200
}

/// Serves responses from a directory: one body file per URL-encoded request
/// path, with optional `<file>.meta.json` holding `status` and `headers`.
/// A file `<file>~N` (plus its meta) overrides the N-th request (1-based)
/// for that path, which lets fixtures script throttling. Missing files are
/// answered with 404.
pub struct ReplayTransport {
    dir: PathBuf,
    calls: Mutex<HashMap<String, usize>>,
}

impl ReplayTransport {
    pub fn new(dir: &Path) -> Self {
        Self { dir: dir.to_path_buf(), calls: Mutex::new(HashMap::new()) }
    }

    fn load(&self, name: &str) -> Result<Option<HttpResponse>, GhError> {
        let body_path = self.dir.join(name);
        let meta_path = self.dir.join(format!("{name}.meta.json"));
        let body = fs::read(&body_path).ok();
        let meta = match fs::read(&meta_path) {
            Ok(bytes) => Some(
                serde_json::from_slice::<Meta>(&bytes)
                    .map_err(|e| GhError::Decode(format!("{}: {e}", meta_path.display())))?,
            ),
            Err(_) => None,
        };
        if body.is_none() && meta.is_none() {
            return Ok(None);
        }
        let meta = meta.unwrap_or(Meta { status: 200, headers: BTreeMap::new() });
        Ok(Some(HttpResponse {
            status: meta.status,
            headers: meta.headers.into_iter().map(|(k, v)| (k.to_ascii_lowercase(), v)).collect(),
            body: body.unwrap_or_default(),
        }))
    }
}

impl Transport for ReplayTransport {
    fn get(&self, path: &str) -> Result<HttpResponse, GhError> {
        let name = fixture_name(path);
        let n = {
            let mut calls = self.calls.lock().expect("replay counter");
            let c = calls.entry(name.clone()).or_insert(0);
            *c += 1;
            *c
        };
        if let Some(r) = self.load(&format!("{name}~{n}"))? {
            return Ok(r);
        }
        Ok(self.load(&name)?.unwrap_or(HttpResponse { status: 404, ..Default::default() }))
    }
}

/// Persistent request cache in the replay layout: answers from `dir` when a
/// recording exists, otherwise forwards and records final (2xx or 404)
/// responses. A recorded directory doubles as a replay fixture.
pub struct RecordingTransport<T> {
    inner: T,
    dir: PathBuf,
    guard: Mutex<()>,
}

impl<T: Transport> RecordingTransport<T> {
    pub fn new(inner: T, dir: &Path) -> Self {
        Self { inner, dir: dir.to_path_buf(), guard: Mutex::new(()) }
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let tmp = path.with_extension(format!("tmp{}", std::process::id()));
    fs::write(&tmp, bytes)?;
    fs::rename(tmp, path)
}

impl<T: Transport> Transport for RecordingTransport<T> {
    fn get(&self, path: &str) -> Result<HttpResponse, GhError> {
        let name = fixture_name(path);
        if let Some(r) = ReplayTransport::new(&self.dir).load(&name)? {
            return Ok(r);
        }
        let resp = self.inner.get(path)?;
        if (200..300).contains(&resp.status) || resp.status == 404 {
            let _lock = self.guard.lock().expect("cache lock");
            fs::create_dir_all(&self.dir).map_err(|e| GhError::Transport(e.to_string()))?;
            let meta = Meta {
                status: resp.status,
                headers: resp.headers.iter().filter(|(k, _)| k.as_str() == "link").map(|(k, v)| (k.clone(), v.clone())).collect(),
            };
            let io = |e: std::io::Error| GhError::Transport(e.to_string());
            write_atomic(&self.dir.join(&name), &resp.body).map_err(io)?;
            write_atomic(
                &self.dir.join(format!("{name}.meta.json")),
                serde_json::to_string(&meta).expect("meta serializes").as_bytes(),
            )
            .map_err(io)?;
        }
        Ok(resp)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_are_reversible_and_flat() {
        let n = fixture_name("/repos/acme/widgets/actions/runs?per_page=100&page=2");
        assert!(!n.contains('/') && !n.contains('?'));
        let back = percent_encoding::percent_decode_str(&n).decode_utf8().unwrap();
        assert_eq!(back, "/repos/acme/widgets/actions/runs?per_page=100&page=2");
    }

    #[test]
    fn replay_missing_is_404() {
        let dir = tempfile::tempdir().unwrap();
        let t = ReplayTransport::new(dir.path());
        assert_eq!(t.get("/repos/x/y").unwrap().status, 404);
    }
}

impl<T: Transport + ?Sized> Transport for Box<T> {
    fn get(&self, path: &str) -> Result<HttpResponse, GhError> {
        (**self).get(path)
    }
}
