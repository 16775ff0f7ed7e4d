use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};

use super::IngestError;

const NULL_OID: &str = "0000000000000000000000000000000000000000";

/// Thin wrapper over the system `git` executable for one repository.
#[derive(Debug, Clone)]
pub struct GitRepo {
    path: PathBuf,
}

impl GitRepo {
    pub fn open(path: &Path) -> Result<Self, IngestError> {
        let repo = Self { path: path.to_path_buf() };
        if !path.exists() {
            return Err(IngestError::NotARepository(path.display().to_string()));
        }
        repo.run(&["rev-parse", "--git-dir"])
            .map_err(|_| IngestError::NotARepository(path.display().to_string()))?;
        Ok(repo)
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    fn command(&self) -> Command {
        let mut cmd = Command::new("git");
        cmd.arg("-C")
            .arg(&self.path)
            .args([
                "-c", "core.quotePath=true",
                "-c", "diff.noprefix=false",
                "-c", "diff.mnemonicPrefix=false",
                "-c", "log.showSignature=false",
                "-c", "i18n.logOutputEncoding=UTF-8",
            ])
            .env("GIT_CONFIG_NOSYSTEM", "1")
            .env("LC_ALL", "C");
        cmd
    }

    pub(crate) fn run_bytes(&self, args: &[&str]) -> Result<Vec<u8>, IngestError> {
        let out = self
            .command()
            .args(args)
            .stdin(Stdio::null())
            .output()
            .map_err(|e| IngestError::Git(format!("failed to spawn git: {e}")))?;
        if !out.status.success() {
            let stderr = String::from_utf8_lossy(&out.stderr).into_owned();
            return Err(IngestError::Git(stderr.trim().to_string()));
        }
        Ok(out.stdout)
    }

    pub(crate) fn run(&self, args: &[&str]) -> Result<String, IngestError> {
        self.run_bytes(args)
            .map(|b| String::from_utf8_lossy(&b).into_owned())
    }

    /// Full id of the default-branch head, or `EmptyRepository`.
    pub fn head(&self) -> Result<String, IngestError> {
        self.run(&["rev-parse", "--verify", "-q", "HEAD^{commit}"])
            .map(|s| s.trim().to_string())
            .map_err(|_| IngestError::EmptyRepository(self.path.display().to_string()))
    }

    fn batch(&self, mode: &str, ids: &[&str]) -> Result<Vec<u8>, IngestError> {
        let mut child = self
            .command()
            .arg("cat-file")
            .arg(mode)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|e| IngestError::Git(format!("failed to spawn git: {e}")))?;
        let mut stdin = child.stdin.take().expect("piped stdin");
        let input: String = ids.iter().map(|id| format!("{id}\n")).collect();
        let writer = std::thread::spawn(move || stdin.write_all(input.as_bytes()));
        let mut buf = Vec::new();
        child
            .stdout
            .take()
            .expect("piped stdout")
            .read_to_end(&mut buf)
            .map_err(|e| IngestError::Git(e.to_string()))?;
        let _ = writer.join();
        child.wait().map_err(|e| IngestError::Git(e.to_string()))?;
        Ok(buf)
    }

    /// Object sizes in bytes for the given blob ids. Missing ids are omitted.
    pub fn blob_sizes(&self, ids: &[&str]) -> Result<HashMap<String, u64>, IngestError> {
        let ids: Vec<&str> = ids.iter().copied().filter(|i| *i != NULL_OID).collect();
        if ids.is_empty() {
            return Ok(HashMap::new());
        }
        let out = self.batch("--batch-check", &ids)?;
        let mut sizes = HashMap::new();
        for line in String::from_utf8_lossy(&out).lines() {
            let mut it = line.split_whitespace();
            if let (Some(id), Some(_kind), Some(size)) = (it.next(), it.next(), it.next()) {
                if let Ok(n) = size.parse() {
                    sizes.insert(id.to_string(), n);
                }
            }
        }
        Ok(sizes)
    }

    /// Contents of the given objects, in request order.
    pub fn blob_contents(&self, ids: &[&str]) -> Result<Vec<Option<Vec<u8>>>, IngestError> {
        if ids.is_empty() {
            return Ok(Vec::new());
        }
        let out = self.batch("--batch", ids)?;
        let mut res = Vec::with_capacity(ids.len());
        let mut pos = 0;
        for _ in ids {
            let Some(nl) = out[pos..].iter().position(|&b| b == b'\n') else { break };
            let header = String::from_utf8_lossy(&out[pos..pos + nl]).into_owned();
            pos += nl + 1;
            if header.ends_with(" missing") {
                res.push(None);
                continue;
            }
            let size: usize = header
                .rsplit(' ')
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| IngestError::Git(format!("bad cat-file header: {header}")))?;
            res.push(Some(out[pos..pos + size].to_vec()));
            pos += size + 1;
        }
        Ok(res)
    }
}
