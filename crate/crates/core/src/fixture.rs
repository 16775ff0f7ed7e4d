//! Scripted git repositories for tests and synthetic corpora.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct Author {
    pub name: String,
    pub email: String,
}

impl Author {
    pub fn new(name: &str, email: &str) -> Self {
        Self { name: name.into(), email: email.into() }
    }
}

/// A git repository driven through the `git` CLI with fixed identities and dates.
#[derive(Debug)]
pub struct ScriptedRepo {
    root: PathBuf,
}

impl ScriptedRepo {
    pub fn init(root: &Path) -> std::io::Result<Self> {
        fs::create_dir_all(root)?;
        let repo = Self { root: root.to_path_buf() };
        repo.git(&["init", "-q", "-b", "main"], None, 0)?;
        repo.git(&["config", "commit.gpgsign", "false"], None, 0)?;
        repo.git(&["config", "core.autocrlf", "false"], None, 0)?;
        Ok(repo)
    }

    pub fn path(&self) -> &Path {
        &self.root
    }

    fn git(&self, args: &[&str], who: Option<&Author>, time: i64) -> std::io::Result<String> {
        let mut cmd = Command::new("git");
        cmd.arg("-C").arg(&self.root).args(args);
        cmd.env("GIT_CONFIG_NOSYSTEM", "1")
            .env("LC_ALL", "C")
            .env("GIT_AUTHOR_NAME", who.map(|a| a.name.as_str()).unwrap_or("fixture"))
            .env("GIT_AUTHOR_EMAIL", who.map(|a| a.email.as_str()).unwrap_or("fixture@example.org"))
            .env("GIT_COMMITTER_NAME", "fixture")
            .env("GIT_COMMITTER_EMAIL", "fixture@example.org")
            .env("GIT_AUTHOR_DATE", format!("@{time} +0000"))
            .env("GIT_COMMITTER_DATE", format!("@{time} +0000"));
        let out = cmd.output()?;
        if !out.status.success() {
            return Err(std::io::Error::other(format!(
                "git {}: {}",
                args.join(" "),
                String::from_utf8_lossy(&out.stderr)
            )));
        }
        Ok(String::from_utf8_lossy(&out.stdout).trim().to_string())
    }

    pub fn write(&self, rel: &str, contents: &[u8]) -> std::io::Result<()> {
        let p = self.root.join(rel);
        if let Some(d) = p.parent() {
            fs::create_dir_all(d)?;
        }
        fs::write(p, contents)
    }

    pub fn write_lines(&self, rel: &str, lines: &[String]) -> std::io::Result<()> {
        let mut s = lines.join("\n");
        if !lines.is_empty() {
            s.push('\n');
        }
        self.write(rel, s.as_bytes())
    }

    pub fn read_lines(&self, rel: &str) -> std::io::Result<Vec<String>> {
        Ok(fs::read_to_string(self.root.join(rel))?.lines().map(str::to_string).collect())
    }

    pub fn remove(&self, rel: &str) -> std::io::Result<()> {
        fs::remove_file(self.root.join(rel))
    }

    pub fn rename(&self, from: &str, to: &str) -> std::io::Result<()> {
        let dst = self.root.join(to);
        if let Some(d) = dst.parent() {
            fs::create_dir_all(d)?;
        }
        fs::rename(self.root.join(from), dst)
    }

    /// Stages everything and commits; returns the new commit id.
    pub fn commit(&self, who: &Author, time: i64, msg: &str) -> std::io::Result<String> {
        self.git(&["add", "-A"], None, time)?;
        self.git(&["commit", "-q", "--allow-empty", "--no-verify", "-m", msg], Some(who), time)?;
        self.head()
    }

    pub fn head(&self) -> std::io::Result<String> {
        self.git(&["rev-parse", "HEAD"], None, 0)
    }

    pub fn branch(&self, name: &str) -> std::io::Result<()> {
        self.git(&["branch", "-f", name], None, 0).map(|_| ())
    }

    pub fn checkout(&self, name: &str) -> std::io::Result<()> {
        self.git(&["checkout", "-q", name], None, 0).map(|_| ())
    }

    /// Merges `branch` into the current branch with a merge commit.
    /// Conflicts are resolved by keeping the current branch's side.
    pub fn merge(&self, branch: &str, who: &Author, time: i64) -> std::io::Result<String> {
        let msg = format!("merge {branch}");
        let res = self.git(&["merge", "-q", "--no-ff", "--no-edit", "-m", &msg, branch], Some(who), time);
        if res.is_err() {
            self.git(&["checkout", "--ours", "--", "."], None, time).ok();
            let unmerged = self.git(&["diff", "--name-only", "--diff-filter=U"], None, time)?;
            for f in unmerged.lines() {
                if !self.root.join(f).exists() {
                    self.git(&["rm", "-q", "--", f], None, time)?;
                }
            }
            self.git(&["add", "-A"], None, time)?;
            self.git(&["commit", "-q", "--no-verify", "-m", &msg], Some(who), time)?;
        }
        self.head()
    }
}

/// Parameters for a seeded random multi-author history.
#[derive(Debug, Clone)]
pub struct RandomHistory {
    pub seed: u64,
    pub commits: usize,
    pub authors: Vec<Author>,
    pub start_time: i64,
    /// Probability of starting a side branch that is later merged.
    pub branch_prob: f64,
    pub rename_prob: f64,
    pub binary_prob: f64,
}

impl RandomHistory {
    pub fn new(seed: u64, commits: usize) -> Self {
        Self {
            seed,
            commits,
            authors: ["Alice", "Bob", "Carol", "Dan", "Eve"]
                .iter()
                .map(|n| Author::new(n, &format!("{}@example.org", n.to_lowercase())))
                .collect(),
            start_time: 1_546_300_800,
            branch_prob: 0.08,
            rename_prob: 0.03,
            binary_prob: 0.02,
        }
    }

    /// Creates the repository at `root`. Returns the number of commits made.
    pub fn build(&self, root: &Path) -> std::io::Result<usize> {
        let repo = ScriptedRepo::init(root)?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut t = self.start_time;
        let mut made = 0usize;
        let mut next_file = 0usize;
        let mut serial = 0u64;
        let mut line = |rng: &mut ChaCha8Rng| -> String {
            serial += 1;
            match rng.gen_range(0..10) {
                0 => String::new(),
                1 => "}".to_string(),
                _ => format!("stmt_{serial}_{}", rng.gen_range(0..1000)),
            }
        };
        let mut side: Option<(usize, usize)> = None;
        let files_of = |repo: &ScriptedRepo| -> Vec<String> {
            let mut v: Vec<String> = walk(repo.path())
                .into_iter()
                .filter(|p| p.ends_with(".txt"))
                .collect();
            v.sort();
            v
        };

        while made < self.commits {
            t += rng.gen_range(600..86_400);
            let who = self.authors.choose(&mut rng).expect("authors").clone();

            if side.is_none() && made > 3 && rng.gen_bool(self.branch_prob) {
                repo.branch("side")?;
                repo.checkout("side")?;
                side = Some((made, rng.gen_range(1..5)));
            } else if let Some((_, left)) = side {
                if left == 0 {
                    repo.checkout("main")?;
                    // Occasionally move main ahead so the merge is non-trivial.
                    if rng.gen_bool(0.7) {
                        self.mutate(&repo, &mut rng, &mut line, &mut next_file, &files_of)?;
                        repo.commit(&who, t, "main work")?;
                        made += 1;
                        t += 60;
                    }
                    let merger = self.authors.choose(&mut rng).expect("authors").clone();
                    repo.merge("side", &merger, t)?;
                    made += 1;
                    side = None;
                    continue;
                }
            }
            self.mutate(&repo, &mut rng, &mut line, &mut next_file, &files_of)?;
            repo.commit(&who, t, &format!("change {made}"))?;
            made += 1;
            if let Some((_, left)) = side.as_mut() {
                *left = left.saturating_sub(1);
            }
        }
        if side.is_some() {
            repo.checkout("main")?;
            let who = self.authors[0].clone();
            repo.merge("side", &who, t + 60)?;
            made += 1;
        }
        Ok(made)
    }

    fn mutate<L, F>(
        &self,
        repo: &ScriptedRepo,
        rng: &mut ChaCha8Rng,
        line: &mut L,
        next_file: &mut usize,
        files_of: &F,
    ) -> std::io::Result<()>
    where
        L: FnMut(&mut ChaCha8Rng) -> String,
        F: Fn(&ScriptedRepo) -> Vec<String>,
    {
        let files = files_of(repo);
        if files.is_empty() || rng.gen_bool(0.12) {
            let name = format!("src/mod_{}/file_{}.txt", *next_file % 3, *next_file);
            *next_file += 1;
            let n = rng.gen_range(3..30);
            let lines: Vec<String> = (0..n).map(|_| line(rng)).collect();
            return repo.write_lines(&name, &lines);
        }
        let target = files.choose(rng).expect("non-empty").clone();
        if rng.gen_bool(self.binary_prob) {
            let bytes: Vec<u8> = (0..64).map(|_| rng.gen::<u8>() | 0x80).chain([0u8, 1, 2]).collect();
            return repo.write(&format!("assets/blob_{}.bin", rng.gen_range(0..4)), &bytes);
        }
        if rng.gen_bool(self.rename_prob) {
            let to = format!("src/moved/{}", target.rsplit('/').next().unwrap_or("x.txt"));
            if !repo.path().join(&to).exists() {
                return repo.rename(&target, &to);
            }
        }
        if files.len() > 3 && rng.gen_bool(0.03) {
            return repo.remove(&target);
        }
        let mut lines = repo.read_lines(&target)?;
        let edits = rng.gen_range(1..4);
        for _ in 0..edits {
            let len = lines.len();
            match rng.gen_range(0..3) {
                0 if len > 0 => {
                    let at = rng.gen_range(0..len);
                    let n = rng.gen_range(1..=3.min(len - at));
                    let repl: Vec<String> = (0..rng.gen_range(0..4)).map(|_| line(rng)).collect();
                    lines.splice(at..at + n, repl);
                }
                1 if len > 1 => {
                    let at = rng.gen_range(0..len);
                    lines.remove(at);
                }
                _ => {
                    let at = rng.gen_range(0..=len);
                    let add: Vec<String> = (0..rng.gen_range(1..5)).map(|_| line(rng)).collect();
                    lines.splice(at..at, add);
                }
            }
        }
        repo.write_lines(&target, &lines)
    }
}

fn walk(root: &Path) -> Vec<String> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        let Ok(rd) = fs::read_dir(&d) else { continue };
        for e in rd.flatten() {
            let p = e.path();
            if p.file_name().is_some_and(|n| n == ".git") {
                continue;
            }
            if p.is_dir() {
                stack.push(p);
            } else if let Ok(rel) = p.strip_prefix(root) {
                out.push(rel.to_string_lossy().replace('\\', "/"));
            }
        }
    }
    out
}

/// Author email of every line of `file` at `rev`, as reported by `git blame`.
/// Independent of the provenance tracker; used as its oracle.
pub fn blame_emails(repo: &Path, rev: &str, file: &str) -> std::io::Result<Vec<String>> {
    let out = Command::new("git")
        .arg("-C")
        .arg(repo)
        .args(["blame", "--porcelain", rev, "--", file])
        .env("GIT_CONFIG_NOSYSTEM", "1")
        .output()?;
    if !out.status.success() {
        return Err(std::io::Error::other(String::from_utf8_lossy(&out.stderr).into_owned()));
    }
    let text = String::from_utf8_lossy(&out.stdout);
    let mut mail_of: std::collections::HashMap<String, String> = Default::default();
    let mut lines: Vec<(usize, String)> = Vec::new();
    let mut current = String::new();
    for l in text.lines() {
        if l.starts_with('\t') {
            continue;
        }
        let mut parts = l.split(' ');
        let first = parts.next().unwrap_or("");
        if first.len() == 40 && first.bytes().all(|b| b.is_ascii_hexdigit()) {
            current = first.to_string();
            let _orig = parts.next();
            if let Some(Ok(fin)) = parts.next().map(str::parse::<usize>) {
                lines.push((fin, current.clone()));
            }
        } else if let Some(m) = l.strip_prefix("author-mail ") {
            let m = m.trim().trim_start_matches('<').trim_end_matches('>').to_lowercase();
            mail_of.insert(current.clone(), m);
        }
    }
    lines.sort();
    Ok(lines
        .into_iter()
        .map(|(_, sha)| mail_of.get(&sha).cloned().unwrap_or_default())
        .collect())
}

/// Files tracked at `rev`.
pub fn files_at(repo: &Path, rev: &str) -> std::io::Result<Vec<String>> {
    let out = Command::new("git")
        .arg("-C")
        .arg(repo)
        .args(["-c", "core.quotePath=false", "ls-tree", "-r", "--name-only", rev])
        .output()?;
    Ok(String::from_utf8_lossy(&out.stdout).lines().map(str::to_string).collect())
}

/// Linear history assembled in memory and written with one
/// `git fast-import` call, for corpora with many commits.
#[derive(Debug, Default)]
pub struct FastHistory {
    stream: Vec<u8>,
    commits: usize,
}

impl FastHistory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn commit_count(&self) -> usize {
        self.commits
    }

    /// Appends a commit on `main` writing the given files (full contents)
    /// and deleting `removed`.
    pub fn commit(&mut self, who: &Author, time: i64, msg: &str, files: &[(&str, &[u8])], removed: &[&str]) {
        use std::io::Write;
        let s = &mut self.stream;
        self.commits += 1;
        writeln!(s, "commit refs/heads/main").unwrap();
        writeln!(s, "author {} <{}> {time} +0000", who.name, who.email).unwrap();
        writeln!(s, "committer fixture <fixture@example.org> {time} +0000").unwrap();
        writeln!(s, "data {}\n{msg}", msg.len()).unwrap();
        for path in removed {
            writeln!(s, "D {path}").unwrap();
        }
        for (path, body) in files {
            writeln!(s, "M 100644 inline {path}\ndata {}", body.len()).unwrap();
            s.extend_from_slice(body);
            s.push(b'\n');
        }
        s.push(b'\n');
    }

    /// Creates a repository at `root` containing the history; `HEAD` points
    /// at `main`. The working tree is left empty.
    pub fn write(&self, root: &Path) -> std::io::Result<()> {
        use std::io::Write;
        let repo = ScriptedRepo::init(root)?;
        let mut child = Command::new("git")
            .arg("-C")
            .arg(repo.path())
            .args(["fast-import", "--quiet", "--done"])
            .env("GIT_CONFIG_NOSYSTEM", "1")
            .stdin(std::process::Stdio::piped())
            .stdout(std::process::Stdio::null())
            .stderr(std::process::Stdio::piped())
            .spawn()?;
        {
            let mut stdin = child.stdin.take().expect("piped stdin");
            stdin.write_all(&self.stream)?;
            stdin.write_all(b"done\n")?;
        }
        let out = child.wait_with_output()?;
        if !out.status.success() {
            return Err(std::io::Error::other(format!(
                "git fast-import: {}",
                String::from_utf8_lossy(&out.stderr)
            )));
        }
        Ok(())
    }
}
