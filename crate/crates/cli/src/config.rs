//! Declarative study configuration.

use std::path::{Path, PathBuf};

use coedit_core::ingest::{AliasMap, IngestOptions, MergePolicy, DEFAULT_BOT_PATTERNS};
use coedit_core::stats::TestPolicy;
use coedit_core::study::{PhaseLengths, SelectionCriteria};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::PipelineError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputSection {
    /// CSV with `full_name,path` and optional `language,stars,is_fork,pull_requests`.
    pub repos: PathBuf,
    pub profiles: Option<PathBuf>,
    pub catalog: Option<PathBuf>,
    pub aliases: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MiningSection {
    pub merge_policy: MergePolicy,
    pub max_file_bytes: u64,
    pub rename_threshold: u8,
    pub bot_patterns: Vec<String>,
    pub include_bots: bool,
}

impl Default for MiningSection {
    fn default() -> Self {
        Self {
            merge_policy: MergePolicy::Skip,
            max_file_bytes: 1 << 20,
            rename_threshold: 50,
            bot_patterns: DEFAULT_BOT_PATTERNS.iter().map(|s| s.to_string()).collect(),
            include_bots: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StudySection {
    pub seed: u64,
    pub placebo_k: usize,
    /// Catalog category that defines treatment.
    pub category: String,
    /// Restricts the inter-project networks to this many trailing days
    /// before each repository's last commit instead of its whole lifetime.
    pub lifetime_window_days: Option<i64>,
}

impl Default for StudySection {
    fn default() -> Self {
        Self { seed: 42, placebo_k: 20, category: coedit_core::actions::CODE_REVIEW.into(), lifetime_window_days: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GithubMode {
    #[default]
    Offline,
    Replay,
    Live,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GithubSection {
    pub mode: GithubMode,
    /// Replay directory, or the request cache in live mode.
    pub fixtures: Option<PathBuf>,
    pub requests_per_hour: u32,
    pub max_concurrent: usize,
}

impl Default for GithubSection {
    fn default() -> Self {
        Self { mode: GithubMode::Offline, fixtures: None, requests_per_hour: 5000, max_concurrent: 4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    /// Worker threads; 0 uses all cores.
    pub jobs: usize,
}

impl Default for RunSection {
    fn default() -> Self {
        Self { jobs: 4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub input: InputSection,
    pub output: OutputSection,
    #[serde(default)]
    pub mining: MiningSection,
    #[serde(default)]
    pub criteria: SelectionCriteria,
    #[serde(default)]
    pub phases: PhaseLengths,
    #[serde(default)]
    pub study: StudySection,
    #[serde(default)]
    pub tests: TestPolicy,
    #[serde(default)]
    pub github: GithubSection,
    #[serde(default)]
    pub run: RunSection,
}

fn config_err(detail: impl Into<String>) -> PipelineError {
    PipelineError::Config(detail.into())
}

impl StudyConfig {
    /// Parses `path`, resolves relative paths against its directory and
    /// checks that every referenced input exists.
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }

    pub fn parse(text: &str, base: &Path) -> Result<Self, PipelineError> {
        let mut cfg: StudyConfig = toml::from_str(text).map_err(|e| config_err(e.to_string()))?;
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut cfg.input.repos);
        resolve(&mut cfg.output.dir);
        for p in [&mut cfg.input.profiles, &mut cfg.input.catalog, &mut cfg.input.aliases, &mut cfg.github.fixtures]
            .into_iter()
            .flatten()
        {
            resolve(p);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), PipelineError> {
        let mut required = vec![("input.repos", &self.input.repos)];
        for (key, p) in [
            ("input.profiles", &self.input.profiles),
            ("input.catalog", &self.input.catalog),
            ("input.aliases", &self.input.aliases),
        ] {
            if let Some(p) = p {
                required.push((key, p));
            }
        }
        if self.github.mode == GithubMode::Replay {
            match &self.github.fixtures {
                Some(p) => required.push(("github.fixtures", p)),
                None => return Err(config_err("github.mode = \"replay\" needs github.fixtures")),
            }
        }
        for (key, p) in required {
            if !p.exists() {
                return Err(config_err(format!("{key}: {} does not exist", p.display())));
            }
        }
        if self.phases.exclusion_days < 0 || self.phases.phase_days <= 0 {
            return Err(config_err("phases: day counts must be positive"));
        }
        if matches!(self.study.lifetime_window_days, Some(d) if d <= 0) {
            return Err(config_err("study.lifetime_window_days must be positive"));
        }
        if !(0.0..1.0).contains(&self.tests.normality_alpha) {
            return Err(config_err("tests.normality_alpha must lie in [0, 1)"));
        }
        Ok(())
    }

    pub fn ingest_options(&self) -> Result<IngestOptions, PipelineError> {
        let alias_map = match &self.input.aliases {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| config_err(format!("{}: {e}", p.display())))?;
                AliasMap::parse(&text).map_err(|e| config_err(format!("{}: {e}", p.display())))?
            }
            None => AliasMap::new(),
        };
        Ok(IngestOptions {
            merge_policy: self.mining.merge_policy,
            max_file_bytes: self.mining.max_file_bytes,
            rename_threshold: self.mining.rename_threshold,
            alias_map,
            bot_patterns: self.mining.bot_patterns.clone(),
        })
    }

    /// Hash of every setting that affects results. The output directory
    /// and the parallelism are excluded.
    pub fn hash(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Some(obj) = v.as_object_mut() {
            obj.remove("output");
            obj.remove("run");
            if let Some(input) = obj.get_mut("input").and_then(|i| i.as_object_mut()) {
                // paths differ between checkouts; their contents are hashed per stage
                input.clear();
            }
            if let Some(gh) = obj.get_mut("github").and_then(|i| i.as_object_mut()) {
                gh.remove("fixtures");
            }
        }
        hex::encode(Sha256::digest(v.to_string().as_bytes()))
    }
}

/// Annotated configuration listing every option with its default.
pub fn example() -> String {
    let c = SelectionCriteria::default();
    let p = PhaseLengths::default();
    let s = StudySection::default();
    let t = TestPolicy::default();
    let g = GithubSection::default();
    let m = MiningSection::default();
    format!(
        r#"# coedit study configuration. Relative paths are resolved against the
# directory containing this file. Every option below shows its default.

[input]
# CSV with columns full_name,path (path to a local clone). Optional columns
# language, stars, is_fork, pull_requests complete profiles in offline mode.
repos = "repos.csv"
# Repository profiles as exported by the sampling service (full_name,
# language, stars, contributors, commits, is_fork, created_at,
# last_commit_at, pull_requests). Takes precedence over other sources.
# profiles = "profiles.csv"
# Bot catalog, one `owner/name,category` per line. Built-in list if unset.
# catalog = "catalog.txt"
# Identity aliases, one `alias,canonical` per line.
# aliases = "aliases.csv"

[output]
dir = "out"

[mining]
merge_policy = "{merge}"  # skip | first_parent
max_file_bytes = {max_bytes}  # larger blobs are not line-tracked
rename_threshold = {rename}  # similarity percent for rename detection
bot_patterns = {bots:?}
include_bots = {include_bots}  # keep bot identities in networks

[criteria]
min_contributors = {min_contributors}
min_commits = {min_commits}
exclude_forks = {exclude_forks}
last_commit_after = "{last_commit_after}"
min_stars = {min_stars}
min_activity_months_each_side = {months}

[phases]
exclusion_days = {excl}  # half-width of the window excluded around adoption
phase_days = {phase}  # length of each phase

[study]
seed = {seed}
placebo_k = {k}
category = "{category}"
# lifetime_window_days = 365  # inter-project networks over a trailing window

[tests]
normality_check = {normality}  # switch to t-tests when Shapiro-Wilk accepts normality
normality_alpha = {alpha}

[github]
mode = "offline"  # offline | replay | live (token from {token_env})
# fixtures = "fixtures"  # replay directory, or request cache in live mode
requests_per_hour = {rph}
max_concurrent = {conc}

[run]
jobs = 4  # worker threads, 0 = all cores
"#,
        merge = "skip",
        max_bytes = m.max_file_bytes,
        rename = m.rename_threshold,
        bots = m.bot_patterns,
        include_bots = m.include_bots,
        min_contributors = c.min_contributors,
        min_commits = c.min_commits,
        exclude_forks = c.exclude_forks,
        last_commit_after = c.last_commit_after,
        min_stars = c.min_stars,
        months = c.min_activity_months_each_side,
        excl = p.exclusion_days,
        phase = p.phase_days,
        seed = s.seed,
        k = s.placebo_k,
        category = s.category,
        normality = t.normality_check,
        alpha = t.normality_alpha,
        token_env = coedit_gh::TOKEN_ENV,
        rph = g.requests_per_hour,
        conc = g.max_concurrent,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn example_round_trips_to_defaults() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("repos.csv"), "full_name,path\n").unwrap();
        let cfg = StudyConfig::parse(&example(), dir.path()).unwrap();
        assert_eq!(cfg.criteria, SelectionCriteria::default());
        assert_eq!(cfg.phases, PhaseLengths::default());
        assert_eq!(cfg.mining, MiningSection::default());
        assert_eq!(cfg.study, StudySection::default());
        assert_eq!(cfg.tests, TestPolicy::default());
        assert_eq!(cfg.github, GithubSection::default());
        assert_eq!(cfg.output.dir, dir.path().join("out"));
    }

    #[test]
    fn missing_paths_and_unknown_keys_are_config_errors() {
        let dir = tempfile::tempdir().unwrap();
        let err = StudyConfig::parse("[input]\nrepos = \"nope.csv\"\n[output]\ndir = \"o\"\n", dir.path()).unwrap_err();
        assert!(matches!(err, PipelineError::Config(ref m) if m.contains("input.repos")));
        std::fs::write(dir.path().join("r.csv"), "").unwrap();
        let err = StudyConfig::parse("[input]\nrepos = \"r.csv\"\nbogus = 1\n[output]\ndir = \"o\"\n", dir.path()).unwrap_err();
        assert!(matches!(err, PipelineError::Config(_)));
        let err = StudyConfig::parse("[input]\nrepos = \"r.csv\"\n[output]\ndir = \"o\"\n[github]\nmode = \"replay\"\n", dir.path()).unwrap_err();
        assert!(matches!(err, PipelineError::Config(ref m) if m.contains("fixtures")));
    }

    #[test]
    fn hash_ignores_output_location() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("r.csv"), "").unwrap();
        let a = StudyConfig::parse("[input]\nrepos = \"r.csv\"\n[output]\ndir = \"a\"\n", dir.path()).unwrap();
        let b = StudyConfig::parse("[input]\nrepos = \"r.csv\"\n[output]\ndir = \"b\"\n", dir.path()).unwrap();
        let c = StudyConfig::parse("[input]\nrepos = \"r.csv\"\n[output]\ndir = \"b\"\n[study]\nseed = 7\n", dir.path()).unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
    }
}
