//! Stage orchestration. Each stage is a method on [`Pipeline`]; stages pull
//! in their prerequisites, which are skipped when still fresh.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use coedit_core::actions::BotCatalog;
use coedit_core::ingest::IngestOptions;
use coedit_core::provenance::{EventCache, EventLog};
use coedit_gh::{ClientOptions, GhClient, LiveTransport, RecordingTransport, ReplayTransport, Transport};
use serde_json::Value;

use crate::config::{GithubMode, StudyConfig};
use crate::manifest::{fingerprint, hash_tree, OutputSet, RunManifest, StageRecord, StageStatus};
use crate::repos::{read_repo_list, RepoEntry};
use crate::PipelineError;

mod detect;
mod metrics;
mod mine;
mod report;
pub mod study;

pub use detect::census_from_usage;

pub const STAGES: [&str; 5] = ["mine", "detect", "metrics", "study", "report"];
pub(crate) const EVENTS_DIR: &str = "cache/events";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StageOutcome {
    pub stage: &'static str,
    pub status: StageStatus,
    /// One-line description of what the stage produced.
    pub detail: String,
}

type Client = GhClient<Box<dyn Transport>>;

pub struct Pipeline {
    cfg: StudyConfig,
    out: PathBuf,
    manifest: RunManifest,
    pool: rayon::ThreadPool,
    repos: Vec<RepoEntry>,
    opts: IngestOptions,
    catalog: BotCatalog,
    gh: Option<Client>,
    done: BTreeSet<&'static str>,
    outcomes: Vec<StageOutcome>,
}

fn build_client(cfg: &StudyConfig, out: &Path) -> Option<Client> {
    let transport: Box<dyn Transport> = match cfg.github.mode {
        GithubMode::Offline => return None,
        GithubMode::Replay => Box::new(ReplayTransport::new(cfg.github.fixtures.as_deref().expect("validated"))),
        GithubMode::Live => {
            let cache = cfg.github.fixtures.clone().unwrap_or_else(|| out.join("cache/github"));
            Box::new(RecordingTransport::new(LiveTransport::from_env(), &cache))
        }
    };
    let throttle = (cfg.github.mode == GithubMode::Live).then_some(cfg.github.requests_per_hour);
    let options = ClientOptions {
        requests_per_hour: throttle,
        max_concurrent: cfg.github.max_concurrent.max(1),
        ..ClientOptions::default()
    };
    Some(GhClient::new(transport, options))
}

impl Pipeline {
    pub fn new(cfg: StudyConfig) -> Result<Self, PipelineError> {
        let out = cfg.output.dir.clone();
        std::fs::create_dir_all(&out).map_err(|e| PipelineError::io(&out, e))?;
        let repos = read_repo_list(&cfg.input.repos)?;
        let opts = cfg.ingest_options()?;
        let catalog = match &cfg.input.catalog {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| PipelineError::Config(format!("{}: {e}", p.display())))?;
                BotCatalog::parse(&text).map_err(|e| PipelineError::Config(format!("{}: {e}", p.display())))?
            }
            None => BotCatalog::default(),
        };
        let mut builder = rayon::ThreadPoolBuilder::new();
        if cfg.run.jobs > 0 {
            builder = builder.num_threads(cfg.run.jobs);
        }
        let pool = builder.build().map_err(|e| PipelineError::Config(format!("run.jobs: {e}")))?;
        let manifest = RunManifest::load_or_new(&out, cfg.hash(), cfg.study.seed);
        let gh = build_client(&cfg, &out);
        Ok(Self { cfg, out, manifest, pool, repos, opts, catalog, gh, done: BTreeSet::new(), outcomes: Vec::new() })
    }

    pub fn output_dir(&self) -> &Path {
        &self.out
    }

    pub fn manifest(&self) -> &RunManifest {
        &self.manifest
    }

    /// Outcomes of every stage run or skipped so far, in execution order.
    pub fn outcomes(&self) -> &[StageOutcome] {
        &self.outcomes
    }

    pub fn run_all(&mut self) -> Result<(), PipelineError> {
        self.mine()?;
        self.detect()?;
        self.metrics()?;
        self.study()?;
        self.report()
    }

    /// Runs `compute` unless the stage's fingerprint and outputs are
    /// unchanged. `clear` lists output directories removed before a rerun.
    fn stage<F>(
        &mut self,
        stage: &'static str,
        settings: Value,
        inputs: BTreeMap<String, String>,
        clear: &[&str],
        compute: F,
    ) -> Result<(), PipelineError>
    where
        F: FnOnce(&mut Self, &mut OutputSet) -> Result<(BTreeMap<String, Value>, String), PipelineError>,
    {
        if self.done.contains(stage) {
            return Ok(());
        }
        let fp = fingerprint(stage, &settings, &inputs);
        if self.manifest.is_fresh(&self.out, stage, &fp) {
            let rec = self.manifest.stages.get_mut(stage).expect("fresh implies record");
            rec.status = StageStatus::Cached;
            let detail = rec.summary.get("detail").and_then(Value::as_str).unwrap_or("").to_string();
            log::info!("{stage}: cached");
            self.finish(stage, StageStatus::Cached, detail)?;
            return Ok(());
        }
        for dir in clear {
            let p = self.out.join(dir);
            if p.exists() {
                std::fs::remove_dir_all(&p).map_err(|e| PipelineError::io(&p, e))?;
            }
        }
        log::info!("{stage}: computing");
        let mut outs = OutputSet::new(&self.out);
        let (mut summary, detail) = compute(self, &mut outs)?;
        summary.insert("detail".into(), Value::String(detail.clone()));
        self.manifest.stages.insert(
            stage.to_string(),
            StageRecord { status: StageStatus::Computed, fingerprint: fp, inputs, outputs: outs.files, summary },
        );
        self.finish(stage, StageStatus::Computed, detail)
    }

    fn finish(&mut self, stage: &'static str, status: StageStatus, detail: String) -> Result<(), PipelineError> {
        self.done.insert(stage);
        self.outcomes.push(StageOutcome { stage, status, detail });
        self.manifest.save(&self.out)
    }

    fn summary_list(&self, stage: &str, key: &str) -> Vec<String> {
        self.manifest
            .stages
            .get(stage)
            .and_then(|r| r.summary.get(key))
            .and_then(Value::as_array)
            .map(|a| a.iter().filter_map(|v| v.as_str().map(str::to_string)).collect())
            .unwrap_or_default()
    }

    /// Repositories whose event log was extracted by the last `mine`.
    fn mined(&self) -> Vec<RepoEntry> {
        let ok: BTreeSet<String> = self.summary_list("mine", "ok").into_iter().collect();
        self.repos.iter().filter(|r| ok.contains(&r.full_name)).cloned().collect()
    }

    fn event_cache(&self) -> EventCache {
        EventCache::new(self.out.join(EVENTS_DIR))
    }

    fn load_log(&self, stage: &'static str, repo: &str) -> Result<EventLog, PipelineError> {
        self.event_cache()
            .read(repo)
            .map(|(_, log)| log)
            .map_err(|e| PipelineError::Invariant { stage, repo: repo.to_string(), detail: format!("event cache: {e}") })
    }

    fn load_logs(&self, stage: &'static str, repos: &[RepoEntry]) -> Result<Vec<EventLog>, PipelineError> {
        use rayon::prelude::*;
        self.pool.install(|| repos.par_iter().map(|r| self.load_log(stage, &r.full_name)).collect())
    }

    /// Identifies the remote data source, so cached stages notice changes.
    fn github_input(&self) -> String {
        match (&self.cfg.github.mode, &self.cfg.github.fixtures) {
            (GithubMode::Offline, _) => "offline".into(),
            (GithubMode::Live, _) => "live".into(),
            (GithubMode::Replay, Some(dir)) => {
                let tree = hash_tree(dir).unwrap_or_default();
                format!("replay:{}", crate::manifest::sha256_bytes(serde_json::to_string(&tree).unwrap_or_default().as_bytes()))
            }
            (GithubMode::Replay, None) => "replay".into(),
        }
    }

    fn prefixed(prefix: &str, map: BTreeMap<String, String>) -> BTreeMap<String, String> {
        map.into_iter().map(|(k, v)| (format!("{prefix}:{k}"), v)).collect()
    }
}
