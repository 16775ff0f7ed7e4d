use std::collections::{BTreeMap, BTreeSet};

use coedit_core::ingest::GitRepo;
use coedit_core::provenance::CacheStatus;
use rayon::prelude::*;
use serde_json::{json, Value};

use super::{Pipeline, EVENTS_DIR};
use crate::tables::{csv_string, opt_ts};
use crate::PipelineError;

struct Mined {
    repo: String,
    head: String,
    result: Result<MinedLog, String>,
}

struct MinedLog {
    cache: CacheStatus,
    commits: usize,
    coedits: usize,
    contributions: usize,
    first: Option<chrono::DateTime<chrono::Utc>>,
    last: Option<chrono::DateTime<chrono::Utc>>,
}

impl Pipeline {
    /// Extracts (or reuses) the event log of every listed repository.
    /// Failures are isolated per repository; the stage fails only when no
    /// repository could be mined.
    pub fn mine(&mut self) -> Result<(), PipelineError> {
        let heads: Vec<(String, String)> = self.pool.install(|| {
            self.repos
                .par_iter()
                .map(|r| {
                    let head = GitRepo::open(&r.path)
                        .and_then(|g| g.head())
                        .unwrap_or_else(|e| format!("unavailable: {e}"));
                    (r.full_name.clone(), head)
                })
                .collect()
        });
        let inputs: BTreeMap<String, String> = heads.iter().map(|(n, h)| (format!("head:{n}"), h.clone())).collect();
        let settings = json!({ "ingest": self.opts.options_hash() });
        self.stage("mine", settings, inputs, &["mine"], |p, outs| {
            let cache = p.event_cache();
            let opts = p.opts.clone();
            let mined: Vec<Mined> = p.pool.install(|| {
                p.repos
                    .par_iter()
                    .zip(heads.par_iter())
                    .map(|(r, (_, head))| {
                        let result = cache
                            .load_or_extract(&r.full_name, &r.path, &opts)
                            .map(|(log, status)| MinedLog {
                                cache: status,
                                commits: log.contributions.iter().map(|c| c.commit_id.as_str()).collect::<BTreeSet<_>>().len(),
                                coedits: log.coedits.len(),
                                contributions: log.contributions.len(),
                                first: log.activity_times().first().copied(),
                                last: log.activity_times().last().copied(),
                            })
                            .map_err(|e| e.to_string());
                        if let Err(e) = &result {
                            log::warn!("mine: {}: {e}", r.full_name);
                        }
                        Mined { repo: r.full_name.clone(), head: head.clone(), result }
                    })
                    .collect()
            });

            let rows = mined.iter().map(|m| match &m.result {
                Ok(l) => vec![
                    m.repo.clone(),
                    "ok".into(),
                    m.head.clone(),
                    l.commits.to_string(),
                    l.coedits.to_string(),
                    l.contributions.to_string(),
                    opt_ts(l.first),
                    opt_ts(l.last),
                    String::new(),
                ],
                Err(e) => vec![m.repo.clone(), "failed".into(), String::new(), String::new(), String::new(), String::new(), String::new(), String::new(), e.clone()],
            });
            outs.write(
                "mine/summary.csv",
                csv_string(
                    &["repo", "status", "head_commit", "commits", "coedit_events", "contribution_events", "first_event", "last_event", "error"],
                    rows,
                ),
            )?;

            let ok: Vec<&Mined> = mined.iter().filter(|m| m.result.is_ok()).collect();
            let failed = mined.len() - ok.len();
            if ok.is_empty() && !mined.is_empty() {
                return Err(PipelineError::AllFailed { stage: "mine", count: failed });
            }
            for m in &ok {
                let rel = cache.path_for(&m.repo);
                let rel = rel.strip_prefix(&p.out).unwrap_or(&rel).to_string_lossy().replace('\\', "/");
                debug_assert!(rel.starts_with(EVENTS_DIR));
                outs.adopt(&rel)?;
            }
            let logs: Vec<&MinedLog> = ok.iter().filter_map(|m| m.result.as_ref().ok()).collect();
            p.manifest.data_span.first_event = logs.iter().filter_map(|l| l.first).min().map(crate::tables::ts);
            p.manifest.data_span.last_event = logs.iter().filter_map(|l| l.last).max().map(crate::tables::ts);
            let hits = logs.iter().filter(|l| l.cache == CacheStatus::Hit).count();
            let summary = BTreeMap::from([
                ("ok".to_string(), Value::from(ok.iter().map(|m| m.repo.clone()).collect::<Vec<_>>())),
                ("failed".to_string(), Value::from(failed)),
                ("cache_hits".to_string(), Value::from(hits)),
            ]);
            let detail = format!("{} mined, {failed} failed, {hits} from cache", ok.len());
            Ok((summary, detail))
        })
    }
}
