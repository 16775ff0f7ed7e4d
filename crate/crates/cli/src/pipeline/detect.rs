use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use coedit_core::actions::{
    detect_adoption, format_share, workflow_refs_at, ActionRef, AdoptionRecord, BotCatalog, Census, CensusAccumulator,
    ParseFailure, WorkflowRun,
};
use coedit_core::ingest::GitRepo;
use coedit_gh::GhError;
use rayon::prelude::*;
use serde_json::{json, Value};

use super::Pipeline;
use crate::manifest::OutputSet;
use crate::tables::{csv_string, opt_ts, pretty_json, ts};
use crate::PipelineError;

pub(crate) const ADOPTIONS_JSON: &str = "detect/adoptions.json";
pub(crate) const TOP_N: usize = 20;

struct Detected {
    repo: String,
    records: Vec<AdoptionRecord>,
    parse_errors: Vec<ParseFailure>,
    /// Distinct marketplace slugs referenced at HEAD.
    slugs: BTreeSet<String>,
    warnings: Vec<String>,
}

fn refs_at_head(path: &Path) -> Result<(Vec<ActionRef>, Vec<ParseFailure>), String> {
    let repo = GitRepo::open(path).map_err(|e| e.to_string())?;
    if repo.head().is_err() {
        return Ok((Vec::new(), Vec::new()));
    }
    workflow_refs_at(path, "HEAD").map_err(|e| e.to_string())
}

impl Pipeline {
    fn detect_one(&self, repo: &str, path: &Path) -> Result<Detected, String> {
        let mut warnings = Vec::new();
        let runs: Option<Vec<WorkflowRun>> = match &self.gh {
            None => None,
            Some(gh) => match gh.fetch_workflow_runs(repo) {
                Ok(runs) => Some(runs.iter().map(WorkflowRun::from).collect()),
                Err(GhError::NotFound(_)) => None,
                Err(e) => {
                    warnings.push(format!("workflow runs unavailable: {e}"));
                    None
                }
            },
        };
        let scan = detect_adoption(path, repo, &self.catalog, runs.as_deref()).map_err(|e| e.to_string())?;
        let (refs, _) = refs_at_head(path)?;
        let slugs = refs.iter().filter(|r| r.is_marketplace()).map(ActionRef::slug).collect();
        Ok(Detected { repo: repo.to_string(), records: scan.records, parse_errors: scan.parse_errors, slugs, warnings })
    }

    /// Dates bot adoptions and takes the action census over the mined
    /// repositories.
    pub fn detect(&mut self) -> Result<(), PipelineError> {
        self.mine()?;
        let mut inputs: BTreeMap<String, String> = self
            .manifest
            .stages
            .get("mine")
            .map(|r| r.inputs.clone())
            .unwrap_or_default()
            .into_iter()
            .filter(|(k, _)| self.summary_list("mine", "ok").iter().any(|n| k == &format!("head:{n}")))
            .collect();
        inputs.insert("github".into(), self.github_input());
        let settings = json!({ "catalog": self.catalog.to_text() });
        self.stage("detect", settings, inputs, &["detect"], |p, outs| {
            let repos = p.mined();
            let found: Vec<(String, Result<Detected, String>)> = p.pool.install(|| {
                repos.par_iter().map(|r| (r.full_name.clone(), p.detect_one(&r.full_name, &r.path))).collect()
            });

            let mut records = Vec::new();
            let mut parse_rows = Vec::new();
            let mut usage_rows = Vec::new();
            let mut failure_rows = Vec::new();
            let mut acc = CensusAccumulator::default();
            for (repo, d) in &found {
                match d {
                    Ok(d) => {
                        records.extend(d.records.iter().cloned());
                        for f in &d.parse_errors {
                            parse_rows.push(vec![d.repo.clone(), f.commit_id.clone(), f.file.clone(), f.detail.clone()]);
                        }
                        if d.slugs.is_empty() {
                            usage_rows.push(vec![d.repo.clone(), String::new()]);
                        }
                        for s in &d.slugs {
                            usage_rows.push(vec![d.repo.clone(), s.clone()]);
                        }
                        acc.add_slugs(d.slugs.iter().cloned());
                        for w in &d.warnings {
                            failure_rows.push(vec![d.repo.clone(), "warning".into(), w.clone()]);
                        }
                    }
                    Err(e) => failure_rows.push(vec![repo.clone(), "failed".into(), e.clone()]),
                }
            }
            let adoption_rows = records.iter().map(|r| {
                vec![
                    r.repo.clone(),
                    r.action.slug(),
                    r.category.clone(),
                    ts(r.t_ga),
                    r.commit_id.clone(),
                    serde_json::to_value(r.evidence).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default(),
                    opt_ts(r.first_run_time),
                    r.prior_tool.clone().unwrap_or_default(),
                    r.action.source_file.clone(),
                ]
            });
            outs.write(
                "detect/adoptions.csv",
                csv_string(
                    &["repo", "action", "category", "t_ga", "commit_id", "evidence", "first_run_time", "prior_tool", "workflow_file"],
                    adoption_rows,
                ),
            )?;
            outs.write(ADOPTIONS_JSON, pretty_json(&records))?;
            outs.write("detect/parse_errors.csv", csv_string(&["repo", "commit_id", "file", "detail"], parse_rows))?;
            outs.write("detect/usage.csv", csv_string(&["repo", "action"], usage_rows))?;
            outs.write("detect/failures.csv", csv_string(&["repo", "kind", "detail"], failure_rows.iter()))?;
            let census = acc.finish();
            write_census(outs, "detect", &census, &p.catalog)?;

            let failed = found.iter().filter(|(_, d)| d.is_err()).count();
            if failed == found.len() && failed > 0 {
                return Err(PipelineError::AllFailed { stage: "detect", count: failed });
            }
            let adopters: BTreeSet<&str> = records.iter().map(|r| r.repo.as_str()).collect();
            let detail = format!(
                "{} adoption records in {} repositories, {} of {} repositories use actions",
                records.len(),
                adopters.len(),
                census.repos_with_actions,
                census.total_repos
            );
            Ok((BTreeMap::from([("failed".to_string(), Value::from(failed))]), detail))
        })
    }

    pub(crate) fn load_adoptions(&self) -> Result<Vec<AdoptionRecord>, PipelineError> {
        let path = self.out.join(ADOPTIONS_JSON);
        let text = std::fs::read_to_string(&path).map_err(|e| PipelineError::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| PipelineError::Stage { stage: "detect", detail: format!("{ADOPTIONS_JSON}: {e}") })
    }
}

#[derive(serde::Serialize)]
struct CategoryTotal {
    occurrences: usize,
    actions: BTreeMap<String, usize>,
}

#[derive(serde::Serialize)]
struct CensusSummary<'a> {
    total_repos: usize,
    repos_with_actions: usize,
    share_with_actions_pct: String,
    distinct_actions: usize,
    min_actions: Option<usize>,
    median_actions: Option<f64>,
    max_actions: Option<usize>,
    /// Catalog actions grouped by category with their repository counts.
    categories: BTreeMap<&'a str, CategoryTotal>,
}

/// Writes `census.csv`, `top20.csv` and `census_summary.json` under `dir`.
pub(crate) fn write_census(outs: &mut OutputSet, dir: &str, census: &Census, catalog: &BotCatalog) -> Result<(), PipelineError> {
    outs.write(&format!("{dir}/census.csv"), census.to_csv())?;
    let top = census
        .top(TOP_N)
        .iter()
        .enumerate()
        .map(|(i, r)| vec![(i + 1).to_string(), r.action.clone(), r.count.to_string(), format_share(r.share_pct)]);
    outs.write(&format!("{dir}/top20.csv"), csv_string(&["rank", "action", "count", "share_pct"], top))?;
    let mut categories: BTreeMap<&str, CategoryTotal> = BTreeMap::new();
    for e in catalog.entries() {
        let count = census
            .rows
            .iter()
            .find(|r| r.action.eq_ignore_ascii_case(&e.pattern))
            .map_or(0, |r| r.count);
        let t = categories.entry(e.category.as_str()).or_insert(CategoryTotal { occurrences: 0, actions: BTreeMap::new() });
        t.occurrences += count;
        t.actions.insert(e.pattern.clone(), count);
    }
    let summary = CensusSummary {
        total_repos: census.total_repos,
        repos_with_actions: census.repos_with_actions,
        share_with_actions_pct: format_share(census.share_with_actions_pct),
        distinct_actions: census.rows.len(),
        min_actions: census.min_actions,
        median_actions: census.median_actions,
        max_actions: census.max_actions,
        categories,
    };
    outs.write(&format!("{dir}/census_summary.json"), pretty_json(&summary))
}

/// Census over a `repo,action` usage table. A row with an empty action
/// lists a repository without marketplace actions.
pub fn census_from_usage(usage: &Path, out_dir: &Path, catalog: &BotCatalog) -> Result<Census, PipelineError> {
    let bad = |detail: String| PipelineError::Config(format!("{}: {detail}", usage.display()));
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(usage).map_err(|e| bad(e.to_string()))?;
    let headers = rdr.headers().map_err(|e| bad(e.to_string()))?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name).ok_or_else(|| bad(format!("missing column `{name}`")));
    let (repo_col, action_col) = (col("repo")?, col("action")?);
    let mut by_repo: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row.map_err(|e| bad(format!("row {}: {e}", i + 2)))?;
        let repo = row.get(repo_col).unwrap_or("");
        if repo.is_empty() {
            return Err(bad(format!("row {}: empty repo", i + 2)));
        }
        let slugs = by_repo.entry(repo.to_string()).or_default();
        match row.get(action_col).unwrap_or("") {
            "" => {}
            a => match ActionRef::parse(a, "") {
                Some(r) if r.is_marketplace() => {
                    slugs.insert(r.slug());
                }
                _ => {}
            },
        }
    }
    let census = by_repo
        .into_values()
        .fold(CensusAccumulator::default(), |mut acc, slugs| {
            acc.add_slugs(slugs);
            acc
        })
        .finish();
    let mut outs = OutputSet::new(out_dir);
    write_census(&mut outs, ".", &census, catalog)?;
    Ok(census)
}
