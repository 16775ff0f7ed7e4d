use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Utc};
use coedit_core::actions::AdoptionRecord;
use coedit_core::networks::TimeWindow;
use coedit_core::provenance::EventLog;
use coedit_core::stats::{bh_adjust, paired, placebo_pvalue, two_sample, PlaceboDistribution, StatsError};
use coedit_core::study::{
    draw_placebos, filter_projects_with, history_window, match_controls, plan_phases_with, read_profiles_csv, PhasePlan,
    PlaceboPlan, Rejection, RepoProfile, StudyManifest, TreatedPlan,
};
use coedit_core::{BipartiteMetricVector, MetricVector, TestResult};
use rayon::prelude::*;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use super::metrics::{log_window, metric_fields, metric_header, networks, Networks};
use super::{detect::ADOPTIONS_JSON, Pipeline};
use crate::manifest::{sha256_file, OutputSet};
use crate::repos::RepoEntry;
use crate::tables::{csv_string, real, ts};
use crate::PipelineError;

pub(crate) const RESULTS_CSV: &str = "study/results.csv";
pub(crate) const REASON_NO_PROFILE: &str = "no profile";
pub(crate) const REASON_NO_PLACEBO: &str = "no feasible placebo";

pub(crate) const RESULT_HEADER: [&str; 13] = [
    "hypothesis", "metric", "method", "statistic", "p", "p_exact", "p_adjusted", "effect_size", "n1", "n2", "exact",
    "dropped", "flags",
];

/// Seed for one repository's placebo draw, independent of corpus order.
pub fn repo_seed(seed: u64, repo: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(repo.as_bytes());
    u64::from_le_bytes(h.finalize()[..8].try_into().expect("8 bytes"))
}

fn coedit_value(m: &MetricVector, name: &str) -> f64 {
    m.get(name).unwrap_or(f64::NAN)
}

fn bip_value(b: &BipartiteMetricVector, name: &str) -> f64 {
    b.get(name).unwrap_or(f64::NAN)
}

/// Which network family a hypothesis looks at.
#[derive(Clone, Copy)]
enum Family {
    Coedit,
    Bipartite,
}

impl Family {
    fn metrics(self) -> &'static [&'static str] {
        match self {
            Family::Coedit => &MetricVector::TESTED,
            Family::Bipartite => &BipartiteMetricVector::TESTED,
        }
    }

    fn value(self, n: &Networks, name: &str) -> f64 {
        match self {
            Family::Coedit => coedit_value(&n.m, name),
            Family::Bipartite => bip_value(&n.b, name),
        }
    }
}

struct Row {
    hypothesis: &'static str,
    metric: &'static str,
    result: Result<TestResult, StatsError>,
}

fn result_rows(rows: &[Row]) -> Result<Vec<Vec<String>>, PipelineError> {
    let mut out = Vec::new();
    let mut families: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, r) in rows.iter().enumerate() {
        families.entry(r.hypothesis).or_default().push(i);
    }
    let mut adjusted = vec![f64::NAN; rows.len()];
    for idx in families.values() {
        let ps: Vec<f64> = idx.iter().map(|&i| rows[i].result.as_ref().map_or(f64::NAN, |t| t.p_value)).collect();
        let adj = bh_adjust(&ps).map_err(|e| PipelineError::Stage { stage: "study", detail: e.to_string() })?;
        for (&i, a) in idx.iter().zip(adj) {
            adjusted[i] = a;
        }
    }
    for (r, adj) in rows.iter().zip(adjusted) {
        out.push(match &r.result {
            Ok(t) => vec![
                r.hypothesis.to_string(),
                r.metric.to_string(),
                t.method.as_str().to_string(),
                real(t.statistic),
                real(t.p_value),
                t.p_exact.map(|q| format!("{}/{}", q.numer(), q.denom())).unwrap_or_default(),
                real(adj),
                real(t.effect_size),
                t.n1.to_string(),
                t.n2.to_string(),
                t.exact.to_string(),
                t.dropped.to_string(),
                t.flags.join(";"),
            ],
            Err(e) => vec![
                r.hypothesis.to_string(),
                r.metric.to_string(),
                "none".into(),
                "NA".into(),
                "NA".into(),
                String::new(),
                "NA".into(),
                "NA".into(),
                "0".into(),
                "0".into(),
                "false".into(),
                "0".into(),
                format!("error: {e}"),
            ],
        });
    }
    Ok(out)
}

/// Networks for one time point's two phases.
struct PhasePair {
    plan: PhasePlan,
    before: Networks,
    after: Networks,
}

impl PhasePair {
    fn compute(log: &EventLog, plan: PhasePlan, include_bots: bool) -> Self {
        Self { before: networks(log, plan.phase1, include_bots), after: networks(log, plan.phase2, include_bots), plan }
    }

    fn delta(&self, f: Family, metric: &str) -> f64 {
        f.value(&self.after, metric) - f.value(&self.before, metric)
    }
}

struct TreatedAnalysis {
    repo: String,
    action: String,
    adoption: PhasePair,
    placebo_plan: PlaceboPlan,
    placebos: Vec<PhasePair>,
}

fn mean_finite(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.filter(|x| x.is_finite()).fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

/// Profile of a repository derived from its own history and the optional
/// columns of the repository list.
fn local_profile(entry: &RepoEntry, log: &EventLog) -> Option<RepoProfile> {
    let times = log.activity_times();
    let (first, last) = (*times.first()?, *times.last()?);
    let devs: BTreeSet<&str> =
        log.contributions.iter().filter(|c| !c.developer.is_bot).map(|c| c.developer.canonical_key.as_str()).collect();
    let commits: BTreeSet<&str> = log.contributions.iter().map(|c| c.commit_id.as_str()).collect();
    Some(RepoProfile {
        full_name: entry.full_name.clone(),
        primary_language: entry.language.clone().unwrap_or_else(|| "unknown".into()),
        stars: entry.stars.unwrap_or(0),
        contributors: devs.len() as u64,
        commits: commits.len() as u64,
        pull_requests: entry.pull_requests.unwrap_or(0),
        is_fork: entry.is_fork.unwrap_or(false),
        created_at: first,
        last_commit_at: last,
    })
}

impl Pipeline {
    /// Selection, matching and the four hypothesis tests.
    pub fn study(&mut self) -> Result<(), PipelineError> {
        self.mine()?;
        self.detect()?;
        let mut inputs = Self::prefixed("mine", self.manifest.outputs_of("mine"));
        let detect = self.manifest.outputs_of("detect");
        inputs.insert(format!("detect:{ADOPTIONS_JSON}"), detect.get(ADOPTIONS_JSON).cloned().unwrap_or_default());
        if let Some(p) = &self.cfg.input.profiles {
            inputs.insert("profiles".into(), sha256_file(p).map_err(|e| PipelineError::io(p, e))?);
        }
        inputs.insert("github".into(), self.github_input());
        let attrs: Vec<_> = self
            .repos
            .iter()
            .map(|r| (&r.full_name, &r.language, r.stars, r.is_fork, r.pull_requests))
            .collect();
        inputs.insert("repo_attributes".into(), crate::manifest::sha256_bytes(serde_json::to_string(&attrs).unwrap_or_default().as_bytes()));
        let settings = json!({
            "criteria": self.cfg.criteria,
            "phases": self.cfg.phases,
            "study": self.cfg.study,
            "tests": self.cfg.tests,
            "include_bots": self.cfg.mining.include_bots,
        });
        self.stage("study", settings, inputs, &["study"], |p, outs| p.compute_study(outs))
    }

    fn profiles(&self, repos: &[RepoEntry], logs: &[EventLog]) -> Result<Vec<(String, Option<(RepoProfile, &'static str)>)>, PipelineError> {
        let listed = match &self.cfg.input.profiles {
            Some(path) => {
                let f = std::fs::File::open(path).map_err(|e| PipelineError::io(path, e))?;
                let all = read_profiles_csv(f)
                    .map_err(|e| PipelineError::Stage { stage: "study", detail: format!("{}: {e}", path.display()) })?;
                Some(coedit_gh::index_profiles(all))
            }
            None => None,
        };
        let found: Vec<_> = self.pool.install(|| {
            repos
                .par_iter()
                .zip(logs.par_iter())
                .map(|(entry, log)| {
                    let name = &entry.full_name;
                    let got = if let Some(listed) = &listed {
                        listed.get(name).cloned().map(|p| (p, "profiles"))
                    } else if let Some(gh) = &self.gh {
                        match gh.fetch_repo_profile(name) {
                            Ok(p) => Some((p, "github")),
                            Err(e) => {
                                log::warn!("study: {name}: profile unavailable ({e}); deriving from history");
                                local_profile(entry, log).map(|p| (p, "history"))
                            }
                        }
                    } else {
                        local_profile(entry, log).map(|p| (p, "history"))
                    };
                    (name.clone(), got.map(|(mut p, src)| {
                        p.full_name = name.clone();
                        (p, src)
                    }))
                })
                .collect()
        });
        for (name, got) in &found {
            if let Some((p, _)) = got {
                p.validate().map_err(|e| PipelineError::Invariant { stage: "study", repo: name.clone(), detail: e.to_string() })?;
            }
        }
        Ok(found)
    }

    fn compute_study(&mut self, outs: &mut OutputSet) -> Result<(BTreeMap<String, Value>, String), PipelineError> {
        let cfg = self.cfg.clone();
        let lengths = cfg.phases;
        let include_bots = cfg.mining.include_bots;
        let category = cfg.study.category.as_str();
        let seed = cfg.study.seed;

        let repos = self.mined();
        let logs = self.load_logs("study", &repos)?;
        let log_of: BTreeMap<&str, &EventLog> = repos.iter().map(|r| r.full_name.as_str()).zip(logs.iter()).collect();
        let records = self.load_adoptions()?;
        let mut by_repo: BTreeMap<&str, Vec<AdoptionRecord>> = BTreeMap::new();
        for r in &records {
            by_repo.entry(r.repo.as_str()).or_default().push(r.clone());
        }

        // selection
        let found = self.profiles(&repos, &logs)?;
        let mut skipped = Vec::new();
        let mut profiles = Vec::new();
        let mut source: BTreeMap<String, &str> = BTreeMap::new();
        for (name, got) in found {
            match got {
                Some((p, src)) => {
                    source.insert(name, src);
                    profiles.push(p);
                }
                None => skipped.push(Rejection { repo: name, reasons: vec![REASON_NO_PROFILE.into()] }),
            }
        }
        let mut t_ga: BTreeMap<String, DateTime<Utc>> = BTreeMap::new();
        let mut adopted_action: BTreeMap<String, String> = BTreeMap::new();
        let mut in_category: BTreeSet<String> = BTreeSet::new();
        for (repo, recs) in &by_repo {
            if recs.iter().any(|r| r.category == category) {
                in_category.insert(repo.to_string());
            }
            if let Some(first) = coedit_core::actions::first_adoption(recs, category) {
                t_ga.insert(repo.to_string(), first.t_ga);
                adopted_action.insert(repo.to_string(), first.action.slug());
            }
        }
        let activity: BTreeMap<String, Vec<DateTime<Utc>>> =
            log_of.iter().map(|(n, l)| (n.to_string(), l.activity_times())).collect();
        let filter = filter_projects_with(&profiles, &cfg.criteria, &t_ga, &activity, lengths);
        let treated: Vec<RepoProfile> = filter.eligible.iter().filter(|p| t_ga.contains_key(&p.full_name)).cloned().collect();
        let pool: Vec<RepoProfile> =
            filter.eligible.iter().filter(|p| !in_category.contains(&p.full_name)).cloned().collect();
        let matching = match_controls(&treated, &pool, seed);

        let eligible: BTreeSet<&str> = filter.eligible.iter().map(|p| p.full_name.as_str()).collect();
        let group = |name: &str| {
            if t_ga.contains_key(name) {
                "treated"
            } else if in_category.contains(name) {
                "other_adopter"
            } else {
                "control_pool"
            }
        };
        let reasons: BTreeMap<&str, String> =
            filter.rejected.iter().map(|r| (r.repo.as_str(), r.reasons.join(";"))).collect();
        let filter_rows = profiles.iter().map(|p| {
            let n = p.full_name.as_str();
            vec![
                n.to_string(),
                source.get(n).copied().unwrap_or("").to_string(),
                eligible.contains(n).to_string(),
                group(n).to_string(),
                reasons.get(n).cloned().unwrap_or_default(),
            ]
        });
        let mut filter_rows: Vec<Vec<String>> = filter_rows.collect();
        for s in &skipped {
            filter_rows.push(vec![s.repo.clone(), String::new(), "false".into(), group(&s.repo).into(), s.reasons.join(";")]);
        }
        filter_rows.sort();
        outs.write("study/filter.csv", csv_string(&["repo", "profile_source", "eligible", "group", "reasons"], filter_rows))?;
        let match_rows = matching.pairs.iter().map(|m| {
            vec![m.treated.full_name.clone(), m.control.full_name.clone(), m.treated.primary_language.clone(), real(m.distance)]
        });
        outs.write("study/matches.csv", csv_string(&["treated", "control", "language", "distance"], match_rows))?;

        // H1 / H3: whole-lifetime networks of the matched samples
        let lifetime: BTreeMap<String, (TimeWindow, Networks)> = self.pool.install(|| {
            filter
                .eligible
                .par_iter()
                .filter_map(|p| {
                    let log = log_of.get(p.full_name.as_str())?;
                    let mut w = log_window(log);
                    if let Some(days) = cfg.study.lifetime_window_days {
                        let end = w.end;
                        w.start = w.start.max(end - chrono::Duration::days(days));
                    }
                    Some((p.full_name.clone(), (w, networks(log, w, include_bots))))
                })
                .collect()
        });
        let mut lifetime_rows = Vec::new();
        let roles: BTreeMap<&str, &str> = matching
            .pairs
            .iter()
            .flat_map(|m| [(m.treated.full_name.as_str(), "treated"), (m.control.full_name.as_str(), "control")])
            .collect();
        for (name, (w, n)) in &lifetime {
            let mut row = vec![name.clone(), roles.get(name.as_str()).copied().unwrap_or("unmatched").to_string(), ts(w.start), ts(w.end)];
            row.extend(metric_fields(n));
            lifetime_rows.push(row);
        }
        outs.write(
            "study/lifetime_metrics.csv",
            csv_string(&metric_header(&["repo", "sample", "window_start", "window_end"]), lifetime_rows),
        )?;

        let mut rows = Vec::new();
        for (hyp, fam) in [("H1", Family::Coedit), ("H3", Family::Bipartite)] {
            for &metric in fam.metrics() {
                let a: Vec<f64> = matching.pairs.iter().map(|m| fam.value(&lifetime[&m.treated.full_name].1, metric)).collect();
                let b: Vec<f64> = matching.pairs.iter().map(|m| fam.value(&lifetime[&m.control.full_name].1, metric)).collect();
                rows.push(Row { hypothesis: hyp, metric, result: two_sample(&a, &b, &cfg.tests).map(|t| t.with_metric(metric)) });
            }
        }

        // H2 / H4: phases around adoption and around placebo time points
        let analyses: Vec<Result<TreatedAnalysis, Rejection>> = self.pool.install(|| {
            treated
                .par_iter()
                .map(|p| {
                    let name = p.full_name.clone();
                    let log = log_of[name.as_str()];
                    let times = &activity[&name];
                    let (Some(&first), Some(&last)) = (times.first(), times.last()) else {
                        return Err(Rejection { repo: name, reasons: vec!["no recorded activity".into()] });
                    };
                    let history = history_window(first, last);
                    let t = t_ga[&name];
                    let plan = plan_phases_with(t, history, lengths)
                        .map_err(|e| Rejection { repo: name.clone(), reasons: vec![e.to_string()] })?;
                    let rseed = repo_seed(seed, &name);
                    let placebo_plan = draw_placebos(&plan, history, cfg.study.placebo_k, rseed)
                        .unwrap_or(PlaceboPlan { timepoints: Vec::new(), seed: rseed, shortfall: true });
                    let placebos = placebo_plan
                        .phase_plans(lengths)
                        .into_iter()
                        .map(|pp| PhasePair::compute(log, pp, include_bots))
                        .collect();
                    Ok(TreatedAnalysis {
                        action: adopted_action[&name].clone(),
                        adoption: PhasePair::compute(log, plan, include_bots),
                        placebo_plan,
                        placebos,
                        repo: name,
                    })
                })
                .collect()
        });
        let mut done = Vec::new();
        for a in analyses {
            match a {
                Ok(a) => {
                    if a.placebos.is_empty() {
                        skipped.push(Rejection { repo: a.repo.clone(), reasons: vec![REASON_NO_PLACEBO.into()] });
                    }
                    done.push(a);
                }
                Err(r) => skipped.push(r),
            }
        }

        let mut phase_rows = Vec::new();
        for a in &done {
            let pairs = std::iter::once(("adoption", 0, &a.adoption)).chain(a.placebos.iter().enumerate().map(|(i, p)| ("placebo", i + 1, p)));
            for (kind, idx, pp) in pairs {
                for (phase, w, n) in [("before", pp.plan.phase1, &pp.before), ("after", pp.plan.phase2, &pp.after)] {
                    let mut row = vec![a.repo.clone(), kind.into(), idx.to_string(), ts(pp.plan.t_ga), phase.into(), ts(w.start), ts(w.end)];
                    row.extend(metric_fields(n));
                    phase_rows.push(row);
                }
            }
        }
        outs.write(
            "study/phase_metrics.csv",
            csv_string(&metric_header(&["repo", "kind", "index", "time_point", "phase", "window_start", "window_end"]), phase_rows),
        )?;

        let mut placebo_rows: Vec<Row> = Vec::new();
        let mut placebo_repo: Vec<String> = Vec::new();
        for (hyp, placebo_hyp, fam) in [("H2", "H2-placebo", Family::Coedit), ("H4", "H4-placebo", Family::Bipartite)] {
            for &metric in fam.metrics() {
                let pairs: Vec<(f64, f64)> =
                    done.iter().map(|a| (fam.value(&a.adoption.before, metric), fam.value(&a.adoption.after, metric))).collect();
                rows.push(Row { hypothesis: hyp, metric, result: paired(&pairs, &cfg.tests).map(|t| t.with_metric(metric)) });

                let with_placebos: Vec<&TreatedAnalysis> = done.iter().filter(|a| !a.placebos.is_empty()).collect();
                for a in &with_placebos {
                    let d = PlaceboDistribution {
                        deltas: a.placebos.iter().map(|pp| pp.delta(fam, metric)).collect(),
                        observed: a.adoption.delta(fam, metric),
                    };
                    placebo_rows.push(Row { hypothesis: placebo_hyp, metric, result: placebo_pvalue(&d).map(|t| t.with_metric(metric)) });
                    placebo_repo.push(a.repo.clone());
                }
                let k = with_placebos.iter().map(|a| a.placebos.len()).min().unwrap_or(0);
                let pooled = PlaceboDistribution {
                    deltas: (0..k).map(|i| mean_finite(with_placebos.iter().map(|a| a.placebos[i].delta(fam, metric)))).collect(),
                    observed: mean_finite(with_placebos.iter().map(|a| a.adoption.delta(fam, metric))),
                };
                let result = placebo_pvalue(&pooled).map(|mut t| {
                    t.n1 = with_placebos.len();
                    t.with_metric(metric)
                });
                rows.push(Row { hypothesis: placebo_hyp, metric, result });
            }
        }
        outs.write("study/results.csv", csv_string(&RESULT_HEADER, result_rows(&rows)?))?;
        let mut per_repo = result_rows(&placebo_rows)?;
        for (row, repo) in per_repo.iter_mut().zip(&placebo_repo) {
            row.insert(0, repo.clone());
        }
        let header: Vec<&str> = std::iter::once("repo").chain(RESULT_HEADER).collect();
        outs.write("study/placebo_results.csv", csv_string(&header, per_repo))?;

        skipped.sort_by(|a, b| a.repo.cmp(&b.repo));
        let manifest = StudyManifest {
            seed,
            criteria: cfg.criteria.clone(),
            treated: done
                .iter()
                .map(|a| TreatedPlan {
                    repo: a.repo.clone(),
                    action: a.action.clone(),
                    phases: a.adoption.plan,
                    placebos: a.placebo_plan.clone(),
                })
                .collect(),
            matches: matching.pairs.clone(),
            unmatched: matching.unmatched.clone(),
            rejected: filter.rejected.clone(),
            skipped,
        };
        outs.write("study/manifest.json", manifest.to_json())?;

        let summary = BTreeMap::from([
            ("eligible".to_string(), Value::from(filter.eligible.len())),
            ("treated".to_string(), Value::from(done.len())),
            ("matched_pairs".to_string(), Value::from(matching.pairs.len())),
        ]);
        let detail = format!(
            "{} eligible, {} treated analysed, {} matched pairs, {} result rows",
            filter.eligible.len(),
            done.len(),
            matching.pairs.len(),
            rows.len()
        );
        Ok((summary, detail))
    }
}
