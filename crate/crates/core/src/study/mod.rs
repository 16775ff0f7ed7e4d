//! Study protocol: eligibility, matched controls, phase windows around
//! adoption and placebo time points.

mod matching;
mod phases;
mod profile;

use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Duration, NaiveDate, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::networks::TimeWindow;
use crate::provenance::EventLog;

pub use matching::{match_controls, MatchOutcome, MatchedPair, Unmatched, UnmatchedReason, CALIPER};
pub use phases::{
    draw_placebos, plan_phases, plan_phases_with, PhaseLengths, PhasePlan, PlaceboPlan, EXCLUSION_DAYS,
    MAX_PLACEBO_ATTEMPTS, PHASE_DAYS, REACH_DAYS,
};
pub use profile::{read_profiles_csv, RepoProfile};

#[derive(Debug, Error, PartialEq)]
pub enum StudyError {
    #[error("history {history_start}..{history_end} does not cover both phases around {t_ga}")]
    InsufficientHistory { t_ga: DateTime<Utc>, history_start: DateTime<Utc>, history_end: DateTime<Utc> },
    #[error("no feasible placebo time point around {t_ga}")]
    NoFeasiblePlacebo { t_ga: DateTime<Utc> },
    #[error("invalid repository profile {repo}: {detail}")]
    InvalidProfile { repo: String, detail: String },
    #[error("profile table: {0}")]
    Csv(String),
}

/// Length of a month when converting month thresholds to durations.
pub const MONTH_DAYS: f64 = 30.5;

pub(crate) fn days(d: f64) -> Duration {
    Duration::milliseconds((d * 86_400_000.0).round() as i64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SelectionCriteria {
    pub min_contributors: u64,
    pub min_commits: u64,
    pub exclude_forks: bool,
    /// Last commit must fall on a later day.
    pub last_commit_after: NaiveDate,
    pub min_stars: u64,
    pub min_activity_months_each_side: u32,
}

impl Default for SelectionCriteria {
    fn default() -> Self {
        Self {
            min_contributors: 3,
            min_commits: 30,
            exclude_forks: true,
            last_commit_after: NaiveDate::from_ymd_opt(2018, 10, 16).expect("valid date"),
            min_stars: 10,
            min_activity_months_each_side: 3,
        }
    }
}

pub const REASON_CONTRIBUTORS: &str = "min_contributors";
pub const REASON_COMMITS: &str = "min_commits";
pub const REASON_FORK: &str = "fork";
pub const REASON_LAST_COMMIT: &str = "last_commit_after";
pub const REASON_STARS: &str = "min_stars";
pub const REASON_ACTIVITY: &str = "activity window";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    pub repo: String,
    pub reasons: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FilterOutcome {
    pub eligible: Vec<RepoProfile>,
    pub rejected: Vec<Rejection>,
}

/// Applies the selection criteria. Repositories present in `adoptions` are
/// treated: their history must reach the activity threshold on both sides
/// of adoption, cover both phases, and contain a commit in each phase.
/// `activity` holds commit times per repository; without it the profile's
/// `created_at`/`last_commit_at` bound the history and the per-phase commit
/// check is skipped.
pub fn filter_projects(
    profiles: &[RepoProfile],
    criteria: &SelectionCriteria,
    adoptions: &BTreeMap<String, DateTime<Utc>>,
    activity: &BTreeMap<String, Vec<DateTime<Utc>>>,
) -> FilterOutcome {
    filter_projects_with(profiles, criteria, adoptions, activity, PhaseLengths::default())
}

pub fn filter_projects_with(
    profiles: &[RepoProfile],
    criteria: &SelectionCriteria,
    adoptions: &BTreeMap<String, DateTime<Utc>>,
    activity: &BTreeMap<String, Vec<DateTime<Utc>>>,
    lengths: PhaseLengths,
) -> FilterOutcome {
    let mut out = FilterOutcome::default();
    for p in profiles {
        let mut reasons = Vec::new();
        if p.contributors < criteria.min_contributors {
            reasons.push(REASON_CONTRIBUTORS);
        }
        if p.commits < criteria.min_commits {
            reasons.push(REASON_COMMITS);
        }
        if criteria.exclude_forks && p.is_fork {
            reasons.push(REASON_FORK);
        }
        if p.last_commit_at.date_naive() <= criteria.last_commit_after {
            reasons.push(REASON_LAST_COMMIT);
        }
        if p.stars < criteria.min_stars {
            reasons.push(REASON_STARS);
        }
        if let Some(&t_ga) = adoptions.get(&p.full_name) {
            if !activity_ok(p, t_ga, criteria, activity.get(&p.full_name).map(Vec::as_slice), lengths) {
                reasons.push(REASON_ACTIVITY);
            }
        }
        if reasons.is_empty() {
            out.eligible.push(p.clone());
        } else {
            out.rejected.push(Rejection {
                repo: p.full_name.clone(),
                reasons: reasons.into_iter().map(String::from).collect(),
            });
        }
    }
    out
}

fn activity_ok(
    p: &RepoProfile,
    t_ga: DateTime<Utc>,
    criteria: &SelectionCriteria,
    commits: Option<&[DateTime<Utc>]>,
    lengths: PhaseLengths,
) -> bool {
    let (first, last) = match commits {
        Some(c) if !c.is_empty() => (*c.iter().min().expect("non-empty"), *c.iter().max().expect("non-empty")),
        _ => (p.created_at, p.last_commit_at),
    };
    let need = days(criteria.min_activity_months_each_side as f64 * MONTH_DAYS);
    if first > t_ga - need || last < t_ga + need {
        return false;
    }
    let Ok(plan) = plan_phases_with(t_ga, history_window(first, last), lengths) else {
        return false;
    };
    match commits {
        Some(c) if !c.is_empty() => {
            c.iter().any(|t| plan.phase1.contains(*t)) && c.iter().any(|t| plan.phase2.contains(*t))
        }
        _ => true,
    }
}

/// History span from first to last activity, with the last instant included.
pub fn history_window(first: DateTime<Utc>, last: DateTime<Utc>) -> TimeWindow {
    TimeWindow { start: first, end: last + Duration::seconds(1) }
}

/// Distinct non-bot developers with a commit in the 12 months before `t`.
pub fn active_contributors(log: &EventLog, t: DateTime<Utc>) -> usize {
    let from = t - Duration::days(365);
    log.contributions
        .iter()
        .filter(|c| !c.developer.is_bot && c.time >= from && c.time < t)
        .map(|c| c.developer.canonical_key.as_str())
        .collect::<BTreeSet<_>>()
        .len()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreatedPlan {
    pub repo: String,
    pub action: String,
    pub phases: PhasePlan,
    pub placebos: PlaceboPlan,
}

/// Everything the statistics stage needs, in one reproducible document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyManifest {
    pub seed: u64,
    pub criteria: SelectionCriteria,
    pub treated: Vec<TreatedPlan>,
    pub matches: Vec<MatchedPair>,
    pub unmatched: Vec<Unmatched>,
    pub rejected: Vec<Rejection>,
    /// Treated repositories dropped during planning, with the reason.
    pub skipped: Vec<Rejection>,
}

impl StudyManifest {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }
}
