mod support;

use chrono::{DateTime, Duration, TimeZone, Utc};
use coedit_core::networks::TimeWindow;
use coedit_core::study::{
    draw_placebos, match_controls, plan_phases, RepoProfile, UnmatchedReason, REACH_DAYS,
};
use proptest::prelude::*;
use support::date_oracle;

fn midnight(day: i64) -> DateTime<Utc> {
    Utc.timestamp_opt(day * 86_400, 0).unwrap()
}

fn wide() -> TimeWindow {
    TimeWindow { start: midnight(-20_000), end: midnight(40_000) }
}

fn repo(name: &str, lang: &str, contributors: u64, commits: u64, prs: u64, age_days: i64) -> RepoProfile {
    let created = Utc.with_ymd_and_hms(2016, 1, 1, 0, 0, 0).unwrap();
    RepoProfile {
        full_name: name.into(),
        primary_language: lang.into(),
        stars: 100,
        contributors,
        commits,
        pull_requests: prs,
        is_fork: false,
        created_at: created,
        last_commit_at: created + Duration::days(age_days),
    }
}

#[test]
fn july_first_matches_date_oracle() {
    let day = date_oracle::days_from_civil(2021, 7, 1);
    assert_eq!(date_oracle::phases(day), ["2020-12-15", "2021-06-16", "2021-07-16", "2022-01-15"]);
    let p = plan_phases(midnight(day), wide()).unwrap();
    let got = [p.phase1.start, p.phase1.end, p.phase2.start, p.phase2.end].map(|t| t.format("%Y-%m-%d").to_string());
    assert_eq!(got, date_oracle::phases(day));
}

proptest! {
    #[test]
    fn phases_agree_with_oracle(day in -10_000i64..30_000, offset in 0i64..86_400) {
        let t = midnight(day) + Duration::seconds(offset);
        let p = plan_phases(t, wide()).unwrap();
        let got = [p.phase1.start, p.phase1.end, p.phase2.start, p.phase2.end].map(|t| t.format("%Y-%m-%d").to_string());
        prop_assert_eq!(got, date_oracle::phases(day));
        prop_assert!(p.phase1.end <= p.exclusion.start && p.exclusion.end <= p.phase2.start);
        prop_assert_eq!(p.phase1.end - p.phase1.start, Duration::days(183));
        prop_assert_eq!(p.phase2.end - p.phase2.start, Duration::days(183));
    }

    #[test]
    fn placebo_windows_stay_clear(len_days in 800i64..4000, frac in 0.0f64..1.0, seed in any::<u64>()) {
        let history = TimeWindow { start: midnight(10_000), end: midnight(10_000 + len_days) };
        let lo = 10_000 + REACH_DAYS;
        let hi = 10_000 + len_days - REACH_DAYS;
        let t = midnight(lo + ((hi - lo) as f64 * frac) as i64);
        let plan = plan_phases(t, history).unwrap();
        if let Ok(pp) = draw_placebos(&plan, history, 20, seed) {
            let reach = Duration::days(REACH_DAYS);
            for r in &pp.timepoints {
                prop_assert!(*r - reach >= history.start && *r + reach <= history.end);
                // closed windows [r - reach, r + reach] and [t - reach, t + reach] are disjoint
                prop_assert!(*r + reach < t - reach || *r - reach > t + reach);
            }
            prop_assert!(pp.timepoints.len() <= 20);
            prop_assert_eq!(pp.shortfall, pp.timepoints.len() < 20);
        }
    }

    #[test]
    fn matching_is_partial_injection(
        treated in prop::collection::vec((0usize..3, 1u64..50, 1u64..5000, 0u64..300, 100i64..3000), 0..12),
        pool in prop::collection::vec((0usize..3, 1u64..50, 1u64..5000, 0u64..300, 100i64..3000), 0..20),
        seed in any::<u64>(),
    ) {
        let langs = ["Rust", "Go", "C"];
        let mk = |prefix: &str, v: &[(usize, u64, u64, u64, i64)]| -> Vec<RepoProfile> {
            v.iter().enumerate().map(|(i, &(l, c, k, p, a))| repo(&format!("{prefix}/{i}"), langs[l], c, k, p, a)).collect()
        };
        let t = mk("t", &treated);
        let p = mk("p", &pool);
        let out = match_controls(&t, &p, seed);
        let mut used = std::collections::BTreeSet::new();
        for pair in &out.pairs {
            prop_assert!(used.insert(pair.control.full_name.clone()));
            prop_assert_eq!(&pair.treated.primary_language, &pair.control.primary_language);
            prop_assert!(pair.distance >= 0.0 && pair.distance <= 1.0);
        }
        prop_assert_eq!(out.pairs.len() + out.unmatched.len(), t.len());
        prop_assert_eq!(out, match_controls(&t, &p, seed));
    }
}

#[test]
fn identical_profile_matches_at_zero() {
    let t = repo("t/a", "Rust", 10, 500, 40, 1000);
    let mut twin = t.clone();
    twin.full_name = "p/twin".into();
    let other = repo("p/other", "Rust", 40, 9000, 900, 3000);
    let out = match_controls(&[t], &[other, twin], 1);
    assert_eq!(out.pairs[0].control.full_name, "p/twin");
    assert_eq!(out.pairs[0].distance, 0.0);
}

#[test]
fn empty_stratum_is_reported() {
    let out = match_controls(&[repo("t/x", "Haskell", 5, 100, 5, 500)], &[repo("p/y", "Go", 5, 100, 5, 500)], 3);
    assert!(out.pairs.is_empty());
    assert_eq!(out.unmatched[0].reason, UnmatchedReason::StratumEmpty);
    assert_eq!(out.empty_strata, ["Haskell"]);
}

#[test]
fn closer_pair_wins_the_contested_control() {
    // Both treated repos are nearest to p/1; t/1 is closer, so t/2 falls
    // back to p/2. Far-away fillers widen the z-score scale.
    let t1 = repo("t/1", "Rust", 5, 100, 10, 1000);
    let t2 = repo("t/2", "Rust", 5, 120, 10, 1000);
    let p1 = repo("p/1", "Rust", 5, 101, 10, 1000);
    let p2 = repo("p/2", "Rust", 5, 150, 10, 1000);
    let lo = repo("p/lo", "Rust", 5, 5, 10, 1000);
    let hi = repo("p/hi", "Rust", 5, 50_000, 10, 1000);
    for seed in 0..5 {
        let out = match_controls(&[t2.clone(), t1.clone()], &[lo.clone(), p2.clone(), p1.clone(), hi.clone()], seed);
        let by: std::collections::BTreeMap<_, _> =
            out.pairs.iter().map(|p| (p.treated.full_name.as_str(), p.control.full_name.as_str())).collect();
        assert_eq!(by["t/1"], "p/1");
        assert_eq!(by["t/2"], "p/2");
    }
}
