use chrono::{DateTime, Duration, TimeZone, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::StudyError;
use crate::networks::TimeWindow;

/// Half-width of the excluded region around adoption.
pub const EXCLUSION_DAYS: i64 = 15;
/// Length of each observation phase.
pub const PHASE_DAYS: i64 = 183;
/// Distance from a time point to the far end of its phases.
pub const REACH_DAYS: i64 = EXCLUSION_DAYS + PHASE_DAYS;
pub const MAX_PLACEBO_ATTEMPTS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhasePlan {
    pub t_ga: DateTime<Utc>,
    pub exclusion: TimeWindow,
    pub phase1: TimeWindow,
    pub phase2: TimeWindow,
}

impl PhasePlan {
    pub fn lengths(&self) -> PhaseLengths {
        PhaseLengths {
            exclusion_days: (self.phase2.start - self.t_ga).num_days(),
            phase_days: (self.phase2.end - self.phase2.start).num_days(),
        }
    }
}

/// Day counts defining the windows around a time point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PhaseLengths {
    pub exclusion_days: i64,
    pub phase_days: i64,
}

impl Default for PhaseLengths {
    fn default() -> Self {
        Self { exclusion_days: EXCLUSION_DAYS, phase_days: PHASE_DAYS }
    }
}

impl PhaseLengths {
    pub fn reach(&self) -> Duration {
        Duration::days(self.exclusion_days + self.phase_days)
    }
}

impl PhasePlan {
    /// Default windows around `t` with no history check.
    pub fn around(t: DateTime<Utc>) -> Self {
        Self::around_with(t, PhaseLengths::default())
    }

    pub fn around_with(t: DateTime<Utc>, lengths: PhaseLengths) -> Self {
        let excl = Duration::days(lengths.exclusion_days);
        let phase = Duration::days(lengths.phase_days);
        PhasePlan {
            t_ga: t,
            exclusion: TimeWindow { start: t - excl, end: t + excl },
            phase1: TimeWindow { start: t - excl - phase, end: t - excl },
            phase2: TimeWindow { start: t + excl, end: t + excl + phase },
        }
    }
}

/// Phase windows around adoption; `history` must contain both phases.
pub fn plan_phases(t_ga: DateTime<Utc>, history: TimeWindow) -> Result<PhasePlan, StudyError> {
    plan_phases_with(t_ga, history, PhaseLengths::default())
}

pub fn plan_phases_with(t_ga: DateTime<Utc>, history: TimeWindow, lengths: PhaseLengths) -> Result<PhasePlan, StudyError> {
    let plan = PhasePlan::around_with(t_ga, lengths);
    if plan.phase1.start < history.start || plan.phase2.end > history.end {
        return Err(StudyError::InsufficientHistory {
            t_ga,
            history_start: history.start,
            history_end: history.end,
        });
    }
    Ok(plan)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlaceboPlan {
    /// Ascending.
    pub timepoints: Vec<DateTime<Utc>>,
    pub seed: u64,
    /// Fewer than the requested number could be drawn.
    pub shortfall: bool,
}

impl PlaceboPlan {
    pub fn phase_plans(&self, lengths: PhaseLengths) -> Vec<PhasePlan> {
        self.timepoints.iter().map(|t| PhasePlan::around_with(*t, lengths)).collect()
    }
}

/// Draws up to `k` placebo time points uniformly (to the second) from the
/// part of `history` where a time point's own phases fit and do not touch
/// the adoption's phases.
pub fn draw_placebos(plan: &PhasePlan, history: TimeWindow, k: usize, seed: u64) -> Result<PlaceboPlan, StudyError> {
    let reach = plan.lengths().reach();
    let lo = (history.start + reach).timestamp();
    let hi = (history.end - reach).timestamp();
    let t = plan.t_ga.timestamp();
    let gap = 2 * reach.num_seconds();
    let feasible = |x: i64| (x - t).abs() > gap;
    let any_feasible = lo <= hi && (feasible(lo) || feasible(hi));
    if !any_feasible {
        return Err(StudyError::NoFeasiblePlacebo { t_ga: plan.t_ga });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = Vec::with_capacity(k);
    let mut attempts = 0;
    while picked.len() < k && attempts < MAX_PLACEBO_ATTEMPTS {
        attempts += 1;
        let x = rng.gen_range(lo..=hi);
        if feasible(x) {
            picked.push(Utc.timestamp_opt(x, 0).single().expect("in range"));
        }
    }
    if picked.is_empty() {
        return Err(StudyError::NoFeasiblePlacebo { t_ga: plan.t_ga });
    }
    picked.sort();
    Ok(PlaceboPlan { shortfall: picked.len() < k, timepoints: picked, seed })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn day(y: i32, m: u32, d: u32) -> DateTime<Utc> {
        Utc.with_ymd_and_hms(y, m, d, 0, 0, 0).unwrap()
    }

    #[test]
    fn windows_for_july_first() {
        let t = day(2021, 7, 1);
        let p = plan_phases(t, TimeWindow { start: day(2015, 1, 1), end: day(2025, 1, 1) }).unwrap();
        assert_eq!(p.phase1.start, day(2020, 12, 15));
        assert_eq!(p.phase1.end, day(2021, 6, 16));
        assert_eq!(p.phase2.start, day(2021, 7, 16));
        assert_eq!(p.phase2.end, day(2022, 1, 15));
    }

    #[test]
    fn history_bounds() {
        let t = day(2021, 7, 1);
        let short = TimeWindow { start: day(2021, 5, 1), end: day(2025, 1, 1) };
        assert!(matches!(plan_phases(t, short), Err(StudyError::InsufficientHistory { .. })));
        let reach = Duration::days(REACH_DAYS);
        let exact = TimeWindow { start: t - reach, end: t + reach };
        assert!(plan_phases(t, exact).is_ok());
        let shy = TimeWindow { start: t - reach + Duration::seconds(1), end: t + reach };
        assert!(plan_phases(t, shy).is_err());
    }

    #[test]
    fn placebos_in_long_history() {
        let history = TimeWindow { start: day(2017, 1, 1), end: day(2022, 1, 1) };
        let mid = history.start + (history.end - history.start) / 2;
        let plan = plan_phases(mid, history).unwrap();
        let a = draw_placebos(&plan, history, 20, 7).unwrap();
        assert_eq!(a.timepoints.len(), 20);
        assert!(!a.shortfall);
        let reach = Duration::days(REACH_DAYS);
        for t in &a.timepoints {
            assert!(*t - reach >= history.start && *t + reach <= history.end);
            assert!((*t - mid).num_seconds().abs() > 2 * reach.num_seconds());
        }
        assert_eq!(a, draw_placebos(&plan, history, 20, 7).unwrap());
        assert_ne!(a.timepoints, draw_placebos(&plan, history, 20, 8).unwrap().timepoints);
    }

    #[test]
    fn adoption_window_only() {
        let t = day(2021, 7, 1);
        let reach = Duration::days(REACH_DAYS);
        let history = TimeWindow { start: t - reach, end: t + reach };
        let plan = plan_phases(t, history).unwrap();
        assert!(matches!(draw_placebos(&plan, history, 20, 1), Err(StudyError::NoFeasiblePlacebo { .. })));
    }
}
