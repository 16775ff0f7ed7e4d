//! Hypothesis tests for the inter- and intra-project comparisons.

mod adjust;
mod normality;
mod ranksum;
mod signedrank;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

pub use adjust::bh_adjust;
pub use normality::{paired_t_test, shapiro_wilk, welch_t_test, ShapiroWilk};
pub use ranksum::{cliffs_delta, mann_whitney_u};
pub use signedrank::wilcoxon_signed_rank;

/// Largest combined sample size for which exact enumeration is used.
pub const EXACT_LIMIT: usize = 12;

pub const FLAG_DEGENERATE: &str = "degenerate_sample";
pub const FLAG_DROPPED: &str = "dropped_undefined";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum StatsError {
    #[error("sample {0} is empty after dropping undefined values")]
    EmptySample(&'static str),
    #[error("all paired differences are zero")]
    AllZeroDifferences,
    #[error("need at least {need} placebo deltas, have {have}")]
    TooFewPlacebos { have: usize, need: usize },
    #[error("p-value {0} outside [0, 1]")]
    InvalidPValue(String),
    #[error("normality test needs at least 3 distinct values")]
    NotEnoughData,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    MannWhitneyU,
    WilcoxonSignedRank,
    PlaceboEmpirical,
    WelchT,
    PairedT,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::MannWhitneyU => "mann_whitney_u",
            Method::WilcoxonSignedRank => "wilcoxon_signed_rank",
            Method::PlaceboEmpirical => "placebo_empirical",
            Method::WelchT => "welch_t",
            Method::PairedT => "paired_t",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult<T> {
    pub metric_name: String,
    pub method: Method,
    pub statistic: T,
    pub p_value: T,
    /// The p-value as an exact fraction when it came from enumeration.
    pub p_exact: Option<Ratio<u64>>,
    pub n1: usize,
    pub n2: usize,
    /// Cliff's delta.
    pub effect_size: T,
    pub exact: bool,
    /// Values dropped before testing (undefined metrics or zero differences).
    pub dropped: usize,
    pub flags: Vec<String>,
}

impl<T: Scalar> TestResult<T> {
    pub fn with_metric(mut self, name: &str) -> Self {
        self.metric_name = name.to_string();
        self
    }
}

pub(crate) fn ratio_to<T: Scalar>(r: Ratio<u64>) -> T {
    T::lit(*r.numer() as f64) / T::lit(*r.denom() as f64)
}

/// Two-sided normal tail probability for |z|.
pub(crate) fn two_sided_normal<T: Scalar>(z: T) -> T {
    let z = z.abs().to_f64_lossy();
    T::lit(statrs::function::erf::erfc(z / std::f64::consts::SQRT_2).min(1.0))
}

/// Keeps finite values, returning them with the number dropped.
pub(crate) fn finite<T: Scalar>(xs: &[T]) -> (Vec<T>, usize) {
    let kept: Vec<T> = xs.iter().copied().filter(|x| x.is_finite()).collect();
    let dropped = xs.len() - kept.len();
    (kept, dropped)
}

/// Mid-ranks of `xs`, doubled so that they are integers.
pub(crate) fn doubled_midranks<T: Scalar>(xs: &[T]) -> Vec<u64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].partial_cmp(&xs[b]).unwrap_or(std::cmp::Ordering::Equal));
    let mut ranks = vec![0u64; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        // ranks i+1..=j+1 averaged, times two
        let doubled = (i + 1 + j + 1) as u64;
        for &k in &idx[i..=j] {
            ranks[k] = doubled;
        }
        i = j + 1;
    }
    ranks
}

/// Sum of t^3 - t over tie groups.
pub(crate) fn tie_term<T: Scalar>(xs: &[T]) -> f64 {
    let mut v: Vec<T> = xs.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let mut total = 0.0;
    let mut i = 0;
    while i < v.len() {
        let mut j = i;
        while j + 1 < v.len() && v[j + 1] == v[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        total += t * t * t - t;
        i = j + 1;
    }
    total
}

/// Inputs to a placebo comparison: metric changes at random time points and
/// the change around adoption.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaceboDistribution<T> {
    pub deltas: Vec<T>,
    pub observed: T,
}

pub const MIN_PLACEBOS: usize = 5;

/// Add-one empirical two-sided p-value: `(1 + #{|d| >= |obs|}) / (1 + k)`.
pub fn placebo_pvalue<T: Scalar>(d: &PlaceboDistribution<T>) -> Result<TestResult<T>, StatsError> {
    let (deltas, dropped) = finite(&d.deltas);
    if deltas.len() < MIN_PLACEBOS {
        return Err(StatsError::TooFewPlacebos { have: deltas.len(), need: MIN_PLACEBOS });
    }
    let obs = d.observed.abs();
    let tol = T::lit(1e-12) * obs.max(T::one());
    let at_least = deltas.iter().filter(|x| x.abs() >= obs - tol).count();
    let above = deltas.iter().filter(|x| x.abs() < obs - tol).count();
    let k = deltas.len();
    let p = Ratio::new(1 + at_least as u64, 1 + k as u64);
    let mut flags = Vec::new();
    if dropped > 0 {
        flags.push(FLAG_DROPPED.to_string());
    }
    Ok(TestResult {
        metric_name: String::new(),
        method: Method::PlaceboEmpirical,
        statistic: d.observed,
        p_value: ratio_to(p),
        p_exact: Some(p),
        n1: 1,
        n2: k,
        effect_size: (T::from_count(above) - T::from_count(deltas.iter().filter(|x| x.abs() > obs + tol).count()))
            / T::from_count(k),
        exact: false,
        dropped,
        flags,
    })
}

/// Switches to t-tests when every sample passes a Shapiro-Wilk check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TestPolicy {
    pub normality_check: bool,
    pub normality_alpha: f64,
}

impl Default for TestPolicy {
    fn default() -> Self {
        Self { normality_check: false, normality_alpha: 0.05 }
    }
}

fn looks_normal<T: Scalar>(xs: &[T], alpha: f64) -> bool {
    shapiro_wilk(xs).map(|r| r.p_value.to_f64_lossy() > alpha).unwrap_or(false)
}

/// Inter-project comparison under `policy`.
pub fn two_sample<T: Scalar>(a: &[T], b: &[T], policy: &TestPolicy) -> Result<TestResult<T>, StatsError> {
    if policy.normality_check {
        let (fa, _) = finite(a);
        let (fb, _) = finite(b);
        if looks_normal(&fa, policy.normality_alpha) && looks_normal(&fb, policy.normality_alpha) {
            return welch_t_test(a, b);
        }
    }
    mann_whitney_u(a, b)
}

/// Intra-project (paired) comparison under `policy`.
pub fn paired<T: Scalar>(pairs: &[(T, T)], policy: &TestPolicy) -> Result<TestResult<T>, StatsError> {
    if policy.normality_check {
        let diffs: Vec<T> = pairs
            .iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|(x, y)| *y - *x)
            .collect();
        if looks_normal(&diffs, policy.normality_alpha) {
            return paired_t_test(pairs);
        }
    }
    wilcoxon_signed_rank(pairs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn placebo_examples() {
        let r = placebo_pvalue::<f64>(&PlaceboDistribution { deltas: vec![1.0, -2.0, 0.0, 3.0, -1.0], observed: 10.0 }).unwrap();
        assert_eq!(r.p_exact, Some(Ratio::new(1, 6)));
        assert!((r.p_value - 1.0 / 6.0).abs() < 1e-15);
        assert_eq!(r.effect_size, 1.0);

        let r = placebo_pvalue(&PlaceboDistribution { deltas: vec![1.0, -2.0, 0.0, 3.0, -1.0], observed: 0.0 }).unwrap();
        assert_eq!(r.p_value, 1.0);

        let r = placebo_pvalue(&PlaceboDistribution { deltas: vec![1.0, -2.0, 0.5, 3.0, -1.0], observed: -3.0 }).unwrap();
        assert_eq!(r.p_exact, Some(Ratio::new(2, 6)));

        assert_eq!(
            placebo_pvalue(&PlaceboDistribution { deltas: vec![1.0; 4], observed: 1.0 }).unwrap_err(),
            StatsError::TooFewPlacebos { have: 4, need: 5 }
        );
    }

    #[test]
    fn midranks() {
        assert_eq!(doubled_midranks(&[3.0, 1.0, 3.0, 2.0]), vec![7, 2, 7, 4]);
        assert_eq!(tie_term(&[1.0, 1.0, 2.0, 2.0, 2.0]), 6.0 + 24.0);
    }

    #[test]
    fn policy_switches_to_t_tests() {
        let a = [2.1, 3.4, 1.9, 5.6, 4.4, 3.3, 2.8, 4.1, 3.9, 3.0, 2.5, 4.8];
        let b = [3.1, 4.4, 2.9, 6.6, 5.4, 4.3, 3.8, 5.1, 4.9, 4.0, 3.5, 5.8];
        let policy = TestPolicy { normality_check: true, ..Default::default() };
        assert_eq!(two_sample(&a, &b, &policy).unwrap().method, Method::WelchT);
        assert_eq!(two_sample(&a, &b, &TestPolicy::default()).unwrap().method, Method::MannWhitneyU);
        let skewed = [1.0, 1.0, 1.0, 2.0, 2.0, 3.0, 5.0, 8.0, 13.0, 21.0, 34.0, 55.0, 89.0, 144.0, 233.0];
        assert_eq!(two_sample(&a, &skewed, &policy).unwrap().method, Method::MannWhitneyU);
    }
}
