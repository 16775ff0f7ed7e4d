use num_rational::Ratio;

use super::{
    cliffs_delta, doubled_midranks, ratio_to, tie_term, two_sided_normal, Method, StatsError, TestResult,
    EXACT_LIMIT, FLAG_DROPPED,
};
use crate::scalar::Scalar;

/// Two-sided Wilcoxon signed-rank test on `(before, after)` pairs.
///
/// Differences are `after - before`; zero differences are dropped. The
/// statistic is W+, the rank sum of positive differences. Exact sign-flip
/// enumeration for up to 12 non-zero differences, else the tie-corrected
/// normal approximation with continuity correction.
pub fn wilcoxon_signed_rank<T: Scalar>(pairs: &[(T, T)]) -> Result<TestResult<T>, StatsError> {
    let defined: Vec<(T, T)> = pairs
        .iter()
        .copied()
        .filter(|(x, y)| x.is_finite() && y.is_finite())
        .collect();
    let undefined = pairs.len() - defined.len();
    let diffs: Vec<T> = defined.iter().map(|(x, y)| *y - *x).filter(|d| *d != T::zero()).collect();
    let zeros = defined.len() - diffs.len();
    if diffs.is_empty() {
        return Err(StatsError::AllZeroDifferences);
    }
    let n = diffs.len();
    let mags: Vec<T> = diffs.iter().map(|d| d.abs()).collect();
    let ranks = doubled_midranks(&mags);
    let w_doubled: u64 = diffs
        .iter()
        .zip(&ranks)
        .filter(|(d, _)| **d > T::zero())
        .map(|(_, r)| *r)
        .sum();
    let total: u64 = ranks.iter().sum();
    let before: Vec<T> = defined.iter().map(|p| p.0).collect();
    let after: Vec<T> = defined.iter().map(|p| p.1).collect();
    let mut flags = Vec::new();
    if undefined > 0 {
        flags.push(FLAG_DROPPED.to_string());
    }
    let base = TestResult {
        metric_name: String::new(),
        method: Method::WilcoxonSignedRank,
        statistic: T::lit(w_doubled as f64 / 2.0),
        p_value: T::one(),
        p_exact: None,
        n1: n,
        n2: n,
        effect_size: cliffs_delta(&after, &before),
        exact: false,
        dropped: undefined + zeros,
        flags,
    };

    if n <= EXACT_LIMIT {
        let dev = |w: u64| (2 * w as i64 - total as i64).abs();
        let observed = dev(w_doubled);
        let mut hits = 0u64;
        for mask in 0u32..(1u32 << n) {
            let w: u64 = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| ranks[i]).sum();
            if dev(w) >= observed {
                hits += 1;
            }
        }
        let p = Ratio::new(hits, 1u64 << n);
        return Ok(TestResult { p_value: ratio_to(p), p_exact: Some(p), exact: true, ..base });
    }

    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term(&mags) / 48.0;
    let p = if var <= 0.0 {
        T::one()
    } else {
        let z = ((w_doubled as f64 / 2.0 - mean).abs() - 0.5).max(0.0) / var.sqrt();
        two_sided_normal(T::lit(z))
    };
    Ok(TestResult { p_value: p, ..base })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn from_diffs(d: &[f64]) -> Vec<(f64, f64)> {
        d.iter().map(|&x| (0.0, x)).collect()
    }

    #[test]
    fn all_positive_three() {
        let r = wilcoxon_signed_rank(&from_diffs(&[1.0, 2.0, 3.0])).unwrap();
        assert_eq!(r.statistic, 6.0);
        assert_eq!(r.p_exact, Some(Ratio::new(2, 8)));
        assert_eq!(r.p_value, 0.25);
    }

    #[test]
    fn tied_magnitudes_cancel() {
        let r = wilcoxon_signed_rank(&from_diffs(&[1.0, -1.0])).unwrap();
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn zero_differences() {
        assert_eq!(
            wilcoxon_signed_rank(&[(1.0, 1.0), (2.0, 2.0)]).unwrap_err(),
            StatsError::AllZeroDifferences
        );
        let r = wilcoxon_signed_rank(&[(1.0, 1.0), (0.0, 2.0), (0.0, 3.0)]).unwrap();
        assert_eq!((r.n1, r.dropped), (2, 1));
    }

    #[test]
    fn normal_approximation_matches_reference() {
        let d = [0.5, -1.2, 2.3, 3.1, -0.4, 1.8, 2.2, 2.2, 4.0, -2.5, 1.1, 0.9, 3.3, 2.7, -0.6, 1.5];
        let r = wilcoxon_signed_rank(&from_diffs(&d)).unwrap();
        assert_eq!(r.statistic, 114.0);
        // scipy.stats.wilcoxon(d, correction=True, method="approx")
        assert!((r.p_value - 0.018615510565226506).abs() < 1e-10);
    }
}
