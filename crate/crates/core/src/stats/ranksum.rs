use num_rational::Ratio;

use super::{
    doubled_midranks, finite, ratio_to, tie_term, two_sided_normal, Method, StatsError, TestResult,
    EXACT_LIMIT, FLAG_DEGENERATE, FLAG_DROPPED,
};
use crate::scalar::Scalar;

/// Cliff's delta: P(a > b) - P(a < b) over all cross pairs.
pub fn cliffs_delta<T: Scalar>(a: &[T], b: &[T]) -> T {
    if a.is_empty() || b.is_empty() {
        return T::zero();
    }
    let mut dom: i64 = 0;
    for x in a {
        for y in b {
            if x > y {
                dom += 1;
            } else if x < y {
                dom -= 1;
            }
        }
    }
    T::lit(dom as f64) / T::from_count(a.len() * b.len())
}

/// Two-sided Mann-Whitney U test; `statistic` is U for sample `a`.
///
/// Exact permutation enumeration (mid-ranks) when `|a| + |b| <= 12`,
/// otherwise the tie-corrected normal approximation with continuity correction.
/// Non-finite values are treated as undefined and dropped.
pub fn mann_whitney_u<T: Scalar>(a: &[T], b: &[T]) -> Result<TestResult<T>, StatsError> {
    let (a, da) = finite(a);
    let (b, db) = finite(b);
    if a.is_empty() {
        return Err(StatsError::EmptySample("a"));
    }
    if b.is_empty() {
        return Err(StatsError::EmptySample("b"));
    }
    let (n1, n2) = (a.len(), b.len());
    let n = n1 + n2;
    let pooled: Vec<T> = a.iter().chain(b.iter()).copied().collect();
    let ranks = doubled_midranks(&pooled);
    let r1_doubled: u64 = ranks[..n1].iter().sum();
    // 2U = 2R1 - n1(n1+1)
    let u_doubled = r1_doubled as i64 - (n1 * (n1 + 1)) as i64;
    let u = T::lit(u_doubled as f64 / 2.0);
    let mut flags = Vec::new();
    if da + db > 0 {
        flags.push(FLAG_DROPPED.to_string());
    }
    let base = TestResult {
        metric_name: String::new(),
        method: Method::MannWhitneyU,
        statistic: u,
        p_value: T::one(),
        p_exact: None,
        n1,
        n2,
        effect_size: cliffs_delta(&a, &b),
        exact: false,
        dropped: da + db,
        flags,
    };

    if pooled.iter().all(|x| *x == pooled[0]) {
        let mut r = base;
        r.flags.push(FLAG_DEGENERATE.to_string());
        return Ok(r);
    }

    if n <= EXACT_LIMIT {
        // Compare |2R - E[2R]| on doubled ranks: E[2R] * 2 = n1 * sum(2r) / n * 2.
        let total: u64 = ranks.iter().sum();
        let dev = |r_doubled: u64| ((n as i64) * r_doubled as i64 - (n1 as i64) * total as i64).abs();
        let observed = dev(r1_doubled);
        let (mut hits, mut all) = (0u64, 0u64);
        for mask in 0u32..(1u32 << n) {
            if mask.count_ones() as usize != n1 {
                continue;
            }
            all += 1;
            let r: u64 = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| ranks[i]).sum();
            if dev(r) >= observed {
                hits += 1;
            }
        }
        let p = Ratio::new(hits, all);
        return Ok(TestResult { p_value: ratio_to(p), p_exact: Some(p), exact: true, ..base });
    }

    let (n1f, n2f, nf) = (n1 as f64, n2 as f64, n as f64);
    let mean = n1f * n2f / 2.0;
    let var = n1f * n2f / 12.0 * ((nf + 1.0) - tie_term(&pooled) / (nf * (nf - 1.0)));
    let p = if var <= 0.0 {
        T::one()
    } else {
        let z = ((u_doubled as f64 / 2.0 - mean).abs() - 0.5).max(0.0) / var.sqrt();
        two_sided_normal(T::lit(z))
    };
    Ok(TestResult { p_value: p, ..base })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separated_pair() {
        let r = mann_whitney_u(&[1.0, 2.0], &[3.0, 4.0]).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_exact, Some(Ratio::new(2, 6)));
        assert!(r.exact);
        assert_eq!(r.effect_size, -1.0);
    }

    #[test]
    fn identical_samples_are_degenerate() {
        let r = mann_whitney_u(&[5.0, 5.0, 5.0], &[5.0, 5.0, 5.0]).unwrap();
        assert_eq!(r.p_value, 1.0);
        assert!(r.flags.iter().any(|f| f == FLAG_DEGENERATE));
        assert_eq!(r.effect_size, 0.0);
    }

    #[test]
    fn large_shift_is_significant() {
        let b: Vec<f64> = (0..30).map(|i| i as f64).collect();
        let a: Vec<f64> = b.iter().map(|x| x + 1000.0).collect();
        let r = mann_whitney_u(&a, &b).unwrap();
        assert!(!r.exact);
        assert_eq!(r.statistic, 900.0);
        // scipy.stats.mannwhitneyu(a, b, method="asymptotic")
        assert!((r.p_value - 3.019859359162157e-11).abs() < 1e-15);
        assert!(r.p_value < 0.001);
        assert_eq!(r.effect_size, 1.0);
    }

    #[test]
    fn normal_approximation_with_ties_matches_reference() {
        let a: [f64; 14] = [1.5, 2.0, 2.0, 3.0, 4.5, 6.0, 7.0, 7.0, 8.0, 9.0, 10.0, 11.0, 12.0, 13.0];
        let b = [3.0, 4.0, 4.0, 5.0, 6.5, 8.0, 9.0, 9.0, 11.0, 14.0, 15.0, 16.0, 17.0, 18.0, 20.0];
        let r = mann_whitney_u(&a, &b).unwrap();
        // scipy.stats.mannwhitneyu(..., method="asymptotic", use_continuity=True)
        assert_eq!(r.statistic, 64.5);
        assert!((r.p_value - 0.08048185896611995).abs() < 1e-10, "{}", r.p_value);
    }

    #[test]
    fn undefined_values_are_dropped() {
        let r = mann_whitney_u(&[1.0, f64::NAN], &[3.0, 4.0]).unwrap();
        assert_eq!((r.n1, r.dropped), (1, 1));
        assert_eq!(mann_whitney_u(&[f64::NAN], &[1.0]).unwrap_err(), StatsError::EmptySample("a"));
    }

    #[test]
    fn symmetric_in_arguments() {
        let a = [1.0, 4.0, 4.0, 9.0];
        let b = [2.0, 3.0, 7.0, 8.0, 10.0];
        assert_eq!(mann_whitney_u(&a, &b).unwrap().p_value, mann_whitney_u(&b, &a).unwrap().p_value);
    }
}
