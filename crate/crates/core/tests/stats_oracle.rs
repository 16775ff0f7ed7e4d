mod support;

use coedit_core::stats::{
    bh_adjust, cliffs_delta, mann_whitney_u, placebo_pvalue, wilcoxon_signed_rank, PlaceboDistribution,
};
use num_rational::Ratio;
use proptest::prelude::*;
use support::stats_oracles as oracle;

// Small integer grid so ties are common.
fn sample(max: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec((-4i32..5).prop_map(|v| v as f64 / 2.0), 1..=max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn mann_whitney_matches_enumeration(a in sample(7), b in sample(7)) {
        prop_assume!(a.len() + b.len() <= 8);
        let r = mann_whitney_u(&a, &b).unwrap();
        let (hits, total) = oracle::mwu_exact(&a, &b);
        prop_assert!(r.exact || r.flags.iter().any(|f| f == "degenerate_sample"));
        if r.exact {
            prop_assert_eq!(r.p_exact, Some(Ratio::new(hits, total)));
        } else {
            prop_assert_eq!(hits, total);
        }
        let mirrored = mann_whitney_u(&b, &a).unwrap();
        prop_assert_eq!(r.p_value, mirrored.p_value);
        prop_assert!((0.0..=1.0).contains(&r.p_value));
    }

    #[test]
    fn wilcoxon_matches_enumeration(d in sample(8)) {
        let pairs: Vec<(f64, f64)> = d.iter().map(|x| (1.0, 1.0 + x)).collect();
        match wilcoxon_signed_rank(&pairs) {
            Ok(r) => {
                let (hits, total) = oracle::wilcoxon_exact(&d);
                prop_assert!(r.exact);
                prop_assert_eq!(r.p_exact, Some(Ratio::new(hits, total)));
                prop_assert!((0.0..=1.0).contains(&r.p_value));
            }
            Err(_) => prop_assert!(d.iter().all(|x| *x == 0.0)),
        }
    }

    #[test]
    fn bh_matches_textbook(p in prop::collection::vec(0.0f64..=1.0, 1..15)) {
        let ours = bh_adjust(&p).unwrap();
        for (x, y) in ours.iter().zip(oracle::bh(&p)) {
            prop_assert!((x - y).abs() < 1e-12);
        }
        for (adj, raw) in ours.iter().zip(&p) {
            prop_assert!(*adj >= raw - 1e-15 && *adj <= 1.0);
        }
    }

    #[test]
    fn placebo_p_is_bounded(deltas in prop::collection::vec(-10.0f64..10.0, 5..40), observed in -12.0f64..12.0) {
        let k = deltas.len() as f64;
        let r = placebo_pvalue(&PlaceboDistribution { deltas, observed }).unwrap();
        prop_assert!(r.p_value >= 1.0 / (k + 1.0) - 1e-15 && r.p_value <= 1.0);
    }

    #[test]
    fn cliffs_delta_extremes(a in prop::collection::vec(0.0f64..10.0, 1..10), shift in 10.5f64..100.0) {
        prop_assert_eq!(cliffs_delta(&a, &a), 0.0);
        let b: Vec<f64> = a.iter().map(|x| x + shift).collect();
        prop_assert_eq!(cliffs_delta(&b, &a), 1.0);
        prop_assert_eq!(cliffs_delta(&a, &b), -1.0);
    }
}

#[test]
fn worked_examples_are_exact() {
    let r = mann_whitney_u(&[1.0, 2.0], &[3.0, 4.0]).unwrap();
    assert_eq!(r.p_exact, Some(Ratio::new(1, 3)));
    assert_eq!(oracle::mwu_exact(&[1.0, 2.0], &[3.0, 4.0]), (2, 6));
    let r = wilcoxon_signed_rank(&[(0.0, 1.0), (0.0, 2.0), (0.0, 3.0)]).unwrap();
    assert_eq!(r.statistic, 6.0);
    assert_eq!(r.p_exact, Some(Ratio::new(1, 4)));
    assert_eq!(oracle::wilcoxon_exact(&[1.0, 2.0, 3.0]), (2, 8));
    assert_eq!(oracle::wilcoxon_exact(&[1.0, -1.0]), (4, 4));
}

#[test]
fn f32_agrees_with_f64() {
    let a = [1.5f32, 2.0, 7.25, 3.0, 9.5];
    let b = [4.0f32, 2.0, 8.0, 8.5];
    let r32 = mann_whitney_u(&a, &b).unwrap();
    let a64: Vec<f64> = a.iter().map(|&x| x as f64).collect();
    let b64: Vec<f64> = b.iter().map(|&x| x as f64).collect();
    let r64 = mann_whitney_u(&a64, &b64).unwrap();
    assert_eq!(r32.p_exact, r64.p_exact);
    assert!((r32.p_value as f64 - r64.p_value).abs() < 1e-6);
}
