mod support;

use coedit_core::metrics::{bipartite_metrics, coedit_metrics, BipartiteMetricVector, MetricVector};
use proptest::prelude::*;
use support::oracles;

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9
}

fn directed_graph() -> impl Strategy<Value = (usize, Vec<(usize, usize, u64)>)> {
    (1usize..=12).prop_flat_map(|n| {
        let edges = prop::collection::vec((0..n, 0..n, 1u64..20), 0..(n * n).min(60));
        (Just(n), edges)
    })
}

fn bipartite_graph() -> impl Strategy<Value = (usize, usize, Vec<(usize, usize, u64)>)> {
    (0usize..=6, 0usize..=6).prop_flat_map(|(d, f)| {
        let edges = if d == 0 || f == 0 {
            Just(Vec::new()).boxed()
        } else {
            prop::collection::vec((0..d, 0..f, 1u64..10), 0..(d * f + 1)).boxed()
        };
        (Just(d), Just(f), edges)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn coedit_metrics_match_brute_force((n, edges) in directed_graph()) {
        let ours: MetricVector<f64> = coedit_metrics(&oracles::coedit_network(n, &edges));
        let want = oracles::coedit(n, &edges);
        prop_assert!(close(ours.avg_degree, want.avg_degree));
        prop_assert!(close(ours.avg_weighted_degree, want.avg_weighted_degree));
        prop_assert!(close(ours.density, want.density));
        prop_assert!(close(ours.algebraic_connectivity, want.lambda2), "{} vs {}", ours.algebraic_connectivity, want.lambda2);
        prop_assert!(close(ours.avg_clustering, want.avg_clustering));
        match (ours.degree_assortativity, want.assortativity) {
            (Some(a), Some(b)) => prop_assert!(close(a, b), "{a} vs {b}"),
            (None, None) => {}
            other => prop_assert!(false, "assortativity mismatch {:?}", other),
        }
        prop_assert!((0.0..=1.0).contains(&ours.density));
        prop_assert!((0.0..=1.0).contains(&ours.avg_clustering));
        prop_assert!(ours.algebraic_connectivity >= 0.0);
    }

    #[test]
    fn bipartite_metrics_match_brute_force((d, f, edges) in bipartite_graph()) {
        let ours: BipartiteMetricVector<f64> = bipartite_metrics(&oracles::bipartite_network(d, f, &edges));
        let want = oracles::bipartite(d, f, &edges);
        prop_assert!(close(ours.avg_degree_devs, want.avg_degree_devs));
        prop_assert!(close(ours.avg_degree_files, want.avg_degree_files));
        prop_assert!(close(ours.avg_weighted_degree_devs, want.avg_weighted_degree_devs));
        prop_assert!(close(ours.avg_weighted_degree_files, want.avg_weighted_degree_files));
        prop_assert!(close(ours.bipartite_density, want.density));
        prop_assert!((0.0..=1.0).contains(&ours.bipartite_density));
        prop_assert_eq!(ours.file_projection_components, want.components);
    }

    #[test]
    fn unweighted_metrics_are_scale_invariant((n, edges) in directed_graph(), k in 2u64..7) {
        let scaled: Vec<_> = edges.iter().map(|&(a, b, w)| (a, b, w * k)).collect();
        let a: MetricVector<f64> = coedit_metrics(&oracles::coedit_network(n, &edges));
        let b: MetricVector<f64> = coedit_metrics(&oracles::coedit_network(n, &scaled));
        prop_assert_eq!(a.avg_degree, b.avg_degree);
        prop_assert_eq!(a.density, b.density);
        prop_assert_eq!(a.algebraic_connectivity, b.algebraic_connectivity);
        prop_assert_eq!(a.avg_clustering, b.avg_clustering);
        prop_assert_eq!(a.degree_assortativity, b.degree_assortativity);
        prop_assert!(close(b.avg_weighted_degree, a.avg_weighted_degree * k as f64));
    }

    #[test]
    fn lambda2_positive_iff_connected((n, edges) in directed_graph()) {
        let net = oracles::coedit_network(n, &edges);
        let g = coedit_core::networks::symmetrize(&net);
        let l2: f64 = coedit_core::metrics::laplacian_lambda2(&g);
        prop_assert_eq!(l2 > 0.0, n >= 2 && g.is_connected());
    }

    #[test]
    fn f32_agrees_with_f64((n, edges) in directed_graph()) {
        let net = oracles::coedit_network(n, &edges);
        let a: MetricVector<f64> = coedit_metrics(&net);
        let b: MetricVector<f32> = coedit_metrics(&net);
        prop_assert!((a.algebraic_connectivity - b.algebraic_connectivity as f64).abs() < 1e-3);
        prop_assert!((a.avg_clustering - b.avg_clustering as f64).abs() < 1e-5);
    }
}
