//! Network-level metrics for co-editing and contribution networks.

mod eigen;

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::networks::{project_to_files, symmetrize, BipartiteNetwork, CoEditNetwork, SimpleGraph};
use crate::scalar::Scalar;

pub use eigen::symmetric_eigenvalues;

/// Eigenvalues below this are treated as zero.
pub const EIGEN_TOLERANCE: f64 = 1e-9;

/// Column order used for metric CSV rows, after the row key columns.
pub const METRIC_COLUMNS: [&str; 8] = [
    "n_nodes",
    "n_edges",
    "avg_degree",
    "avg_weighted_degree",
    "density",
    "algebraic_connectivity",
    "avg_clustering",
    "degree_assortativity",
];

pub const BIPARTITE_COLUMNS: [&str; 6] = [
    "avg_degree_devs",
    "avg_degree_files",
    "avg_weighted_degree_devs",
    "avg_weighted_degree_files",
    "bipartite_density",
    "file_projection_components",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricVector<T> {
    pub avg_degree: T,
    pub avg_weighted_degree: T,
    pub density: T,
    pub algebraic_connectivity: T,
    pub avg_clustering: T,
    /// `None` when endpoint degrees have no variance.
    pub degree_assortativity: Option<T>,
    pub n_nodes: usize,
    /// Directed edge count.
    pub n_edges: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BipartiteMetricVector<T> {
    pub avg_degree_devs: T,
    pub avg_degree_files: T,
    pub avg_weighted_degree_devs: T,
    pub avg_weighted_degree_files: T,
    pub bipartite_density: T,
    pub file_projection_components: usize,
}

impl<T: Scalar> MetricVector<T> {
    /// Value by metric name, as used in result tables.
    pub fn get(&self, name: &str) -> Option<T> {
        match name {
            "n_nodes" => Some(T::from_count(self.n_nodes)),
            "n_edges" => Some(T::from_count(self.n_edges)),
            "avg_degree" => Some(self.avg_degree),
            "avg_weighted_degree" => Some(self.avg_weighted_degree),
            "density" => Some(self.density),
            "algebraic_connectivity" => Some(self.algebraic_connectivity),
            "avg_clustering" => Some(self.avg_clustering),
            "degree_assortativity" => self.degree_assortativity,
            _ => None,
        }
    }

    /// The six tested co-editing metrics.
    pub const TESTED: [&'static str; 6] = [
        "avg_degree",
        "avg_weighted_degree",
        "density",
        "algebraic_connectivity",
        "avg_clustering",
        "degree_assortativity",
    ];

    pub fn csv_fields(&self) -> Vec<String> {
        METRIC_COLUMNS
            .iter()
            .map(|c| match *c {
                "n_nodes" => self.n_nodes.to_string(),
                "n_edges" => self.n_edges.to_string(),
                other => self.get(other).map(fmt_real).unwrap_or_else(|| "NA".into()),
            })
            .collect()
    }
}

impl<T: Scalar> BipartiteMetricVector<T> {
    pub fn get(&self, name: &str) -> Option<T> {
        match name {
            "avg_degree_devs" => Some(self.avg_degree_devs),
            "avg_degree_files" => Some(self.avg_degree_files),
            "avg_weighted_degree_devs" => Some(self.avg_weighted_degree_devs),
            "avg_weighted_degree_files" => Some(self.avg_weighted_degree_files),
            "bipartite_density" => Some(self.bipartite_density),
            "file_projection_components" => Some(T::from_count(self.file_projection_components)),
            _ => None,
        }
    }

    pub const TESTED: [&'static str; 6] = BIPARTITE_COLUMNS;

    pub fn csv_fields(&self) -> Vec<String> {
        BIPARTITE_COLUMNS
            .iter()
            .map(|c| match *c {
                "file_projection_components" => self.file_projection_components.to_string(),
                other => self.get(other).map(fmt_real).unwrap_or_else(|| "NA".into()),
            })
            .collect()
    }
}

/// Fixed-precision rendering so result files are byte-stable.
pub fn fmt_real<T: Scalar>(v: T) -> String {
    let x = v.to_f64_lossy();
    if x == 0.0 {
        return "0".into();
    }
    let s = format!("{x:.12}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.to_string() }
}

fn ratio<T: Scalar>(num: T, den: usize) -> T {
    if den == 0 { T::zero() } else { num / T::from_count(den) }
}

/// Second-smallest eigenvalue of the unweighted Laplacian `D - A`.
pub fn laplacian_lambda2<T: Scalar>(g: &SimpleGraph) -> T {
    let n = g.node_count();
    if n <= 1 || !g.is_connected() {
        return T::zero();
    }
    let mut l = vec![T::zero(); n * n];
    let deg = g.degrees();
    for (i, &d) in deg.iter().enumerate() {
        l[i * n + i] = T::from_count(d);
    }
    for &(u, v) in g.edges.keys() {
        l[u * n + v] = -T::one();
        l[v * n + u] = -T::one();
    }
    let ev = symmetric_eigenvalues(l, n);
    let max_deg = deg.iter().copied().max().unwrap_or(0).max(1);
    let tol = T::lit(EIGEN_TOLERANCE).max(T::epsilon() * T::from_count(16 * n * max_deg));
    if ev[1] < tol { T::zero() } else { ev[1] }
}

/// Mean local clustering coefficient; nodes of degree below two contribute zero.
pub fn average_clustering<T: Scalar>(g: &SimpleGraph) -> T {
    let n = g.node_count();
    if n == 0 {
        return T::zero();
    }
    let adj = g.neighbors();
    let sets: Vec<HashSet<usize>> = adj.iter().map(|a| a.iter().copied().collect()).collect();
    let total: T = adj
        .iter()
        .map(|nb| {
            let k = nb.len();
            if k < 2 {
                return T::zero();
            }
            let mut links = 0usize;
            for (i, &a) in nb.iter().enumerate() {
                links += nb[i + 1..].iter().filter(|b| sets[a].contains(b)).count();
            }
            T::from_count(2 * links) / T::from_count(k * (k - 1))
        })
        .sum();
    total / T::from_count(n)
}

/// Pearson correlation of endpoint degrees over undirected edges, each
/// edge counted in both orientations.
pub fn degree_assortativity<T: Scalar>(g: &SimpleGraph) -> Option<T> {
    if g.edge_count() == 0 {
        return None;
    }
    let deg = g.degrees();
    let m2 = T::from_count(2 * g.edge_count());
    let mean: T = g
        .edges
        .keys()
        .map(|&(u, v)| T::from_count(deg[u] + deg[v]))
        .sum::<T>()
        / m2;
    let (mut cov, mut var) = (T::zero(), T::zero());
    for &(u, v) in g.edges.keys() {
        let (x, y) = (T::from_count(deg[u]) - mean, T::from_count(deg[v]) - mean);
        cov = cov + x * y + y * x;
        var = var + x * x + y * y;
    }
    if var <= T::epsilon() * m2 {
        return None;
    }
    Some((cov / var).max(-T::one()).min(T::one()))
}

pub fn coedit_metrics<T: Scalar>(n: &CoEditNetwork) -> MetricVector<T> {
    let g = symmetrize(n);
    let nodes = g.node_count();
    let total_weight: u64 = g.edges.values().sum();
    let m_dir = n.edges.len();
    let density = if nodes <= 1 {
        T::zero()
    } else {
        T::from_count(m_dir) / T::from_count(nodes * (nodes - 1))
    };
    MetricVector {
        avg_degree: ratio(T::from_count(2 * g.edge_count()), nodes),
        avg_weighted_degree: ratio(T::lit(2.0) * T::lit(total_weight as f64), nodes),
        density,
        algebraic_connectivity: laplacian_lambda2(&g),
        avg_clustering: average_clustering(&g),
        degree_assortativity: degree_assortativity(&g),
        n_nodes: nodes,
        n_edges: m_dir,
    }
}

pub fn bipartite_metrics<T: Scalar>(b: &BipartiteNetwork) -> BipartiteMetricVector<T> {
    let (devs, files) = (b.dev_nodes.len(), b.file_nodes.len());
    let e = T::from_count(b.edges.len());
    let w = T::lit(b.edges.values().sum::<u64>() as f64);
    BipartiteMetricVector {
        avg_degree_devs: ratio(e, devs),
        avg_degree_files: ratio(e, files),
        avg_weighted_degree_devs: ratio(w, devs),
        avg_weighted_degree_files: ratio(w, files),
        bipartite_density: ratio(e, devs * files),
        file_projection_components: project_to_files(b).component_count(),
    }
}
