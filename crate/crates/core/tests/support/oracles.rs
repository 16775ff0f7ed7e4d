//! Brute-force reference implementations. Deliberately naive and
//! independent of the library's code paths.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use coedit_core::ingest::AuthorId;
use coedit_core::networks::{BipartiteNetwork, CoEditNetwork, TimeWindow};

pub struct OracleMetrics {
    pub avg_degree: f64,
    pub avg_weighted_degree: f64,
    pub density: f64,
    pub lambda2: f64,
    pub avg_clustering: f64,
    pub assortativity: Option<f64>,
}

pub struct OracleBipartite {
    pub avg_degree_devs: f64,
    pub avg_degree_files: f64,
    pub avg_weighted_degree_devs: f64,
    pub avg_weighted_degree_files: f64,
    pub density: f64,
    pub components: usize,
}

fn author(k: &str) -> AuthorId {
    AuthorId { canonical_key: k.into(), display_name: k.into(), is_bot: false }
}

/// Directed weighted edge list on nodes `0..n`, self-loops excluded.
pub fn coedit_network(n: usize, edges: &[(usize, usize, u64)]) -> CoEditNetwork {
    let name = |i: usize| format!("dev{i:02}");
    let mut e = BTreeMap::new();
    for &(a, b, w) in edges {
        if a != b && w > 0 {
            *e.entry((name(a), name(b))).or_insert(0) += w;
        }
    }
    CoEditNetwork {
        nodes: (0..n).map(|i| (name(i), author(&name(i)))).collect(),
        edges: e,
        window: TimeWindow::all_time(),
        empty_window: false,
    }
}

pub fn bipartite_network(devs: usize, files: usize, edges: &[(usize, usize, u64)]) -> BipartiteNetwork {
    let d = |i: usize| format!("dev{i:02}");
    let f = |i: usize| format!("file{i:02}");
    let mut e = BTreeMap::new();
    for &(a, b, w) in edges {
        if w > 0 {
            *e.entry((d(a), f(b))).or_insert(0) += w;
        }
    }
    BipartiteNetwork {
        dev_nodes: (0..devs).map(|i| (d(i), author(&d(i)))).collect(),
        file_nodes: (0..files).map(f).collect::<BTreeSet<_>>(),
        edges: e,
        window: TimeWindow::all_time(),
        empty_window: false,
    }
}

pub fn coedit(n: usize, edges: &[(usize, usize, u64)]) -> OracleMetrics {
    let mut dir = vec![vec![0u64; n]; n];
    for &(a, b, w) in edges {
        if a != b {
            dir[a][b] += w;
        }
    }
    let mut adj = vec![vec![false; n]; n];
    let mut wsym = vec![vec![0u64; n]; n];
    let mut m_dir = 0usize;
    for i in 0..n {
        for j in 0..n {
            if dir[i][j] > 0 {
                m_dir += 1;
                adj[i][j] = true;
                adj[j][i] = true;
                wsym[i][j] += dir[i][j];
                wsym[j][i] += dir[i][j];
            }
        }
    }
    let deg: Vec<usize> = (0..n).map(|i| (0..n).filter(|&j| adj[i][j]).count()).collect();
    let nf = n as f64;
    let avg_degree = if n == 0 { 0.0 } else { deg.iter().sum::<usize>() as f64 / nf };
    let avg_weighted_degree = if n == 0 {
        0.0
    } else {
        wsym.iter().flatten().sum::<u64>() as f64 / nf
    };
    let density = if n <= 1 { 0.0 } else { m_dir as f64 / (nf * (nf - 1.0)) };

    let lambda2 = if n <= 1 {
        0.0
    } else {
        let l = nalgebra::DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                deg[i] as f64
            } else if adj[i][j] {
                -1.0
            } else {
                0.0
            }
        });
        let eig = nalgebra::SymmetricEigen::new(l);
        let mut ev: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        if ev[1] < 1e-9 { 0.0 } else { ev[1] }
    };

    let mut csum = 0.0;
    for i in 0..n {
        let k = deg[i];
        if k < 2 {
            continue;
        }
        let mut tri = 0usize;
        for j in 0..n {
            for l in j + 1..n {
                if adj[i][j] && adj[i][l] && adj[j][l] {
                    tri += 1;
                }
            }
        }
        csum += 2.0 * tri as f64 / (k * (k - 1)) as f64;
    }
    let avg_clustering = if n == 0 { 0.0 } else { csum / nf };

    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if adj[i][j] {
                xs.push(deg[i] as f64);
                ys.push(deg[j] as f64);
            }
        }
    }
    let assortativity = pearson(&xs, &ys);
    OracleMetrics { avg_degree, avg_weighted_degree, density, lambda2, avg_clustering, assortativity }
}

fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let m = xs.len() as f64;
    if xs.is_empty() {
        return None;
    }
    let (sx, sy) = (xs.iter().sum::<f64>(), ys.iter().sum::<f64>());
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| x * y).sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let syy: f64 = ys.iter().map(|y| y * y).sum();
    let cov = sxy / m - (sx / m) * (sy / m);
    let vx = sxx / m - (sx / m).powi(2);
    let vy = syy / m - (sy / m).powi(2);
    if vx <= 1e-12 || vy <= 1e-12 {
        return None;
    }
    Some(cov / (vx * vy).sqrt())
}

pub fn bipartite(devs: usize, files: usize, edges: &[(usize, usize, u64)]) -> OracleBipartite {
    let mut w = vec![vec![0u64; files]; devs];
    for &(d, f, x) in edges {
        w[d][f] += x;
    }
    let e = w.iter().flatten().filter(|&&x| x > 0).count() as f64;
    let total = w.iter().flatten().sum::<u64>() as f64;
    let per = |num: f64, den: usize| if den == 0 { 0.0 } else { num / den as f64 };

    // Files are linked when they share a developer; count components by BFS.
    let mut seen = vec![false; files];
    let mut components = 0;
    for s in 0..files {
        if seen[s] {
            continue;
        }
        components += 1;
        let mut stack = vec![s];
        seen[s] = true;
        while let Some(f) = stack.pop() {
            for g in 0..files {
                if !seen[g] && (0..devs).any(|d| w[d][f] > 0 && w[d][g] > 0) {
                    seen[g] = true;
                    stack.push(g);
                }
            }
        }
    }
    OracleBipartite {
        avg_degree_devs: per(e, devs),
        avg_degree_files: per(e, files),
        avg_weighted_degree_devs: per(total, devs),
        avg_weighted_degree_files: per(total, files),
        density: per(e, devs * files),
        components,
    }
}
