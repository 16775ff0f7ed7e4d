//! Time-windowed co-editing and contribution networks.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::AuthorId;
use crate::provenance::EventLog;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum NetworkError {
    #[error("window start {start} is not before end {end}")]
    InvalidWindow { start: DateTime<Utc>, end: DateTime<Utc> },
}

/// Half-open interval `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TimeWindow {
    pub start: DateTime<Utc>,
    pub end: DateTime<Utc>,
}

impl TimeWindow {
    pub fn new(start: DateTime<Utc>, end: DateTime<Utc>) -> Result<Self, NetworkError> {
        if start >= end {
            return Err(NetworkError::InvalidWindow { start, end });
        }
        Ok(Self { start, end })
    }

    /// Window covering every representable instant.
    pub fn all_time() -> Self {
        Self { start: DateTime::<Utc>::MIN_UTC, end: DateTime::<Utc>::MAX_UTC }
    }

    pub fn contains(&self, t: DateTime<Utc>) -> bool {
        self.start <= t && t < self.end
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoEditNetwork {
    /// Keyed by canonical author key.
    pub nodes: BTreeMap<String, AuthorId>,
    /// (editor, original_author) -> total overwritten lines.
    pub edges: BTreeMap<(String, String), u64>,
    pub window: TimeWindow,
    /// No events fell inside the window.
    pub empty_window: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BipartiteNetwork {
    pub dev_nodes: BTreeMap<String, AuthorId>,
    pub file_nodes: BTreeSet<String>,
    /// (developer, file) -> total lines added plus removed.
    pub edges: BTreeMap<(String, String), u64>,
    pub window: TimeWindow,
    pub empty_window: bool,
}

/// Undirected graph without self-loops or parallel edges. Node indices
/// follow the sorted order of `nodes`; edges are stored with `u < v`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimpleGraph {
    pub nodes: Vec<String>,
    pub edges: BTreeMap<(usize, usize), u64>,
}

impl SimpleGraph {
    pub fn with_nodes<I: IntoIterator<Item = String>>(nodes: I) -> Self {
        let set: BTreeSet<String> = nodes.into_iter().collect();
        Self { nodes: set.into_iter().collect(), edges: BTreeMap::new() }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.nodes.binary_search_by(|n| n.as_str().cmp(name)).ok()
    }

    /// Adds `w` to the undirected edge between `a` and `b`. Self-loops are ignored.
    pub fn add_edge(&mut self, a: usize, b: usize, w: u64) {
        if a == b {
            return;
        }
        let key = (a.min(b), a.max(b));
        *self.edges.entry(key).or_insert(0) += w;
    }

    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for &(u, v) in self.edges.keys() {
            adj[u].push(v);
            adj[v].push(u);
        }
        for a in &mut adj {
            a.sort_unstable();
        }
        adj
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.nodes.len()];
        for &(u, v) in self.edges.keys() {
            d[u] += 1;
            d[v] += 1;
        }
        d
    }

    pub fn weighted_degrees(&self) -> Vec<u64> {
        let mut d = vec![0; self.nodes.len()];
        for (&(u, v), &w) in &self.edges {
            d[u] += w;
            d[v] += w;
        }
        d
    }

    /// Connected components, counting isolated nodes.
    pub fn component_count(&self) -> usize {
        let mut parent: Vec<usize> = (0..self.nodes.len()).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        let mut comps = self.nodes.len();
        for &(u, v) in self.edges.keys() {
            let (ru, rv) = (find(&mut parent, u), find(&mut parent, v));
            if ru != rv {
                parent[ru] = rv;
                comps -= 1;
            }
        }
        comps
    }

    pub fn is_connected(&self) -> bool {
        self.component_count() <= 1
    }
}

fn keep(a: &AuthorId, include_bots: bool) -> bool {
    include_bots || !a.is_bot
}

pub fn build_coedit(log: &EventLog, window: TimeWindow, include_bots: bool) -> CoEditNetwork {
    let mut nodes = BTreeMap::new();
    let mut edges: BTreeMap<(String, String), u64> = BTreeMap::new();
    let mut any = false;
    for e in log.coedits.iter().filter(|e| window.contains(e.time)) {
        any = true;
        if !keep(&e.editor, include_bots) || !keep(&e.original_author, include_bots) {
            continue;
        }
        if e.editor.canonical_key == e.original_author.canonical_key || e.lines == 0 {
            continue;
        }
        nodes.entry(e.editor.canonical_key.clone()).or_insert_with(|| e.editor.clone());
        nodes
            .entry(e.original_author.canonical_key.clone())
            .or_insert_with(|| e.original_author.clone());
        *edges
            .entry((e.editor.canonical_key.clone(), e.original_author.canonical_key.clone()))
            .or_insert(0) += e.lines;
    }
    for c in log.contributions.iter().filter(|c| window.contains(c.time)) {
        any = true;
        if keep(&c.developer, include_bots) {
            nodes.entry(c.developer.canonical_key.clone()).or_insert_with(|| c.developer.clone());
        }
    }
    CoEditNetwork { nodes, edges, window, empty_window: !any }
}

pub fn build_bipartite(log: &EventLog, window: TimeWindow, include_bots: bool) -> BipartiteNetwork {
    let mut dev_nodes = BTreeMap::new();
    let mut file_nodes = BTreeSet::new();
    let mut edges: BTreeMap<(String, String), u64> = BTreeMap::new();
    let mut any = false;
    for c in log.contributions.iter().filter(|c| window.contains(c.time)) {
        any = true;
        let w = c.lines_added + c.lines_removed;
        if !keep(&c.developer, include_bots) || w == 0 {
            continue;
        }
        dev_nodes.entry(c.developer.canonical_key.clone()).or_insert_with(|| c.developer.clone());
        file_nodes.insert(c.file.clone());
        *edges.entry((c.developer.canonical_key.clone(), c.file.clone())).or_insert(0) += w;
    }
    BipartiteNetwork { dev_nodes, file_nodes, edges, window, empty_window: !any }
}

/// One-mode projection onto files: `f` and `g` are linked when some developer touched both.
pub fn project_to_files(b: &BipartiteNetwork) -> SimpleGraph {
    let mut g = SimpleGraph::with_nodes(b.file_nodes.iter().cloned());
    let mut by_dev: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (dev, file) in b.edges.keys() {
        if let Some(i) = g.index_of(file) {
            by_dev.entry(dev.as_str()).or_default().push(i);
        }
    }
    for files in by_dev.values() {
        for (k, &u) in files.iter().enumerate() {
            for &v in &files[k + 1..] {
                g.edges.entry((u.min(v), u.max(v))).or_insert(1);
            }
        }
    }
    g
}

/// Undirected view: `{u, v}` carries `w(u->v) + w(v->u)`; isolated nodes are kept.
pub fn symmetrize(n: &CoEditNetwork) -> SimpleGraph {
    let mut g = SimpleGraph::with_nodes(n.nodes.keys().cloned());
    for ((a, b), &w) in &n.edges {
        if let (Some(u), Some(v)) = (g.index_of(a), g.index_of(b)) {
            g.add_edge(u, v, w);
        }
    }
    g
}

#[derive(Serialize)]
struct Sidecar<'a> {
    nodes: Vec<&'a str>,
    window: &'a TimeWindow,
    #[serde(rename = "type")]
    kind: &'a str,
}

fn edges_csv<'a, I>(edges: I) -> String
where
    I: Iterator<Item = (&'a str, &'a str, u64)>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["source", "target", "weight"]).expect("in-memory write");
    for (s, t, wt) in edges {
        w.write_record([s, t, &wt.to_string()]).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
}

impl CoEditNetwork {
    pub fn to_edge_csv(&self) -> String {
        edges_csv(self.edges.iter().map(|((a, b), &w)| (a.as_str(), b.as_str(), w)))
    }

    pub fn sidecar_json(&self) -> String {
        serde_json::to_string_pretty(&Sidecar {
            nodes: self.nodes.keys().map(String::as_str).collect(),
            window: &self.window,
            kind: "coedit",
        })
        .expect("sidecar serializes")
    }
}

impl BipartiteNetwork {
    pub fn to_edge_csv(&self) -> String {
        edges_csv(self.edges.iter().map(|((a, b), &w)| (a.as_str(), b.as_str(), w)))
    }

    pub fn sidecar_json(&self) -> String {
        serde_json::to_string_pretty(&Sidecar {
            nodes: self
                .dev_nodes
                .keys()
                .map(String::as_str)
                .chain(self.file_nodes.iter().map(String::as_str))
                .collect(),
            window: &self.window,
            kind: "bipartite",
        })
        .expect("sidecar serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::provenance::{CoEditEvent, ContributionEvent};
    use chrono::TimeZone;

    fn who(k: &str, bot: bool) -> AuthorId {
        AuthorId { canonical_key: k.into(), display_name: k.into(), is_bot: bot }
    }

    fn t(s: i64) -> DateTime<Utc> {
        Utc.timestamp_opt(s, 0).unwrap()
    }

    fn coedit(a: &AuthorId, b: &AuthorId, time: i64, lines: u64) -> CoEditEvent {
        CoEditEvent {
            editor: a.clone(),
            original_author: b.clone(),
            file: "f".into(),
            commit_id: format!("c{time}"),
            time: t(time),
            lines,
        }
    }

    fn contrib(a: &AuthorId, file: &str, time: i64, added: u64, removed: u64) -> ContributionEvent {
        ContributionEvent {
            developer: a.clone(),
            file: file.into(),
            commit_id: format!("c{time}"),
            time: t(time),
            lines_added: added,
            lines_removed: removed,
        }
    }

    fn log(coedits: Vec<CoEditEvent>, contributions: Vec<ContributionEvent>) -> EventLog {
        EventLog { repo: "r".into(), head_commit: String::new(), coedits, contributions }
    }

    #[test]
    fn coedit_weights_sum_within_window() {
        let (a, b) = (who("a", false), who("b", false));
        let l = log(vec![coedit(&a, &b, 10, 3), coedit(&a, &b, 20, 2)], vec![]);
        let both = build_coedit(&l, TimeWindow::new(t(0), t(100)).unwrap(), false);
        assert_eq!(both.edges[&("a".into(), "b".into())], 5);
        let first = build_coedit(&l, TimeWindow::new(t(0), t(20)).unwrap(), false);
        assert_eq!(first.edges[&("a".into(), "b".into())], 3);
        let none = build_coedit(&l, TimeWindow::new(t(30), t(40)).unwrap(), false);
        assert!(none.empty_window && none.nodes.is_empty());
    }

    #[test]
    fn bots_are_filtered() {
        let (a, b) = (who("a", false), who("bot", true));
        let l = log(vec![coedit(&a, &b, 10, 3)], vec![contrib(&b, "f", 10, 1, 0)]);
        let w = TimeWindow::new(t(0), t(100)).unwrap();
        let n = build_coedit(&l, w, false);
        assert!(n.edges.is_empty());
        assert!(!n.nodes.contains_key("bot"));
        assert_eq!(build_coedit(&l, w, true).edges.len(), 1);
    }

    #[test]
    fn isolated_active_developers_are_nodes() {
        let (a, b, c) = (who("a", false), who("b", false), who("c", false));
        let l = log(vec![coedit(&a, &b, 10, 1)], vec![contrib(&c, "f", 11, 1, 0)]);
        let n = build_coedit(&l, TimeWindow::new(t(0), t(100)).unwrap(), false);
        assert_eq!(n.nodes.keys().collect::<Vec<_>>(), ["a", "b", "c"]);
    }

    #[test]
    fn bipartite_aggregation() {
        let (a, b) = (who("a", false), who("b", false));
        let l = log(
            vec![],
            vec![
                contrib(&a, "f", 1, 1, 0),
                contrib(&a, "f", 2, 1, 1),
                contrib(&a, "g", 3, 1, 0),
                contrib(&b, "g", 4, 1, 0),
                contrib(&b, "h", 5, 1, 0),
            ],
        );
        let n = build_bipartite(&l, TimeWindow::new(t(0), t(100)).unwrap(), false);
        assert_eq!(n.edges[&("a".into(), "f".into())], 3);
        assert_eq!(n.edges.len(), 4);
        for (d, f) in n.edges.keys() {
            assert!(n.dev_nodes.contains_key(d) && n.file_nodes.contains(f));
        }
        let empty = build_bipartite(&l, TimeWindow::new(t(50), t(60)).unwrap(), false);
        assert!(empty.edges.is_empty() && empty.empty_window);
    }

    #[test]
    fn projection() {
        let (a, b) = (who("a", false), who("b", false));
        let w = TimeWindow::new(t(0), t(100)).unwrap();
        let tri = build_bipartite(&log(vec![], vec![contrib(&a, "f", 1, 1, 0), contrib(&a, "g", 1, 1, 0), contrib(&a, "h", 1, 1, 0)]), w, false);
        let g = project_to_files(&tri);
        assert_eq!(g.edge_count(), 3);
        assert_eq!(g.component_count(), 1);

        let split = build_bipartite(&log(vec![], vec![contrib(&a, "f", 1, 1, 0), contrib(&a, "g", 1, 1, 0), contrib(&b, "h", 1, 1, 0)]), w, false);
        let g = project_to_files(&split);
        assert_eq!(g.edge_count(), 1);
        assert_eq!(g.component_count(), 2);

        let g = project_to_files(&build_bipartite(&log(vec![], vec![]), w, false));
        assert_eq!((g.node_count(), g.edge_count()), (0, 0));
    }

    #[test]
    fn symmetrize_sums_directions() {
        let (a, b, c) = (who("a", false), who("b", false), who("c", false));
        let w = TimeWindow::new(t(0), t(100)).unwrap();
        let n = build_coedit(&log(vec![coedit(&a, &b, 1, 3), coedit(&b, &a, 2, 2)], vec![contrib(&c, "f", 3, 1, 0)]), w, false);
        let g = symmetrize(&n);
        assert_eq!(g.node_count(), 3);
        assert_eq!(g.edges.values().copied().collect::<Vec<_>>(), [5]);
        let single = symmetrize(&build_coedit(&log(vec![coedit(&a, &b, 1, 3)], vec![]), w, false));
        assert_eq!(single.edges.values().copied().collect::<Vec<_>>(), [3]);
    }

    #[test]
    fn invalid_window() {
        assert!(TimeWindow::new(t(5), t(5)).is_err());
    }

    #[test]
    fn csv_and_sidecar() {
        let (a, b) = (who("a,1", false), who("b", false));
        let n = build_coedit(&log(vec![coedit(&a, &b, 1, 3)], vec![]), TimeWindow::new(t(0), t(9)).unwrap(), false);
        assert_eq!(n.to_edge_csv(), "source,target,weight\n\"a,1\",b,3\n");
        let v: serde_json::Value = serde_json::from_str(&n.sidecar_json()).unwrap();
        assert_eq!(v["type"], "coedit");
        assert_eq!(v["nodes"].as_array().unwrap().len(), 2);
        assert!(v["window"]["start"].is_string());
    }
}
