use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::ActionRef;

/// Order-independent accumulator; `merge` makes it usable as a parallel
/// reduction.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CensusAccumulator {
    repos: usize,
    counts: BTreeMap<String, usize>,
    /// Distinct marketplace actions per repo with at least one.
    per_repo: Vec<usize>,
}

impl CensusAccumulator {
    /// Adds one repository. Local and docker references are not counted.
    pub fn add_repo(&mut self, refs: &[ActionRef]) {
        let distinct: BTreeSet<String> = refs.iter().filter(|r| r.is_marketplace()).map(|r| r.slug()).collect();
        self.add_slugs(distinct);
    }

    /// Adds one repository given by distinct `owner/name` slugs.
    pub fn add_slugs<I: IntoIterator<Item = String>>(&mut self, slugs: I) {
        let distinct: BTreeSet<String> = slugs.into_iter().collect();
        self.repos += 1;
        if !distinct.is_empty() {
            self.per_repo.push(distinct.len());
        }
        for s in distinct {
            *self.counts.entry(s).or_default() += 1;
        }
    }

    pub fn merge(mut self, other: CensusAccumulator) -> Self {
        self.repos += other.repos;
        self.per_repo.extend(other.per_repo);
        for (k, v) in other.counts {
            *self.counts.entry(k).or_default() += v;
        }
        self
    }

    pub fn finish(mut self) -> Census {
        let using = self.per_repo.len();
        let mut rows: Vec<CensusRow> = self
            .counts
            .into_iter()
            .map(|(action, count)| CensusRow { share_pct: 100.0 * count as f64 / using as f64, action, count })
            .collect();
        rows.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.action.cmp(&b.action)));
        self.per_repo.sort_unstable();
        let median = match using {
            0 => None,
            n if n % 2 == 1 => Some(self.per_repo[n / 2] as f64),
            n => Some((self.per_repo[n / 2 - 1] + self.per_repo[n / 2]) as f64 / 2.0),
        };
        Census {
            total_repos: self.repos,
            repos_with_actions: using,
            share_with_actions_pct: if self.repos == 0 { 0.0 } else { 100.0 * using as f64 / self.repos as f64 },
            min_actions: self.per_repo.first().copied(),
            median_actions: median,
            max_actions: self.per_repo.last().copied(),
            rows,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CensusRow {
    pub action: String,
    /// Repositories referencing the action at least once.
    pub count: usize,
    /// Share of repositories using any action.
    pub share_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Census {
    pub total_repos: usize,
    pub repos_with_actions: usize,
    pub share_with_actions_pct: f64,
    pub min_actions: Option<usize>,
    pub median_actions: Option<f64>,
    pub max_actions: Option<usize>,
    /// Descending by count, ties by name.
    pub rows: Vec<CensusRow>,
}

impl Census {
    pub fn top(&self, n: usize) -> &[CensusRow] {
        &self.rows[..n.min(self.rows.len())]
    }

    pub fn row(&self, action: &str) -> Option<&CensusRow> {
        self.rows.iter().find(|r| r.action == action)
    }

    /// `action,count,share_pct` with shares at one decimal.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("action,count,share_pct\n");
        for r in &self.rows {
            out.push_str(&format!("{},{},{}\n", csv_field(&r.action), r.count, format_share(r.share_pct)));
        }
        out
    }
}

/// One-decimal rendering, rounding half away from zero.
pub fn format_share(pct: f64) -> String {
    format!("{:.1}", (pct * 10.0).round() / 10.0)
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Census over per-repository reference lists.
pub fn census<'a, I>(corpus: I) -> Census
where
    I: IntoIterator<Item = &'a [ActionRef]>,
{
    corpus
        .into_iter()
        .fold(CensusAccumulator::default(), |mut acc, refs| {
            acc.add_repo(refs);
            acc
        })
        .finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn refs(uses: &[&str]) -> Vec<ActionRef> {
        uses.iter().map(|u| ActionRef::parse(u, "ci.yml").unwrap()).collect()
    }

    #[test]
    fn counts_once_per_repo() {
        let corpus = [
            refs(&["actions/checkout@v3", "actions/checkout@v4", "codecov/codecov-action@v3"]),
            refs(&["actions/checkout@v2", "./local"]),
            refs(&[]),
            refs(&["actions/setup-node@v3", "actions/checkout@v3", "actions/cache@v3"]),
        ];
        let c = census(corpus.iter().map(|r| r.as_slice()));
        assert_eq!((c.total_repos, c.repos_with_actions), (4, 3));
        assert_eq!(c.share_with_actions_pct, 75.0);
        assert_eq!(c.rows[0], CensusRow { action: "actions/checkout".into(), count: 3, share_pct: 100.0 });
        assert_eq!((c.min_actions, c.median_actions, c.max_actions), (Some(1), Some(2.0), Some(3)));
        assert!(c.to_csv().starts_with("action,count,share_pct\nactions/checkout,3,100.0\n"));
        assert_eq!(c.top(2).len(), 2);
    }

    #[test]
    fn empty_corpus() {
        let c = census(std::iter::empty());
        assert!(c.rows.is_empty());
        assert_eq!(c.share_with_actions_pct, 0.0);
        assert_eq!(c.median_actions, None);
        assert_eq!(c.to_csv(), "action,count,share_pct\n");
    }

    #[test]
    fn merge_is_order_independent() {
        let a = refs(&["a/x", "b/y"]);
        let b = refs(&["a/x"]);
        let mut l = CensusAccumulator::default();
        l.add_repo(&a);
        let mut r = CensusAccumulator::default();
        r.add_repo(&b);
        let lr = l.clone().merge(r.clone()).finish();
        let rl = r.merge(l).finish();
        assert_eq!(lr, rl);
    }

    #[test]
    fn share_rendering() {
        assert_eq!(format_share(100.0 * 11373.0 / 125528.0), "9.1");
        assert_eq!(format_share(100.0 * 6.0 / 125528.0), "0.0");
        assert_eq!(format_share(12.25), "12.3");
    }
}
