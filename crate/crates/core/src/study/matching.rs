use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::RepoProfile;

/// Largest accepted distance in z-score units.
pub const CALIPER: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchedPair {
    pub treated: RepoProfile,
    pub control: RepoProfile,
    pub distance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnmatchedReason {
    /// No pool repository shares the language.
    StratumEmpty,
    /// Candidates existed but none within the caliper remained.
    NoCandidateWithinCaliper,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Unmatched {
    pub repo: String,
    pub language: String,
    pub reason: UnmatchedReason,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MatchOutcome {
    /// In treated input order.
    pub pairs: Vec<MatchedPair>,
    pub unmatched: Vec<Unmatched>,
    /// Languages with treated repositories but an empty pool.
    pub empty_strata: Vec<String>,
}

fn features(p: &RepoProfile) -> [f64; 4] {
    [
        (p.contributors as f64).ln_1p(),
        (p.commits as f64).ln_1p(),
        p.age_days().max(0.0).ln_1p(),
        (p.pull_requests as f64).ln_1p(),
    ]
}

/// Greedy nearest-neighbour matching without replacement inside language
/// strata. Features are z-scored over treated and pool together; the
/// globally closest remaining pair is taken first, exact ties resolved by
/// a seeded shuffle.
pub fn match_controls(treated: &[RepoProfile], pool: &[RepoProfile], seed: u64) -> MatchOutcome {
    let all: Vec<[f64; 4]> = treated.iter().chain(pool).map(features).collect();
    let n = all.len().max(1) as f64;
    let mut mean = [0.0; 4];
    let mut sd = [0.0; 4];
    for k in 0..4 {
        mean[k] = all.iter().map(|f| f[k]).sum::<f64>() / n;
        let var = all.iter().map(|f| (f[k] - mean[k]).powi(2)).sum::<f64>() / n;
        sd[k] = var.sqrt();
    }
    let z = |p: &RepoProfile| {
        let f = features(p);
        let mut out = [0.0; 4];
        for k in 0..4 {
            out[k] = if sd[k] > 0.0 { (f[k] - mean[k]) / sd[k] } else { 0.0 };
        }
        out
    };
    let tz: Vec<[f64; 4]> = treated.iter().map(z).collect();
    let pz: Vec<[f64; 4]> = pool.iter().map(z).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t_rank: Vec<usize> = (0..treated.len()).collect();
    t_rank.shuffle(&mut rng);
    let mut p_rank: Vec<usize> = (0..pool.len()).collect();
    p_rank.shuffle(&mut rng);

    let mut candidates = Vec::new();
    for (i, t) in treated.iter().enumerate() {
        for (j, p) in pool.iter().enumerate() {
            if t.primary_language != p.primary_language {
                continue;
            }
            let d = tz[i].iter().zip(&pz[j]).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            if d <= CALIPER {
                candidates.push((d, t_rank[i], p_rank[j], i, j));
            }
        }
    }
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut t_used = vec![None; treated.len()];
    let mut p_used = vec![false; pool.len()];
    for (d, _, _, i, j) in candidates {
        if t_used[i].is_none() && !p_used[j] {
            t_used[i] = Some((j, d));
            p_used[j] = true;
        }
    }

    let pool_langs: BTreeSet<&str> = pool.iter().map(|p| p.primary_language.as_str()).collect();
    let mut out = MatchOutcome::default();
    let mut empty = BTreeMap::new();
    for (i, t) in treated.iter().enumerate() {
        match t_used[i] {
            Some((j, d)) => out.pairs.push(MatchedPair { treated: t.clone(), control: pool[j].clone(), distance: d }),
            None => {
                let stratum_empty = !pool_langs.contains(t.primary_language.as_str());
                if stratum_empty {
                    empty.insert(t.primary_language.clone(), ());
                }
                out.unmatched.push(Unmatched {
                    repo: t.full_name.clone(),
                    language: t.primary_language.clone(),
                    reason: if stratum_empty { UnmatchedReason::StratumEmpty } else { UnmatchedReason::NoCandidateWithinCaliper },
                });
            }
        }
    }
    out.empty_strata = empty.into_keys().collect();
    out
}
