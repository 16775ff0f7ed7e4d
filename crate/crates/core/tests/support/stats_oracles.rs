//! Full-enumeration reference p-values, written from the pairwise
//! definitions of U and W+ rather than from rank sums.
#![allow(dead_code)]

/// Two-sided exact Mann-Whitney p as (hits, assignments).
pub fn mwu_exact(a: &[f64], b: &[f64]) -> (u64, u64) {
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let n = pooled.len();
    let n1 = a.len();
    let centre = (a.len() * b.len()) as i64;
    // doubled U for the group given by `member`
    let u2 = |member: &dyn Fn(usize) -> bool| -> i64 {
        let mut u = 0i64;
        for i in (0..n).filter(|&i| member(i)) {
            for j in (0..n).filter(|&j| !member(j)) {
                u += if pooled[i] > pooled[j] {
                    2
                } else if pooled[i] == pooled[j] {
                    1
                } else {
                    0
                };
            }
        }
        u
    };
    let observed = (u2(&|i| i < n1) - centre).abs();
    let mut hits = 0;
    let mut total = 0;
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != n1 {
            continue;
        }
        total += 1;
        if (u2(&|i| mask & (1 << i) != 0) - centre).abs() >= observed {
            hits += 1;
        }
    }
    (hits, total)
}

/// Two-sided exact Wilcoxon signed-rank p over non-zero differences, as
/// (hits, sign patterns).
pub fn wilcoxon_exact(diffs: &[f64]) -> (u64, u64) {
    let d: Vec<f64> = diffs.iter().copied().filter(|x| *x != 0.0).collect();
    let n = d.len();
    // doubled mid-rank: 2 * #smaller + #equal (self included) + 1
    let r2: Vec<i64> = d
        .iter()
        .map(|x| {
            let smaller = d.iter().filter(|y| y.abs() < x.abs()).count() as i64;
            let equal = d.iter().filter(|y| y.abs() == x.abs()).count() as i64;
            2 * smaller + equal + 1
        })
        .collect();
    let total: i64 = r2.iter().sum();
    let w = |pos: &dyn Fn(usize) -> bool| -> i64 { (0..n).filter(|&i| pos(i)).map(|i| r2[i]).sum() };
    let observed = (2 * w(&|i| d[i] > 0.0) - total).abs();
    let mut hits = 0;
    for mask in 0u32..(1 << n) {
        if (2 * w(&|i| mask & (1 << i) != 0) - total).abs() >= observed {
            hits += 1;
        }
    }
    (hits, 1 << n)
}

/// BH adjusted values by the textbook formula min_{j >= i} m p_(j) / j.
pub fn bh(p: &[f64]) -> Vec<f64> {
    let m = p.len() as f64;
    let mut sorted: Vec<(usize, f64)> = p.iter().copied().enumerate().collect();
    sorted.sort_by(|x, y| x.1.partial_cmp(&y.1).unwrap());
    let mut out = vec![0.0; p.len()];
    for (rank, &(idx, _)) in sorted.iter().enumerate() {
        let best = sorted[rank..]
            .iter()
            .enumerate()
            .map(|(k, &(_, pj))| pj * m / (rank + k + 1) as f64)
            .fold(f64::INFINITY, f64::min);
        out[idx] = best.min(1.0);
    }
    out
}
