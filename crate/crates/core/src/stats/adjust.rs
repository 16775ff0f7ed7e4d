use super::StatsError;
use crate::scalar::Scalar;

/// Benjamini-Hochberg adjusted p-values in input order. Non-finite inputs
/// are passed through and do not count towards the number of tests.
pub fn bh_adjust<T: Scalar>(pvalues: &[T]) -> Result<Vec<T>, StatsError> {
    for p in pvalues.iter().filter(|p| p.is_finite()) {
        if *p < T::zero() || *p > T::one() {
            return Err(StatsError::InvalidPValue(p.to_string()));
        }
    }
    let mut idx: Vec<usize> = (0..pvalues.len()).filter(|&i| pvalues[i].is_finite()).collect();
    idx.sort_by(|&a, &b| pvalues[a].partial_cmp(&pvalues[b]).unwrap_or(std::cmp::Ordering::Equal));
    let m = T::from_count(idx.len());
    let mut out = pvalues.to_vec();
    let mut running = T::one();
    for (rank, &i) in idx.iter().enumerate().rev() {
        let adj = (pvalues[i] * m / T::from_count(rank + 1)).min(T::one());
        running = running.min(adj);
        out[i] = running;
    }
    Ok(out)
}
