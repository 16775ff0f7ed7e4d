//! Dense symmetric eigenvalues: Householder tridiagonalization followed by
//! implicit QL with Wilkinson shifts. Eigenvalues only.

use crate::scalar::Scalar;

const MAX_SWEEPS: usize = 60;

/// Reduces the row-major symmetric matrix `a` (n x n) to tridiagonal form.
/// Returns (diagonal, off-diagonal) with `off[i]` linking `i-1` and `i`.
fn tridiagonalize<T: Scalar>(a: &mut [T], n: usize) -> (Vec<T>, Vec<T>) {
    let at = |i: usize, j: usize| i * n + j;
    let mut d = vec![T::zero(); n];
    let mut e = vec![T::zero(); n];
    for i in (1..n).rev() {
        let l = i - 1;
        let mut h = T::zero();
        if l > 0 {
            let scale: T = (0..=l).map(|k| a[at(i, k)].abs()).sum();
            if scale == T::zero() {
                e[i] = a[at(i, l)];
            } else {
                for k in 0..=l {
                    a[at(i, k)] = a[at(i, k)] / scale;
                    h = h + a[at(i, k)] * a[at(i, k)];
                }
                let f = a[at(i, l)];
                let g = if f >= T::zero() { -h.sqrt() } else { h.sqrt() };
                e[i] = scale * g;
                h = h - f * g;
                a[at(i, l)] = f - g;
                let mut f = T::zero();
                for j in 0..=l {
                    let mut g = T::zero();
                    for k in 0..=j {
                        g = g + a[at(j, k)] * a[at(i, k)];
                    }
                    for k in j + 1..=l {
                        g = g + a[at(k, j)] * a[at(i, k)];
                    }
                    e[j] = g / h;
                    f = f + e[j] * a[at(i, j)];
                }
                let hh = f / (h + h);
                for j in 0..=l {
                    let f = a[at(i, j)];
                    let g = e[j] - hh * f;
                    e[j] = g;
                    for k in 0..=j {
                        a[at(j, k)] = a[at(j, k)] - (f * e[k] + g * a[at(i, k)]);
                    }
                }
            }
        } else {
            e[i] = a[at(i, l)];
        }
        d[i] = h;
    }
    for (i, di) in d.iter_mut().enumerate() {
        *di = a[at(i, i)];
    }
    (d, e)
}

/// Eigenvalues of a symmetric tridiagonal matrix, in place on `d`.
fn tridiagonal_ql<T: Scalar>(d: &mut [T], e: &mut [T]) -> bool {
    let n = d.len();
    if n == 0 {
        return true;
    }
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = T::zero();
    let two = T::lit(2.0);
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= T::epsilon() * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > MAX_SWEEPS {
                return false;
            }
            let mut g = (d[l + 1] - d[l]) / (two * e[l]);
            let mut r = g.hypot(T::one());
            g = d[m] - d[l] + e[l] / (g + if g >= T::zero() { r.abs() } else { -r.abs() });
            let (mut s, mut c, mut p) = (T::one(), T::one(), T::zero());
            let mut underflow = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == T::zero() {
                    d[i + 1] = d[i + 1] - p;
                    e[m] = T::zero();
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + two * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if underflow {
                continue;
            }
            d[l] = d[l] - p;
            e[l] = g;
            e[m] = T::zero();
        }
    }
    true
}

/// Ascending eigenvalues of the symmetric row-major matrix `a` (n x n).
///
/// Panics if the QL iteration fails to converge, which does not happen for
/// finite symmetric input.
pub fn symmetric_eigenvalues<T: Scalar>(mut a: Vec<T>, n: usize) -> Vec<T> {
    assert_eq!(a.len(), n * n, "matrix must be n x n");
    let (mut d, mut e) = tridiagonalize(&mut a, n);
    assert!(tridiagonal_ql(&mut d, &mut e), "QL iteration did not converge");
    d.sort_by(|x, y| x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal));
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal() {
        let ev = symmetric_eigenvalues(vec![3.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 2.0], 3);
        assert_eq!(ev, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn two_by_two() {
        let ev = symmetric_eigenvalues(vec![2.0f64, 1.0, 1.0, 2.0], 2);
        assert!((ev[0] - 1.0).abs() < 1e-12 && (ev[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn matches_nalgebra_on_random_symmetric() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for n in [1usize, 2, 5, 9, 20] {
            let mut a = vec![0.0f64; n * n];
            for i in 0..n {
                for j in 0..=i {
                    let v: f64 = rng.gen_range(-5.0..5.0);
                    a[i * n + j] = v;
                    a[j * n + i] = v;
                }
            }
            let ours = symmetric_eigenvalues(a.clone(), n);
            let m = nalgebra::DMatrix::from_row_slice(n, n, &a);
            let mut theirs: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
            theirs.sort_by(|x, y| x.partial_cmp(y).unwrap());
            for (x, y) in ours.iter().zip(&theirs) {
                assert!((x - y).abs() < 1e-9, "n={n}: {x} vs {y}");
            }
        }
    }

    #[test]
    fn works_in_f32() {
        let ev = symmetric_eigenvalues(vec![2.0f32, -1.0, -1.0, 2.0], 2);
        assert!((ev[0] - 1.0).abs() < 1e-5 && (ev[1] - 3.0).abs() < 1e-5);
    }
}
