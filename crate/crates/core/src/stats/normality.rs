//! Shapiro-Wilk normality test (Royston's approximation) and t-tests used
//! when the optional normality switch is enabled.

use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use super::{cliffs_delta, finite, Method, StatsError, TestResult, FLAG_DROPPED};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapiroWilk<T> {
    pub w: T,
    pub p_value: T,
}

fn poly(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &k| acc * x + k)
}

/// Shapiro-Wilk W and p-value for 3 <= n <= 5000.
pub fn shapiro_wilk<T: Scalar>(xs: &[T]) -> Result<ShapiroWilk<T>, StatsError> {
    let (kept, _) = finite(xs);
    let mut x: Vec<f64> = kept.iter().map(|v| v.to_f64_lossy()).collect();
    let n = x.len();
    if !(3..=5000).contains(&n) {
        return Err(StatsError::NotEnoughData);
    }
    x.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    if x[n - 1] - x[0] < 1e-19 {
        return Err(StatsError::NotEnoughData);
    }
    let half = n / 2;
    let nf = n as f64;
    let mut a = vec![0.0; half];
    if n == 3 {
        a[0] = std::f64::consts::FRAC_1_SQRT_2;
    } else {
        const C1: [f64; 6] = [0.0, 0.221157, -0.147981, -2.07119, 4.434685, -2.706056];
        const C2: [f64; 6] = [0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633];
        let std_normal = Normal::new(0.0, 1.0).expect("valid");
        let m: Vec<f64> = (1..=half)
            .map(|i| std_normal.inverse_cdf((i as f64 - 0.375) / (nf + 0.25)))
            .collect();
        let summ2 = 2.0 * m.iter().map(|v| v * v).sum::<f64>();
        let ssumm2 = summ2.sqrt();
        let rsn = 1.0 / nf.sqrt();
        let a1 = poly(&C1, rsn) - m[0] / ssumm2;
        let (start, fac) = if n > 5 {
            let a2 = -m[1] / ssumm2 + poly(&C2, rsn);
            a[1] = a2;
            let fac = ((summ2 - 2.0 * m[0] * m[0] - 2.0 * m[1] * m[1])
                / (1.0 - 2.0 * a1 * a1 - 2.0 * a2 * a2))
                .sqrt();
            (2, fac)
        } else {
            (1, ((summ2 - 2.0 * m[0] * m[0]) / (1.0 - 2.0 * a1 * a1)).sqrt())
        };
        a[0] = a1;
        for i in start..half {
            a[i] = -m[i] / fac;
        }
    }
    let mean = x.iter().sum::<f64>() / nf;
    let ss: f64 = x.iter().map(|v| (v - mean).powi(2)).sum();
    let num: f64 = (0..half).map(|i| a[i] * (x[n - 1 - i] - x[i])).sum();
    let mut w = (num * num / ss).min(1.0);

    let p = if n == 3 {
        w = w.max(0.75);
        let p = 6.0 / std::f64::consts::PI * (w.sqrt().asin() - (0.75f64).sqrt().asin());
        p.clamp(0.0, 1.0)
    } else {
        let y = (1.0 - w).ln();
        let xx = nf.ln();
        let (z, m, s) = if n <= 11 {
            let gamma = poly(&[-2.273, 0.459], nf);
            if y >= gamma {
                return Ok(ShapiroWilk { w: T::lit(w), p_value: T::lit(1e-99) });
            }
            let y = -(gamma - y).ln();
            (y, poly(&[0.544, -0.39978, 0.025054, -6.714e-4], nf), poly(&[1.3822, -0.77857, 0.062767, -0.0020322], nf).exp())
        } else {
            (y, poly(&[-1.5861, -0.31082, -0.083751, 0.0038915], xx), poly(&[-0.4803, -0.082676, 0.0030302], xx).exp())
        };
        1.0 - Normal::new(0.0, 1.0).expect("valid").cdf((z - m) / s)
    };
    Ok(ShapiroWilk { w: T::lit(w), p_value: T::lit(p) })
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = if x.len() > 1 { x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (m, v)
}

fn t_two_sided(t: f64, df: f64) -> f64 {
    if !t.is_finite() || df <= 0.0 {
        return 1.0;
    }
    let dist = StudentsT::new(0.0, 1.0, df).expect("valid df");
    (2.0 * (1.0 - dist.cdf(t.abs()))).clamp(0.0, 1.0)
}

/// Welch's unequal-variance t-test.
pub fn welch_t_test<T: Scalar>(a: &[T], b: &[T]) -> Result<TestResult<T>, StatsError> {
    let (fa, da) = finite(a);
    let (fb, db) = finite(b);
    if fa.len() < 2 {
        return Err(StatsError::EmptySample("a"));
    }
    if fb.len() < 2 {
        return Err(StatsError::EmptySample("b"));
    }
    let xa: Vec<f64> = fa.iter().map(|v| v.to_f64_lossy()).collect();
    let xb: Vec<f64> = fb.iter().map(|v| v.to_f64_lossy()).collect();
    let (ma, va) = mean_var(&xa);
    let (mb, vb) = mean_var(&xb);
    let (na, nb) = (xa.len() as f64, xb.len() as f64);
    let se2 = va / na + vb / nb;
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2 / ((va / na).powi(2) / (na - 1.0) + (vb / nb).powi(2) / (nb - 1.0));
    Ok(TestResult {
        metric_name: String::new(),
        method: Method::WelchT,
        statistic: T::lit(t),
        p_value: T::lit(t_two_sided(t, df)),
        p_exact: None,
        n1: fa.len(),
        n2: fb.len(),
        effect_size: cliffs_delta(&fa, &fb),
        exact: false,
        dropped: da + db,
        flags: if da + db > 0 { vec![FLAG_DROPPED.into()] } else { vec![] },
    })
}

/// Paired t-test on `after - before`.
pub fn paired_t_test<T: Scalar>(pairs: &[(T, T)]) -> Result<TestResult<T>, StatsError> {
    let defined: Vec<(T, T)> = pairs.iter().copied().filter(|(x, y)| x.is_finite() && y.is_finite()).collect();
    if defined.len() < 2 {
        return Err(StatsError::EmptySample("pairs"));
    }
    let d: Vec<f64> = defined.iter().map(|(x, y)| (*y - *x).to_f64_lossy()).collect();
    let (m, v) = mean_var(&d);
    let n = d.len() as f64;
    let t = m / (v / n).sqrt();
    let before: Vec<T> = defined.iter().map(|p| p.0).collect();
    let after: Vec<T> = defined.iter().map(|p| p.1).collect();
    let dropped = pairs.len() - defined.len();
    Ok(TestResult {
        metric_name: String::new(),
        method: Method::PairedT,
        statistic: T::lit(t),
        p_value: T::lit(t_two_sided(t, n - 1.0)),
        p_exact: None,
        n1: defined.len(),
        n2: defined.len(),
        effect_size: cliffs_delta(&after, &before),
        exact: false,
        dropped,
        flags: if dropped > 0 { vec![FLAG_DROPPED.into()] } else { vec![] },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    // Reference values from scipy.stats 1.15 (shapiro, ttest_ind, ttest_rel).
    #[test]
    fn shapiro_matches_reference() {
        let x: [f64; 12] = [2.1, 3.4, 1.9, 5.6, 4.4, 3.3, 2.8, 4.1, 3.9, 3.0, 2.5, 4.8];
        let r = shapiro_wilk::<f64>(&x).unwrap();
        assert!((r.w - 0.9761409776585511).abs() < 1e-6, "{}", r.w);
        assert!((r.p_value - 0.9634325465820379).abs() < 1e-4, "{}", r.p_value);

        let y = [1.0, 1.0, 1.0, 2.0, 2.0, 3.0, 5.0, 8.0, 13.0, 21.0, 34.0, 55.0, 89.0, 144.0, 233.0];
        let r = shapiro_wilk::<f64>(&y).unwrap();
        assert!((r.w - 0.6679204998016812).abs() < 1e-6);
        assert!((r.p_value - 0.0001151256396941781).abs() < 1e-6);

        let r = shapiro_wilk::<f64>(&[0.3, 1.7, 2.2]).unwrap();
        assert!((r.w - 0.9304123711340204).abs() < 1e-9);
        assert!((r.p_value - 0.4901551899531751).abs() < 1e-3);

        let w = [
            -0.801931, -1.324359, -0.248362, 0.420445, 1.136047, 0.109706, -0.552647, -0.78478, 0.748746, 1.634783,
            0.272769, -1.233329, -0.958265, 1.600019, 0.202882, -1.732135, -0.083696, -1.163226, -0.629288, -0.488006,
            -0.713313, 0.553378, -0.063086, -0.589431, 0.409638, 0.829855, -1.643023, -0.25673, -0.980747, -0.173155,
            -1.289419, 0.02069, -0.037886, -0.304338, -1.047927, -0.39619, -1.091329, -1.355209, 0.224786, -1.10935,
        ];
        let r = shapiro_wilk::<f64>(&w).unwrap();
        assert!((r.w - 0.9697561027981524).abs() < 1e-6);
        assert!((r.p_value - 0.3535587574631094).abs() < 1e-4);
    }

    #[test]
    fn shapiro_rejects_degenerate() {
        assert_eq!(shapiro_wilk::<f64>(&[1.0, 2.0]).unwrap_err(), StatsError::NotEnoughData);
        assert_eq!(shapiro_wilk::<f64>(&[1.0, 1.0, 1.0]).unwrap_err(), StatsError::NotEnoughData);
    }

    #[test]
    fn t_tests_match_reference() {
        let x: [f64; 12] = [2.1, 3.4, 1.9, 5.6, 4.4, 3.3, 2.8, 4.1, 3.9, 3.0, 2.5, 4.8];
        let y = [1.0, 1.0, 1.0, 2.0, 2.0, 3.0, 5.0, 8.0, 13.0, 21.0, 34.0, 55.0, 89.0, 144.0, 233.0];
        let r = welch_t_test(&x, &y).unwrap();
        assert!((r.statistic - -2.156220626998693).abs() < 1e-10);
        assert!((r.p_value - 0.048933444620033094).abs() < 1e-8);

        let pairs: Vec<(f64, f64)> = x.iter().enumerate().map(|(i, &v)| (v, v + 0.5 * (i % 3) as f64)).collect();
        let r = paired_t_test(&pairs).unwrap();
        assert!((r.statistic - 4.06201920231798).abs() < 1e-10);
        assert!((r.p_value - 0.0018767419981996077).abs() < 1e-8);
    }
}
