//! Empirical distributions and goodness-of-fit distances.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sorted sample with ECDF `F̂(x) = #(values ≤ x) / m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalDistribution {
    sorted_values: Vec<f64>,
}

impl EmpiricalDistribution {
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| v.is_nan()) {
            return Err(Error::InvalidModel(
                "empirical distribution contains NaN".into(),
            ));
        }
        values.sort_by(f64::total_cmp);
        Ok(EmpiricalDistribution {
            sorted_values: values,
        })
    }

    pub fn m(&self) -> usize {
        self.sorted_values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.sorted_values
    }

    pub fn ecdf(&self, x: f64) -> f64 {
        let count = self.sorted_values.partition_point(|&v| v <= x);
        count as f64 / self.m() as f64
    }

    /// Fraction of values `≥ y`.
    pub fn upper_tail(&self, y: f64) -> f64 {
        let below = self.sorted_values.partition_point(|&v| v < y);
        (self.m() - below) as f64 / self.m() as f64
    }

    pub fn mean(&self) -> f64 {
        self.sorted_values.iter().sum::<f64>() / self.m() as f64
    }

    /// Merges two distributions; the sorted merge is associative and
    /// commutative.
    pub fn merge(&self, other: &Self) -> Self {
        let mut v = Vec::with_capacity(self.m() + other.m());
        let (a, b) = (&self.sorted_values, &other.sorted_values);
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            if a[i].total_cmp(&b[j]).is_le() {
                v.push(a[i]);
                i += 1;
            } else {
                v.push(b[j]);
                j += 1;
            }
        }
        v.extend_from_slice(&a[i..]);
        v.extend_from_slice(&b[j..]);
        EmpiricalDistribution { sorted_values: v }
    }
}

/// `sup_x |F̂(x) − F(x)|`, evaluated on both sides of every jump.
pub fn ks_distance(emp: &EmpiricalDistribution, cdf: impl Fn(f64) -> f64) -> f64 {
    let m = emp.m() as f64;
    let v = emp.values();
    let mut worst = 0.0_f64;
    let mut i = 0;
    while i < v.len() {
        // Group ties so the ECDF jumps once per distinct value.
        let mut j = i;
        while j + 1 < v.len() && v[j + 1] == v[i] {
            j += 1;
        }
        let f = cdf(v[i]);
        let below = i as f64 / m;
        let at = (j + 1) as f64 / m;
        worst = worst.max((f - below).abs()).max((at - f).abs());
        i = j + 1;
    }
    worst
}

/// `sup_x |F̂_a(x) − F̂_b(x)|` between two step functions, exact on the
/// union of jump points.
pub fn ks_distance_empirical(a: &EmpiricalDistribution, b: &EmpiricalDistribution) -> f64 {
    a.values()
        .iter()
        .chain(b.values())
        .map(|&x| (a.ecdf(x) - b.ecdf(x)).abs())
        .fold(0.0, f64::max)
}

/// Total-variation distance `½ Σ |p_k − q_k|` between two pmfs on the same
/// buckets.
pub fn tv_distance(p: &[f64], q: &[f64]) -> f64 {
    assert_eq!(p.len(), q.len(), "pmfs must share buckets");
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Empirical pmf of tallies on buckets `0..last` plus a final `≥ last`
/// bucket.
pub fn folded_counts_pmf(counts: &[u32], last: u32) -> Vec<f64> {
    let mut out = vec![0.0; last as usize + 1];
    for &c in counts {
        out[c.min(last) as usize] += 1.0;
    }
    let m = counts.len() as f64;
    out.iter_mut().for_each(|v| *v /= m);
    out
}

/// Kolmogorov survival function `Q(λ) = 2 Σ_{k≥1} (−1)^{k−1} e^{−2k²λ²}`.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += sign * term;
        if term < 1e-18 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Asymptotic p-value of a one-sample KS distance `d` at sample size `m`,
/// with the `√m + 0.12 + 0.11/√m` small-sample correction.
pub fn ks_p_value(d: f64, m: usize) -> f64 {
    let sm = (m as f64).sqrt();
    kolmogorov_survival((sm + 0.12 + 0.11 / sm) * d)
}

/// Largest KS distance accepted at significance `alpha`.
pub fn ks_critical_value(alpha: f64, m: usize) -> f64 {
    let (mut lo, mut hi) = (0.2_f64, 5.0_f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if kolmogorov_survival(mid) > alpha {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let sm = (m as f64).sqrt();
    hi / (sm + 0.12 + 0.11 / sm)
}

/// Mean and standard error of the mean.
pub fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let m = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / m;
    if values.len() < 2 {
        return (mean, f64::INFINITY);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (m - 1.0);
    (mean, (var / m).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::reference::gumbel_cdf;
    use approx::assert_abs_diff_eq;

    #[test]
    fn ks_single_point_at_zero() {
        let e = EmpiricalDistribution::new(vec![0.0]).unwrap();
        let d = ks_distance(&e, gumbel_cdf);
        assert_abs_diff_eq!(d, 1.0 - (-1.0f64).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(d, 0.6321, epsilon = 1e-4);
    }

    #[test]
    fn ks_two_values_at_thirds() {
        // Gumbel quantiles q(p) = −ln(−ln p). Just below q(1/3) the ECDF is
        // still 0 while F = 1/3, so the supremum is 1/3, not the 1/6 gap
        // seen at the jump points themselves.
        let q = |p: f64| -(-p.ln()).ln();
        let e = EmpiricalDistribution::new(vec![q(1.0 / 3.0), q(2.0 / 3.0)]).unwrap();
        assert_abs_diff_eq!(ks_distance(&e, gumbel_cdf), 1.0 / 3.0, epsilon = 1e-12);
        let mid = EmpiricalDistribution::new(vec![q(0.25), q(0.75)]).unwrap();
        assert_abs_diff_eq!(ks_distance(&mid, gumbel_cdf), 0.25, epsilon = 1e-12);
    }

    #[test]
    fn ks_against_own_sample_is_zero() {
        let e = EmpiricalDistribution::new(vec![0.3, -1.0, 2.0, 2.0, 5.0]).unwrap();
        assert_eq!(ks_distance_empirical(&e, &e), 0.0);
        let f = EmpiricalDistribution::new(vec![0.3, -1.0, 2.0, 5.0]).unwrap();
        assert_abs_diff_eq!(ks_distance_empirical(&e, &f), 0.1, epsilon = 1e-15);
    }

    #[test]
    fn ecdf_and_tail() {
        let e = EmpiricalDistribution::new(vec![3.0, 1.0, 2.0, 2.0]).unwrap();
        assert_eq!(e.values(), &[1.0, 2.0, 2.0, 3.0]);
        assert_eq!(e.ecdf(2.0), 0.75);
        assert_eq!(e.ecdf(0.0), 0.0);
        assert_eq!(e.upper_tail(2.0), 0.75);
        assert_eq!(e.upper_tail(3.5), 0.0);
    }

    #[test]
    fn merge_is_sorted_union() {
        let a = EmpiricalDistribution::new(vec![1.0, 4.0]).unwrap();
        let b = EmpiricalDistribution::new(vec![0.0, 2.0, 5.0]).unwrap();
        assert_eq!(a.merge(&b).values(), &[0.0, 1.0, 2.0, 4.0, 5.0]);
        assert_eq!(a.merge(&b), b.merge(&a));
    }

    #[test]
    fn tv_examples() {
        assert_abs_diff_eq!(tv_distance(&[1.0, 0.0], &[0.0, 1.0]), 1.0);
        let emp = folded_counts_pmf(&[0, 0, 1, 40], 30);
        assert_eq!(emp[0], 0.5);
        assert_eq!(emp[30], 0.25);
    }

    #[test]
    fn kolmogorov_critical_values() {
        // Classical asymptotic critical values 1.3581 (5%) and 1.6276 (1%).
        let sm = |m: f64| m.sqrt() + 0.12 + 0.11 / m.sqrt();
        assert_abs_diff_eq!(
            ks_critical_value(0.05, 10_000) * sm(1e4),
            1.3581,
            epsilon = 1e-3
        );
        assert_abs_diff_eq!(
            ks_critical_value(0.01, 10_000) * sm(1e4),
            1.6276,
            epsilon = 1e-3
        );
        assert_abs_diff_eq!(
            ks_p_value(ks_critical_value(0.01, 500), 500),
            0.01,
            epsilon = 1e-9
        );
    }
}
