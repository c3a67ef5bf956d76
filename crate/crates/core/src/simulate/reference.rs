//! Reference laws and the closed-form bounds the experiments are checked
//! against.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Mean of the standard Gumbel law.
pub const EULER_MASCHERONI: f64 = 0.577_215_664_901_532_9;

/// `G(y) = exp(−exp(−y))`.
pub fn gumbel_cdf(y: f64) -> f64 {
    (-(-y).exp()).exp()
}

/// Tail bound on `P(n·P_n − ln n ≥ y)` valid for every density,
/// `exp(−(n−1)/n · y + ln(n)/n) · 1{y ≤ n − ln n}`. Unclamped.
pub fn theorem1_bound(n: usize, y: f64) -> f64 {
    let nf = n as f64;
    if y > nf - nf.ln() {
        return 0.0;
    }
    (-(nf - 1.0) / nf * y + nf.ln() / nf).exp()
}

/// Tail bound for a Poisson(`n`) sample size, `e^{−y} · exp((y + ln n)² / n)`.
/// Unclamped.
pub fn theorem3_bound(n: f64, y: f64) -> f64 {
    let shifted = y + n.ln();
    (-y + shifted * shifted / n).exp()
}

/// Bound on `E[(n·P_n − ln n)^+]`, `n/(n−1) · exp(ln(n)/n)`.
pub fn mean_bound(n: usize) -> f64 {
    let nf = n as f64;
    nf / (nf - 1.0) * (nf.ln() / nf).exp()
}

/// Exceedance probability of a single NN ball at level `y`, times `n`:
/// `n (1 − (y + ln n)/n)^{n−1}`. Holds for every continuous law whenever
/// `0 < (y + ln n)/n < 1`.
pub fn single_exceedance_mean(n: usize, y: f64) -> f64 {
    let nf = n as f64;
    let level = (y + nf.ln()) / nf;
    if level <= 0.0 {
        return nf;
    }
    if level >= 1.0 {
        return 0.0;
    }
    nf * ((nf - 1.0) * (-level).ln_1p()).exp()
}

/// Stirling numbers of the second kind, `S(k, j)`, for `k ≤ 20`.
pub fn stirling2(k: usize, j: usize) -> Result<u64> {
    if k > 20 {
        return Err(Error::StirlingOutOfRange { k, j });
    }
    if j > k {
        return Ok(0);
    }
    let mut row = vec![0u64; k + 1];
    row[0] = 1;
    for kk in 1..=k {
        for jj in (1..=kk).rev() {
            row[jj] = jj as u64 * row[jj] + row[jj - 1];
        }
        row[0] = 0;
    }
    Ok(row[j])
}

/// `c (c−1) ⋯ (c−k+1)`.
pub fn descending_factorial(c: u64, k: usize) -> u128 {
    let mut acc: u128 = 1;
    for i in 0..k as u64 {
        if c < i + 1 {
            return 0;
        }
        acc *= u128::from(c - i);
    }
    acc
}

/// Average of the `k`-th descending factorial over tallies.
pub fn factorial_moment(counts: &[u32], k: usize) -> f64 {
    if counts.is_empty() {
        return f64::NAN;
    }
    let sum: u128 = counts
        .iter()
        .map(|&c| descending_factorial(u64::from(c), k))
        .sum();
    sum as f64 / counts.len() as f64
}

/// `Po(ν)` with pmf, tail and factorial-moment accessors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoissonReference {
    pub rate: f64,
}

impl PoissonReference {
    pub fn new(rate: f64) -> Result<Self> {
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(Error::InvalidModel(format!(
                "poisson rate must be positive, got {rate}"
            )));
        }
        Ok(PoissonReference { rate })
    }

    /// Limit law of `C_n(y)`, `Po(e^{−y})`.
    pub fn for_threshold(y: f64) -> Self {
        PoissonReference { rate: (-y).exp() }
    }

    pub fn pmf(&self, k: u64) -> f64 {
        let kf = k as f64;
        (-self.rate + kf * self.rate.ln() - ln_gamma(kf + 1.0)).exp()
    }

    /// `P(Y ≥ k)`. Above the mean the tail is summed directly so that tiny
    /// values are not lost to cancellation.
    pub fn tail(&self, k: u64) -> f64 {
        if (k as f64) <= self.rate {
            let below: f64 = (0..k).map(|j| self.pmf(j)).sum();
            return (1.0 - below).max(0.0);
        }
        let mut term = self.pmf(k);
        let mut sum = 0.0;
        let mut j = k;
        while term > sum * 1e-17 && term > 0.0 {
            sum += term;
            j += 1;
            term *= self.rate / j as f64;
        }
        sum
    }

    /// `E[Y^{(k)}] = ν^k`.
    pub fn factorial_moment(&self, k: usize) -> f64 {
        self.rate.powi(k as i32)
    }

    /// Bucket probabilities `0, 1, …, last − 1` and a final bucket holding
    /// `P(Y ≥ last)`.
    pub fn folded_pmf(&self, last: u64) -> Vec<f64> {
        let mut out: Vec<f64> = (0..last).map(|k| self.pmf(k)).collect();
        let head: f64 = out.iter().sum();
        out.push((1.0 - head).max(0.0));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn gumbel_values() {
        assert_abs_diff_eq!(gumbel_cdf(0.0), (-1.0f64).exp(), epsilon = 1e-16);
        assert_abs_diff_eq!(gumbel_cdf(0.0), 0.367879, epsilon = 1e-6);
        assert_eq!(gumbel_cdf(f64::INFINITY), 1.0);
        assert_eq!(gumbel_cdf(f64::NEG_INFINITY), 0.0);
        assert!(gumbel_cdf(40.0) > 1.0 - 1e-15);
    }

    #[test]
    fn gumbel_mean_by_quadrature_is_euler_gamma() {
        // E[Y] = ∫ y g(y) dy with g(y) = e^{−y} G(y); trapezoid on [−10, 40].
        let h = 1e-4;
        let mut acc = 0.0;
        let mut y: f64 = -10.0;
        while y <= 40.0 {
            acc += y * (-y).exp() * gumbel_cdf(y) * h;
            y += h;
        }
        assert_abs_diff_eq!(acc, EULER_MASCHERONI, epsilon = 1e-6);
        assert_abs_diff_eq!(EULER_MASCHERONI, 0.5772, epsilon = 1e-4);
    }

    #[test]
    fn theorem1_examples() {
        // exp(−2.7 + ln(10)/10) evaluated independently: 0.0845906...
        let want = (-2.7 + 10f64.ln() / 10.0).exp();
        assert_abs_diff_eq!(theorem1_bound(10, 3.0), want, epsilon = 1e-15);
        assert_abs_diff_eq!(theorem1_bound(10, 3.0), 0.084607, epsilon = 1e-6);
        assert_eq!(theorem1_bound(10, 10.0 - 10f64.ln() + 1e-9), 0.0);
        assert!(theorem1_bound(10, 0.0) > 1.0);
        // At y = n − ln n the bound simplifies to n e^{−(n−1)}.
        let n = 20usize;
        let y = n as f64 - (n as f64).ln();
        assert_abs_diff_eq!(
            theorem1_bound(n, y),
            n as f64 * (-(n as f64 - 1.0)).exp(),
            epsilon = 1e-20
        );
    }

    #[test]
    fn theorem3_examples() {
        assert_abs_diff_eq!(theorem3_bound(100.0, 0.0), 1.2363, epsilon = 1e-4);
        // (5 + ln 10⁴)²/10⁴ = 0.0201934…, so the bound is e^{−5}·e^{0.0201934}.
        assert_abs_diff_eq!(
            theorem3_bound(1e4, 5.0),
            (-5.0f64).exp() * 0.020_193_4f64.exp(),
            epsilon = 1e-8
        );
        assert_abs_diff_eq!(theorem3_bound(1e4, 5.0), 0.0068754, epsilon = 1e-7);
        assert!(theorem3_bound(10.0, 1000.0) > 1.0);
    }

    #[test]
    fn mean_bound_examples() {
        assert_abs_diff_eq!(mean_bound(2), 2.0 * 2f64.sqrt(), epsilon = 1e-14);
        assert!((mean_bound(1_000_000) - 1.0).abs() < 1e-4);
    }

    #[test]
    fn stirling_values() {
        assert_eq!(stirling2(3, 2).unwrap(), 3);
        assert_eq!(stirling2(4, 2).unwrap(), 7);
        assert_eq!(stirling2(0, 0).unwrap(), 1);
        for k in 1..=20 {
            assert_eq!(stirling2(k, k).unwrap(), 1);
            assert_eq!(stirling2(k, 0).unwrap(), 0);
        }
        assert!(stirling2(21, 3).is_err());
    }

    #[test]
    fn stirling_matches_partition_enumeration() {
        // Count set partitions of {0..k} into j blocks via restricted growth strings.
        fn count(k: usize, j: usize) -> u64 {
            fn rec(pos: usize, k: usize, max: usize, j: usize) -> u64 {
                if pos == k {
                    return u64::from(max == j);
                }
                (0..=max.min(j - 1))
                    .map(|b| rec(pos + 1, k, max.max(b + 1), j))
                    .sum()
            }
            if j == 0 {
                return u64::from(k == 0);
            }
            rec(0, k, 0, j)
        }
        for k in 0..=8 {
            for j in 0..=k {
                assert_eq!(stirling2(k, j).unwrap(), count(k, j), "S({k},{j})");
            }
        }
    }

    #[test]
    fn factorial_moment_examples() {
        assert_abs_diff_eq!(factorial_moment(&[0, 0, 1], 1), 1.0 / 3.0);
        assert_eq!(factorial_moment(&[2], 2), 2.0);
        assert_eq!(factorial_moment(&[3], 4), 0.0);
    }

    #[test]
    fn poisson_reference() {
        let p = PoissonReference::for_threshold(0.0);
        assert_abs_diff_eq!(p.pmf(0), (-1.0f64).exp(), epsilon = 1e-15);
        let total: f64 = (0..60).map(|k| p.pmf(k)).sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.factorial_moment(3), 1.0);
        let q = PoissonReference::new(2.5).unwrap();
        assert_abs_diff_eq!(q.factorial_moment(2), 6.25);
        assert!(p.tail(30) < 1e-20);
        // Dominated by the first term e^{-1}/30!.
        let first = p.pmf(30);
        assert!(p.tail(30) > first && p.tail(30) < first * (1.0 + 1.0 / 30.0));
        assert_abs_diff_eq!(p.tail(1), 1.0 - (-1.0f64).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(
            q.tail(3) + q.pmf(0) + q.pmf(1) + q.pmf(2),
            1.0,
            epsilon = 1e-14
        );
        assert!(PoissonReference::new(0.0).is_err());
        let folded = p.folded_pmf(30);
        assert_eq!(folded.len(), 31);
        assert_abs_diff_eq!(folded.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn single_exceedance_limit() {
        let v = single_exceedance_mean(1_000_000, 0.0);
        assert!((v - 1.0).abs() < 1e-3);
    }
}
