//! Rencontres distribution: how many fixed points a uniformly random
//! permutation of `n` elements has, exactly and in the Poisson limit.
//!
//! Counts are exact big integers. Probabilities are returned as `f64`;
//! for `n <= EXACT_LIMIT` they are the ratio of two exact integers, beyond
//! that they come from the truncated alternating series for `e^{-1}`.

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use statrs::function::factorial::ln_factorial;

/// Largest `n` for which probabilities are derived from exact integer counts.
pub const EXACT_LIMIT: usize = 20;

/// Number of derangements of `t` elements, `D_t = (t-1)(D_{t-1} + D_{t-2})`.
pub fn derangement_count(t: usize) -> BigUint {
    let mut prev2 = BigUint::one(); // D_0
    if t == 0 {
        return prev2;
    }
    let mut prev1 = BigUint::zero(); // D_1
    for i in 2..=t {
        let next = (&prev1 + &prev2) * BigUint::from(i - 1);
        prev2 = prev1;
        prev1 = next;
    }
    prev1
}

pub fn factorial(n: usize) -> BigUint {
    (2..=n).fold(BigUint::one(), |acc, i| acc * BigUint::from(i))
}

pub fn binomial(n: usize, k: usize) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    // Each partial product is itself a binomial coefficient, so the division is exact.
    (0..k).fold(BigUint::one(), |acc, i| {
        acc * BigUint::from(n - i) / BigUint::from(i + 1)
    })
}

/// Number of permutations of `n` elements with exactly `k` fixed points.
///
/// Zero outside `0..=n`.
pub fn match_count(n: usize, k: i64) -> BigUint {
    match usize::try_from(k) {
        Ok(k) if k <= n => binomial(n, k) * derangement_count(n - k),
        _ => BigUint::zero(),
    }
}

/// `P(m = k)` for `m` the number of fixed points of a random permutation of `n`.
pub fn match_pmf(n: usize, k: i64) -> f64 {
    assert!(n >= 1, "set size must be positive");
    let Ok(ku) = usize::try_from(k) else {
        return 0.0;
    };
    if ku > n {
        return 0.0;
    }
    if n <= EXACT_LIMIT {
        return ratio(&match_count(n, k), &factorial(n));
    }
    if ku == n - 1 {
        return 0.0;
    }
    // (1/k!) * sum_{j=0}^{n-k} (-1)^j / j!
    let mut term = 1.0_f64;
    let mut sum = 1.0_f64;
    for j in 1..=(n - ku) {
        term /= -(j as f64);
        sum += term;
        if term.abs() < f64::EPSILON * 1e-4 {
            break;
        }
    }
    (sum.ln() - ln_factorial(ku as u64)).exp()
}

/// `P(m >= k)`; one for `k <= 0`, zero for `k > n`.
pub fn match_tail(n: usize, k: i64) -> f64 {
    assert!(n >= 1, "set size must be positive");
    if k <= 0 {
        return 1.0;
    }
    let Ok(ku) = usize::try_from(k) else {
        return 0.0;
    };
    if ku > n {
        return 0.0;
    }
    if n <= EXACT_LIMIT {
        let num: BigUint = (ku..=n).map(|j| match_count(n, j as i64)).sum();
        return ratio(&num, &factorial(n)).min(1.0);
    }
    // Summing the small upper terms is more accurate than 1 - lower.
    let tail: f64 = (ku..=n).rev().map(|j| match_pmf(n, j as i64)).sum();
    tail.min(1.0)
}

fn ratio(num: &BigUint, den: &BigUint) -> f64 {
    // Shift both down so the f64 conversion does not overflow for large n.
    let bits = den.bits();
    let shift = bits.saturating_sub(1000);
    let num = (num >> shift).to_f64().unwrap_or(f64::INFINITY);
    let den = (den >> shift).to_f64().unwrap_or(f64::INFINITY);
    num / den
}

/// Exact distribution of the number of fixed points for one set size.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchDistribution {
    n: usize,
    counts: Vec<BigUint>,
    total: BigUint,
}

impl MatchDistribution {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "set size must be positive");
        let counts = (0..=n).map(|k| match_count(n, k as i64)).collect();
        Self {
            n,
            counts,
            total: factorial(n),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `counts()[k]` permutations have exactly `k` fixed points.
    pub fn counts(&self) -> &[BigUint] {
        &self.counts
    }

    /// `n!`
    pub fn total(&self) -> &BigUint {
        &self.total
    }

    pub fn pmf(&self, k: i64) -> f64 {
        match usize::try_from(k) {
            Ok(k) if k <= self.n => ratio(&self.counts[k], &self.total),
            _ => 0.0,
        }
    }

    pub fn tail(&self, k: i64) -> f64 {
        if k <= 0 {
            return 1.0;
        }
        match usize::try_from(k) {
            Ok(k) if k <= self.n => {
                let num: BigUint = self.counts[k..].iter().sum();
                ratio(&num, &self.total).min(1.0)
            }
            _ => 0.0,
        }
    }

    pub fn mean(&self) -> f64 {
        (0..=self.n).map(|k| k as f64 * self.pmf(k as i64)).sum()
    }

    pub fn variance(&self) -> f64 {
        let second: f64 = (0..=self.n)
            .map(|k| (k * k) as f64 * self.pmf(k as i64))
            .sum();
        let mean = self.mean();
        second - mean * mean
    }
}

/// Poisson law with rate `lambda`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoissonModel {
    lambda: f64,
}

impl PoissonModel {
    /// `None` unless `lambda` is finite and positive.
    pub fn new(lambda: f64) -> Option<Self> {
        (lambda.is_finite() && lambda > 0.0).then_some(Self { lambda })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn pmf(&self, k: u64) -> f64 {
        (-self.lambda + k as f64 * self.lambda.ln() - ln_factorial(k)).exp()
    }

    /// `P(X >= k)`.
    pub fn tail(&self, k: u64) -> f64 {
        if k == 0 {
            return 1.0;
        }
        if (k as f64) <= self.lambda {
            let lower: f64 = (0..k).map(|j| self.pmf(j)).sum();
            return (1.0 - lower).clamp(0.0, 1.0);
        }
        // Above the mode terms decrease monotonically; sum until they vanish.
        let mut sum = 0.0;
        let mut term = self.pmf(k);
        let mut j = k;
        while term > 0.0 && term > sum * f64::EPSILON * 1e-2 {
            sum += term;
            j += 1;
            term *= self.lambda / j as f64;
        }
        sum.min(1.0)
    }
}

/// `e^{-lambda} lambda^k / k!`, evaluated in log space.
pub fn poisson_pmf(lambda: f64, k: u64) -> f64 {
    PoissonModel::new(lambda)
        .expect("poisson rate must be positive")
        .pmf(k)
}

/// `P(X >= k)` for `X ~ Poisson(lambda)`.
pub fn poisson_tail(lambda: f64, k: u64) -> f64 {
    PoissonModel::new(lambda)
        .expect("poisson rate must be positive")
        .tail(k)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn enumerate_fixed_points(n: usize) -> Vec<u64> {
        fn heap(k: usize, a: &mut Vec<usize>, out: &mut Vec<u64>) {
            if k <= 1 {
                let fixed = a.iter().enumerate().filter(|(i, &v)| *i == v).count();
                out[fixed] += 1;
                return;
            }
            for i in 0..k {
                heap(k - 1, a, out);
                let j = if k.is_multiple_of(2) { i } else { 0 };
                a.swap(j, k - 1);
            }
        }
        let mut a: Vec<usize> = (0..n).collect();
        let mut out = vec![0; n + 1];
        heap(n, &mut a, &mut out);
        out
    }

    #[test]
    fn derangement_small_values() {
        assert_eq!(derangement_count(0), BigUint::from(1u32));
        assert_eq!(derangement_count(1), BigUint::from(0u32));
        assert_eq!(
            derangement_count(4),
            BigUint::from(enumerate_fixed_points(4)[0])
        );
        assert_eq!(derangement_count(4), BigUint::from(9u32));
    }

    #[test]
    fn derangement_large_is_exact() {
        // D_t = round(t!/e) for t >= 1.
        let d = derangement_count(30);
        assert_eq!(d.to_string(), "97581073836835777732377428235481");
    }

    #[test]
    fn match_count_examples() {
        assert_eq!(match_count(4, 4), BigUint::from(1u32));
        assert_eq!(match_count(4, 3), BigUint::from(0u32));
        assert_eq!(match_count(4, 0), BigUint::from(9u32));
        assert_eq!(match_count(4, -1), BigUint::from(0u32));
        assert_eq!(match_count(4, 5), BigUint::from(0u32));
    }

    #[test]
    fn counts_match_enumeration() {
        for n in 1..=7 {
            let dist = MatchDistribution::new(n);
            let brute = enumerate_fixed_points(n);
            for k in 0..=n {
                assert_eq!(dist.counts()[k], BigUint::from(brute[k]), "n={n} k={k}");
            }
        }
    }

    #[test]
    fn pmf_and_tail_examples() {
        assert!((match_pmf(4, 0) - 0.375).abs() < 1e-12);
        assert!((match_pmf(4, 1) - 8.0 / 24.0).abs() < 1e-12);
        assert!((match_pmf(7, 5) - 21.0 / 5040.0).abs() < 1e-12);
        assert!((match_pmf(5, 1) - 0.375).abs() < 1e-12);
        assert_eq!(match_tail(4, 0), 1.0);
        assert_eq!(match_tail(4, -3), 1.0);
        assert!((match_tail(5, 4) - 1.0 / 120.0).abs() < 1e-12);
        assert!((match_tail(4, 4) - 1.0 / 24.0).abs() < 1e-12);
        assert_eq!(match_tail(4, 5), 0.0);
        assert_eq!(match_pmf(4, -1), 0.0);
        assert_eq!(match_pmf(4, 9), 0.0);
    }

    #[test]
    fn series_branch_agrees_with_exact_branch() {
        // Series evaluation at n = 21 against exact counts.
        let n = 21;
        let exact = MatchDistribution::new(n);
        for k in 0..=n as i64 {
            assert!((match_pmf(n, k) - exact.pmf(k)).abs() < 1e-14, "k={k}");
        }
        assert_eq!(match_pmf(300, 299), 0.0);
        let total: f64 = (0..=300).map(|k| match_pmf(300, k)).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!((match_tail(300, 0) - 1.0).abs() < 1e-15);
        assert!((match_tail(300, 4) - poisson_tail(1.0, 4)).abs() < 1e-12);
    }

    #[test]
    fn n_minus_one_fixed_points_impossible() {
        for n in 2..=40 {
            assert_eq!(match_pmf(n, n as i64 - 1), 0.0);
        }
    }

    #[test]
    fn poisson_examples() {
        assert!((poisson_pmf(1.0, 0) - (-1.0f64).exp()).abs() < 1e-15);
        assert!((poisson_pmf(1.0, 2) - 0.5 * (-1.0f64).exp()).abs() < 1e-15);
        assert!((poisson_pmf(2.0, 0) - 0.1353352832366127).abs() < 1e-15);
        assert_eq!(poisson_tail(1.0, 0), 1.0);
        assert!((poisson_tail(1.0, 1) - (1.0 - (-1.0f64).exp())).abs() < 1e-15);
        assert!((poisson_tail(1.0, 4) - 0.01898815687615385).abs() < 1e-15);
    }

    #[test]
    fn poisson_large_k_does_not_overflow() {
        let p = poisson_pmf(1.0, 500);
        assert!(p.is_finite() && p >= 0.0);
        let p = poisson_pmf(400.0, 400);
        assert!((p - 0.019942958805026466).abs() < 1e-13);
        assert!(poisson_tail(1.0, 200) < 1e-300);
    }

    #[test]
    fn poisson_pmf_normalizes() {
        for lambda in [0.1, 1.0, 7.5, 60.0] {
            let model = PoissonModel::new(lambda).unwrap();
            let mut sum = 0.0;
            let mut k = 0;
            loop {
                let p = model.pmf(k);
                sum += p;
                if k as f64 > lambda && p < 1e-18 {
                    break;
                }
                k += 1;
            }
            assert!((sum - 1.0).abs() < 1e-12, "lambda={lambda} sum={sum}");
        }
        assert!(PoissonModel::new(0.0).is_none());
        assert!(PoissonModel::new(f64::NAN).is_none());
    }
}
