//! Hypothesis tests of independence: the matching-method test on `m`
//! (exact rencontres tail or Poisson(1) tail) and the conventional
//! two-sided t-test on Pearson's r.

use serde::Serialize;
use statrs::function::beta::beta_reg;
use thiserror::Error;

use crate::combinatorics::{match_tail, poisson_tail};
use crate::rank_stats::{matching_statistic, pearson_r, BivariateSample, RankError, RankedSample};

/// Smallest sample the tests accept.
pub const MIN_TEST_N: usize = 4;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TestError {
    #[error("sample too small: n = {0}, the test needs n >= {MIN_TEST_N}")]
    SampleTooSmall(usize),
    #[error("alpha must lie strictly between 0 and 1, got {0}")]
    InvalidAlpha(f64),
    #[error("no rejection region: even m = {n} has tail probability {size:.6} > alpha = {alpha}")]
    NoRejectionRegion { n: usize, alpha: f64, size: f64 },
    #[error(transparent)]
    Rank(#[from] RankError),
}

/// Null distribution used for the p-value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TestMode {
    /// Exact rencontres tail.
    Exact,
    /// Poisson(1) tail.
    Asymptotic,
    /// Student t on Pearson's r.
    TTest,
}

impl TestMode {
    pub fn as_str(self) -> &'static str {
        match self {
            TestMode::Exact => "exact",
            TestMode::Asymptotic => "asymptotic",
            TestMode::TTest => "t_test",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TestResult {
    /// `m` for the matching test, `r` for the Pearson test.
    pub statistic: f64,
    pub p_value: f64,
    pub mode: TestMode,
    pub alpha: f64,
    pub reject: bool,
    pub n: usize,
}

impl TestResult {
    fn new(statistic: f64, p_value: f64, mode: TestMode, alpha: f64, n: usize) -> Self {
        let p_value = p_value.clamp(0.0, 1.0);
        Self {
            statistic,
            p_value,
            mode,
            alpha,
            reject: p_value <= alpha,
            n,
        }
    }
}

/// Rejection threshold for `m` and its achieved size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CriticalValue {
    pub m: usize,
    pub achieved_size: f64,
}

fn check_alpha(alpha: f64) -> Result<(), TestError> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(TestError::InvalidAlpha(alpha))
    }
}

/// Upper-tail probability `P(m >= k)` under independence.
pub fn matching_p_value(n: usize, m: usize, mode: TestMode) -> f64 {
    match mode {
        TestMode::Exact => match_tail(n, m as i64),
        TestMode::Asymptotic => poisson_tail(1.0, m as u64),
        TestMode::TTest => panic!("t-test mode does not apply to the matching statistic"),
    }
}

/// One-sided matching-method test; rejects iff `p <= alpha`.
pub fn matching_test(
    rs: &RankedSample,
    mode: TestMode,
    alpha: f64,
) -> Result<TestResult, TestError> {
    let n = rs.n();
    if n < MIN_TEST_N {
        return Err(TestError::SampleTooSmall(n));
    }
    check_alpha(alpha)?;
    let m = matching_statistic(rs);
    let p = matching_p_value(n, m, mode);
    Ok(TestResult::new(m as f64, p, mode, alpha, n))
}

/// Smallest `k` with `P(m >= k) <= alpha` under the chosen null.
pub fn critical_m(n: usize, alpha: f64, mode: TestMode) -> Result<CriticalValue, TestError> {
    if n < MIN_TEST_N {
        return Err(TestError::SampleTooSmall(n));
    }
    check_alpha(alpha)?;
    (0..=n)
        .map(|k| (k, matching_p_value(n, k, mode)))
        .find(|&(_, size)| size <= alpha)
        .map(|(m, achieved_size)| CriticalValue { m, achieved_size })
        .ok_or_else(|| TestError::NoRejectionRegion {
            n,
            alpha,
            size: matching_p_value(n, n, mode),
        })
}

/// Two-sided p-value of `t` on `df` degrees of freedom, via
/// `P(|T| >= t) = I_{df/(df+t^2)}(df/2, 1/2)`.
pub fn student_t_two_sided(t: f64, df: f64) -> f64 {
    if t.is_infinite() {
        return 0.0;
    }
    let x = df / (df + t * t);
    beta_reg(df / 2.0, 0.5, x)
}

/// Two-sided p-value for Pearson's `r` with `n` observations.
pub fn pearson_p_value(r: f64, n: usize) -> f64 {
    if r.abs() >= 1.0 {
        return 0.0;
    }
    let df = (n - 2) as f64;
    let t = r * (df / (1.0 - r * r)).sqrt();
    student_t_two_sided(t, df)
}

/// Conventional two-sided t-test of zero correlation.
///
/// A perfectly linear sample (`|r| = 1`) is reported with `p = 0`.
pub fn pearson_test(s: &BivariateSample, alpha: f64) -> Result<TestResult, TestError> {
    let n = s.n();
    if n < MIN_TEST_N {
        return Err(TestError::SampleTooSmall(n));
    }
    check_alpha(alpha)?;
    let r = pearson_r(s)?;
    Ok(TestResult::new(
        r,
        pearson_p_value(r, n),
        TestMode::TTest,
        alpha,
        n,
    ))
}
