//! Seeded Monte Carlo experiments on bivariate standard normal populations.
//!
//! Each replication draws its sample from its own substream (see
//! [`crate::stream`]), and per-replication results are collected in
//! replication order before any floating-point reduction. Output is thus a
//! function of the configuration and master seed only, not of the number of
//! worker threads.
//!
//! Normal deviates come from `rand_distr::StandardNormal` (ziggurat). Within
//! a replication the draws are `x_1, z_1, x_2, z_2, ...`, followed by one
//! `u64` that seeds random tie-breaking for the rank transform.

use rand::{Rng, RngCore};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::combinatorics::match_tail;
use crate::inference::{critical_m, pearson_p_value, CriticalValue, TestError, TestMode};
use crate::rank_stats::{
    kendall_tau, matching_statistic, pearson_r, pearson_slices, spearman_rho, BivariateSample,
    RankedSample, TiePolicy,
};
use crate::stream::{CellKey, StreamFactory};

pub const DEFAULT_REPS: u64 = 100_000;

/// Sample sizes of the power grid.
pub const POWER_N: [usize; 5] = [10, 30, 50, 100, 200];

/// Population correlations of the power and indicator grids.
pub const POWER_RHO: [f64; 9] = [-0.7, -0.525, -0.35, -0.175, 0.0, 0.175, 0.35, 0.525, 0.7];

/// Conventional-test power levels of the relative power design.
pub const NOMINAL_POWER: [f64; 4] = [0.5, 0.6, 0.7, 0.8];

/// Correlations giving the conventional test 50/60/70/80% power at each n.
pub const RELATIVE_POWER_DESIGN: [(usize, [f64; 4]); 4] = [
    (10, [0.62, 0.67, 0.72, 0.78]),
    (30, [0.36, 0.40, 0.442, 0.49]),
    (50, [0.277, 0.311, 0.346, 0.386]),
    (100, [0.196, 0.221, 0.247, 0.277]),
];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("empty {0} list")]
    EmptyGrid(&'static str),
    #[error("correlation {0} outside (-1, 1)")]
    InvalidRho(f64),
    #[error("replication count must be at least 1")]
    ZeroReps,
    #[error("sample size {n} too small for this experiment (need n >= {min})")]
    SampleTooSmall { n: usize, min: usize },
    #[error("no relative power design for n = {0} (available: 10, 30, 50, 100)")]
    NoRelativeDesign(usize),
    #[error("thread pool: {0}")]
    ThreadPool(String),
    #[error(transparent)]
    Test(#[from] TestError),
}

/// How the power experiments decide that the matching test rejects.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum RejectionRule {
    /// Reject when `m >= 4`.
    #[default]
    FixedMGe4,
    /// Reject when `m` reaches the exact critical value at `alpha`.
    ExactAlpha,
}

impl RejectionRule {
    pub fn threshold(self, n: usize, alpha: f64) -> Result<CriticalValue, TestError> {
        match self {
            RejectionRule::FixedMGe4 => Ok(CriticalValue {
                m: 4,
                achieved_size: match_tail(n, 4),
            }),
            RejectionRule::ExactAlpha => critical_m(n, alpha, TestMode::Exact),
        }
    }
}

/// Controls seeding and parallelism of an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Simulator {
    streams: StreamFactory,
    threads: Option<usize>,
}

impl Simulator {
    pub fn new(master_seed: u64) -> Self {
        Self {
            streams: StreamFactory::new(master_seed),
            threads: None,
        }
    }

    /// Fix the worker count; `None` uses rayon's global pool.
    pub fn with_threads(mut self, threads: Option<usize>) -> Self {
        self.threads = threads;
        self
    }

    pub fn master_seed(&self) -> u64 {
        self.streams.master_seed()
    }

    /// Runs `f` once per replication and returns the results in replication order.
    fn replicate<T, F>(&self, cell: CellKey, reps: u64, f: F) -> Result<Vec<T>, ConfigError>
    where
        T: Send,
        F: Fn(&mut ChaCha8Rng) -> T + Sync,
    {
        let streams = self.streams;
        let job = || {
            (0..reps)
                .into_par_iter()
                .map(|rep| f(&mut streams.substream(cell, rep)))
                .collect()
        };
        match self.threads {
            None => Ok(job()),
            Some(t) => rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| ConfigError::ThreadPool(e.to_string()))
                .map(|pool| pool.install(job)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub n_list: Vec<usize>,
    pub rho_list: Vec<f64>,
    pub reps: u64,
    pub master_seed: u64,
    pub alpha: f64,
    pub rejection_rule: RejectionRule,
    pub threads: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n_list: POWER_N.to_vec(),
            rho_list: POWER_RHO.to_vec(),
            reps: DEFAULT_REPS,
            master_seed: 0,
            alpha: 0.05,
            rejection_rule: RejectionRule::FixedMGe4,
            threads: None,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.n_list.is_empty() {
            return Err(ConfigError::EmptyGrid("sample size"));
        }
        if self.reps == 0 {
            return Err(ConfigError::ZeroReps);
        }
        if let Some(&rho) = self.rho_list.iter().find(|r| r.is_nan() || r.abs() >= 1.0) {
            return Err(ConfigError::InvalidRho(rho));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(TestError::InvalidAlpha(self.alpha).into());
        }
        Ok(())
    }

    pub fn simulator(&self) -> Simulator {
        Simulator::new(self.master_seed).with_threads(self.threads)
    }
}

/// `n` draws with `X ~ N(0,1)` and `Y = rho X + sqrt(1 - rho^2) Z`.
pub fn bivariate_normal_sample<R: Rng + ?Sized>(
    n: usize,
    rho: f64,
    rng: &mut R,
) -> BivariateSample {
    assert!(rho.abs() <= 1.0, "correlation must lie in [-1, 1]");
    let scale = (1.0 - rho * rho).sqrt();
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let xi: f64 = rng.sample(StandardNormal);
        let zi: f64 = rng.sample(StandardNormal);
        x.push(xi);
        y.push(rho * xi + scale * zi);
    }
    BivariateSample::new(x, y).expect("normal deviates are finite")
}

/// Sample plus its ranks, with ties broken from the same stream.
fn draw_ranked(n: usize, rho: f64, rng: &mut ChaCha8Rng) -> (BivariateSample, RankedSample) {
    let sample = bivariate_normal_sample(n, rho, rng);
    let tie_seed = rng.next_u64();
    let ranked = sample
        .rank(TiePolicy::Random(tie_seed))
        .expect("random tie policy always ranks");
    (sample, ranked)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerCell {
    pub n: usize,
    pub rho: f64,
    pub power_matching: f64,
    pub power_pearson: f64,
    #[serde(rename = "reps")]
    pub reps_used: u64,
    /// Binomial standard error of `power_matching`.
    pub mc_stderr: f64,
}

fn power_cell(
    sim: &Simulator,
    n: usize,
    rho: f64,
    reps: u64,
    alpha: f64,
    threshold: usize,
) -> Result<PowerCell, ConfigError> {
    let cell = CellKey::new("power", n, rho);
    let outcomes = sim.replicate(cell, reps, |rng| {
        let (sample, ranked) = draw_ranked(n, rho, rng);
        let matching = matching_statistic(&ranked) >= threshold;
        let pearson = pearson_r(&sample)
            .map(|r| pearson_p_value(r, n) <= alpha)
            .unwrap_or(false);
        (matching, pearson)
    })?;
    let hits_m = outcomes.iter().filter(|o| o.0).count() as f64;
    let hits_r = outcomes.iter().filter(|o| o.1).count() as f64;
    let p = hits_m / reps as f64;
    Ok(PowerCell {
        n,
        rho,
        power_matching: p,
        power_pearson: hits_r / reps as f64,
        reps_used: reps,
        mc_stderr: (p * (1.0 - p) / reps as f64).sqrt(),
    })
}

fn check_n(n: usize, min: usize) -> Result<(), ConfigError> {
    if n < min {
        Err(ConfigError::SampleTooSmall { n, min })
    } else {
        Ok(())
    }
}

/// Matching and Pearson rejection rates for every `(n, rho)` cell, n-major.
pub fn power_experiment(config: &ExperimentConfig) -> Result<Vec<PowerCell>, ConfigError> {
    config.validate()?;
    if config.rho_list.is_empty() {
        return Err(ConfigError::EmptyGrid("correlation"));
    }
    let sim = config.simulator();
    let mut cells = Vec::with_capacity(config.n_list.len() * config.rho_list.len());
    for &n in &config.n_list {
        check_n(n, 4)?;
        let threshold = config.rejection_rule.threshold(n, config.alpha)?;
        for &rho in &config.rho_list {
            cells.push(power_cell(
                &sim,
                n,
                rho,
                config.reps,
                config.alpha,
                threshold.m,
            )?);
        }
    }
    Ok(cells)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RelativePowerCell {
    /// Power of the conventional test the design targets.
    pub nominal_power: f64,
    #[serde(flatten)]
    pub cell: PowerCell,
}

/// Matching power at correlations where the conventional test has
/// 50/60/70/80% power. Uses the fixed design in [`RELATIVE_POWER_DESIGN`]
/// for each `n` in `config.n_list`; `config.rho_list` is ignored.
pub fn relative_power_experiment(
    config: &ExperimentConfig,
) -> Result<Vec<RelativePowerCell>, ConfigError> {
    config.validate()?;
    let sim = config.simulator();
    let mut out = Vec::new();
    for &n in &config.n_list {
        let (_, rhos) = RELATIVE_POWER_DESIGN
            .iter()
            .find(|(dn, _)| *dn == n)
            .ok_or(ConfigError::NoRelativeDesign(n))?;
        let threshold = config.rejection_rule.threshold(n, config.alpha)?;
        for (&rho, &nominal_power) in rhos.iter().zip(&NOMINAL_POWER) {
            let cell = power_cell(&sim, n, rho, config.reps, config.alpha, threshold.m)?;
            out.push(RelativePowerCell {
                nominal_power,
                cell,
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JointStats {
    pub n: usize,
    pub corr_m_rho: f64,
    pub corr_rho_tau: f64,
    #[serde(rename = "std_slope")]
    pub std_slope_m_rho: f64,
    #[serde(rename = "r_squared")]
    pub r_squared_m_rho: f64,
    pub sd_m: f64,
    pub sd_rho: f64,
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let ss: f64 = v.iter().map(|x| (x - mean).powi(2)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}

/// Regression of `y` on `x`: standardized slope and `1 - SSE/SST`.
fn simple_regression(x: &[f64], y: &[f64]) -> (f64, f64) {
    let (mx, sx) = mean_sd(x);
    let (my, sy) = mean_sd(y);
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxx += (a - mx) * (a - mx);
        sxy += (a - mx) * (b - my);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    let sst: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    (slope * sx / sy, 1.0 - sse / sst)
}

/// Null-population joint behaviour of `m`, Spearman's rho and Kendall's tau.
pub fn joint_distribution_experiment(
    n: usize,
    reps: u64,
    sim: &Simulator,
) -> Result<JointStats, ConfigError> {
    check_n(n, 4)?;
    if reps < 2 {
        return Err(ConfigError::ZeroReps);
    }
    let draws = sim.replicate(CellKey::new("rae", n, 0.0), reps, |rng| {
        let (_, ranked) = draw_ranked(n, 0.0, rng);
        (
            matching_statistic(&ranked) as f64,
            spearman_rho(&ranked),
            kendall_tau(&ranked),
        )
    })?;
    let m: Vec<f64> = draws.iter().map(|d| d.0).collect();
    let rs: Vec<f64> = draws.iter().map(|d| d.1).collect();
    let tau: Vec<f64> = draws.iter().map(|d| d.2).collect();
    let (std_slope, r_squared) = simple_regression(&m, &rs);
    Ok(JointStats {
        n,
        corr_m_rho: pearson_slices(&m, &rs).unwrap_or(f64::NAN),
        corr_rho_tau: pearson_slices(&rs, &tau).unwrap_or(f64::NAN),
        std_slope_m_rho: std_slope,
        r_squared_m_rho: r_squared,
        sd_m: mean_sd(&m).1,
        sd_rho: mean_sd(&rs).1,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DispersionRow {
    pub n: usize,
    pub sd_m: f64,
    pub sd_rho: f64,
}

/// Monte Carlo standard deviations of `m` and Spearman's rho under the null.
pub fn dispersion_experiment(
    n_list: &[usize],
    reps: u64,
    sim: &Simulator,
) -> Result<Vec<DispersionRow>, ConfigError> {
    if n_list.is_empty() {
        return Err(ConfigError::EmptyGrid("sample size"));
    }
    if reps < 2 {
        return Err(ConfigError::ZeroReps);
    }
    n_list
        .iter()
        .map(|&n| {
            check_n(n, 2)?;
            let draws = sim.replicate(CellKey::new("dispersion", n, 0.0), reps, |rng| {
                let (_, ranked) = draw_ranked(n, 0.0, rng);
                (matching_statistic(&ranked) as f64, spearman_rho(&ranked))
            })?;
            let m: Vec<f64> = draws.iter().map(|d| d.0).collect();
            let rs: Vec<f64> = draws.iter().map(|d| d.1).collect();
            Ok(DispersionRow {
                n,
                sd_m: mean_sd(&m).1,
                sd_rho: mean_sd(&rs).1,
            })
        })
        .collect()
}

/// Position of `m` relative to its null expectation of 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MBucket {
    MLt1,
    MEq1,
    MGt1,
}

impl MBucket {
    pub const ALL: [MBucket; 3] = [MBucket::MLt1, MBucket::MEq1, MBucket::MGt1];

    pub fn of(m: usize) -> Self {
        match m {
            0 => MBucket::MLt1,
            1 => MBucket::MEq1,
            _ => MBucket::MGt1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            MBucket::MLt1 => "m_lt_1",
            MBucket::MEq1 => "m_eq_1",
            MBucket::MGt1 => "m_gt_1",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IndicatorRow {
    pub n: usize,
    pub rho: f64,
    #[serde(rename = "bucket")]
    pub m_bucket: MBucket,
    /// `P(r > rho | bucket)`; `None` when the bucket was never observed.
    pub prob_overestimate: Option<f64>,
    #[serde(rename = "count")]
    pub bucket_count: u64,
}

/// For each `rho`, how often Pearson's r overshoots `rho` given where `m` falls.
pub fn error_sign_experiment(
    n: usize,
    rho_list: &[f64],
    reps: u64,
    sim: &Simulator,
) -> Result<Vec<IndicatorRow>, ConfigError> {
    check_n(n, 4)?;
    if reps == 0 {
        return Err(ConfigError::ZeroReps);
    }
    if rho_list.is_empty() {
        return Err(ConfigError::EmptyGrid("correlation"));
    }
    let mut rows = Vec::with_capacity(rho_list.len() * 3);
    for &rho in rho_list {
        if rho.is_nan() || rho.abs() >= 1.0 {
            return Err(ConfigError::InvalidRho(rho));
        }
        let draws = sim.replicate(CellKey::new("indicator", n, rho), reps, |rng| {
            let (sample, ranked) = draw_ranked(n, rho, rng);
            let over = pearson_r(&sample).map(|r| r > rho).unwrap_or(false);
            (MBucket::of(matching_statistic(&ranked)), over)
        })?;
        for bucket in MBucket::ALL {
            let (count, over) = draws
                .iter()
                .filter(|d| d.0 == bucket)
                .fold((0u64, 0u64), |(c, o), d| (c + 1, o + d.1 as u64));
            rows.push(IndicatorRow {
                n,
                rho,
                m_bucket: bucket,
                prob_overestimate: (count > 0).then(|| over as f64 / count as f64),
                bucket_count: count,
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stream::StreamFactory;

    fn rng(seed: u64) -> ChaCha8Rng {
        StreamFactory::new(seed).substream(CellKey::new("unit", 0, 0.0), 0)
    }

    #[test]
    fn perfect_coupling_copies_x() {
        let s = bivariate_normal_sample(50, 1.0, &mut rng(1));
        assert_eq!(s.x(), s.y());
    }

    #[test]
    fn large_sample_correlation() {
        let s = bivariate_normal_sample(1_000_000, 0.0, &mut rng(2));
        assert!(pearson_r(&s).unwrap().abs() < 0.004);
        // sd of r at rho = .7 is (1 - .49)/sqrt(n) = 5.1e-4.
        let s = bivariate_normal_sample(1_000_000, 0.7, &mut rng(3));
        assert!((pearson_r(&s).unwrap() - 0.7).abs() < 0.003);
    }

    #[test]
    fn config_validation() {
        let ok = ExperimentConfig::default();
        assert!(ok.validate().is_ok());
        let bad = ExperimentConfig {
            rho_list: vec![1.0],
            ..ok.clone()
        };
        assert_eq!(bad.validate(), Err(ConfigError::InvalidRho(1.0)));
        let bad = ExperimentConfig {
            reps: 0,
            ..ok.clone()
        };
        assert_eq!(bad.validate(), Err(ConfigError::ZeroReps));
        let bad = ExperimentConfig {
            n_list: vec![3],
            rho_list: vec![0.0],
            reps: 10,
            ..ok.clone()
        };
        assert!(matches!(
            power_experiment(&bad),
            Err(ConfigError::SampleTooSmall { n: 3, .. })
        ));
        let bad = ExperimentConfig {
            n_list: vec![20],
            reps: 10,
            ..ok
        };
        assert_eq!(
            relative_power_experiment(&bad),
            Err(ConfigError::NoRelativeDesign(20))
        );
    }

    #[test]
    fn rules() {
        let c = RejectionRule::FixedMGe4.threshold(10, 0.05).unwrap();
        assert_eq!(c.m, 4);
        assert!((c.achieved_size - match_tail(10, 4)).abs() < 1e-15);
        let c = RejectionRule::ExactAlpha.threshold(10, 0.05).unwrap();
        assert_eq!(c, critical_m(10, 0.05, TestMode::Exact).unwrap());
    }

    #[test]
    fn regression_identity() {
        let x = [1.0, 2.0, 3.0, 5.0, 8.0];
        let y = [0.3, 0.1, 0.9, 0.4, 1.2];
        let (beta, r2) = simple_regression(&x, &y);
        let r = pearson_slices(&x, &y).unwrap();
        assert!((beta - r).abs() < 1e-12);
        assert!((r2 - r * r).abs() < 1e-12);
    }

    #[test]
    fn indicator_buckets_partition_reps() {
        let sim = Simulator::new(5);
        let rows = error_sign_experiment(15, &[-0.35, 0.35], 2_000, &sim).unwrap();
        assert_eq!(rows.len(), 6);
        for chunk in rows.chunks(3) {
            assert_eq!(chunk.iter().map(|r| r.bucket_count).sum::<u64>(), 2_000);
        }
    }

    #[test]
    fn power_cell_is_independent_of_grid_position() {
        let base = ExperimentConfig {
            n_list: vec![10, 30],
            rho_list: vec![0.0, 0.5],
            reps: 500,
            master_seed: 9,
            ..Default::default()
        };
        let full = power_experiment(&base).unwrap();
        let single = power_experiment(&ExperimentConfig {
            n_list: vec![30],
            rho_list: vec![0.5],
            ..base
        })
        .unwrap();
        assert_eq!(full[3], single[0]);
    }
}
