//! Fixed points between paired rank vectors as a test statistic.
//!
//! * [`combinatorics`]: exact and Poisson-limit distribution of the number
//!   of fixed points `m` of a random permutation.
//! * [`rank_stats`]: rank transform plus `m`, Spearman's rho, Kendall's tau
//!   and Pearson's r.
//! * [`inference`]: the matching-method test and the Pearson t-test.
//! * [`montecarlo`]: reproducible simulations of power, joint distribution,
//!   dispersion and error-sign behaviour of `m`.
//! * [`cli`]: the `matchstat` command-line front end.

pub mod cli;
pub mod combinatorics;
pub mod inference;
pub mod montecarlo;
pub mod rank_stats;
pub mod stream;
pub mod table;

pub use combinatorics::{
    derangement_count, match_count, match_pmf, match_tail, poisson_pmf, poisson_tail,
    MatchDistribution, PoissonModel,
};
pub use inference::{
    critical_m, matching_test, pearson_test, CriticalValue, TestError, TestMode, TestResult,
};
pub use montecarlo::{
    bivariate_normal_sample, dispersion_experiment, error_sign_experiment,
    joint_distribution_experiment, power_experiment, relative_power_experiment, ConfigError,
    ExperimentConfig, RejectionRule, Simulator,
};
pub use rank_stats::{
    kendall_tau, matching_statistic, pearson_r, rank_transform, spearman_rho, BivariateSample,
    RankError, RankedSample, TiePolicy,
};
