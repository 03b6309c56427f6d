//! Ranks and the four sample statistics computed from a paired sample:
//! the matching statistic `m`, Spearman's rho, Kendall's tau and Pearson's r.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RankError {
    #[error("need at least 2 observations, got {0}")]
    TooShort(usize),
    #[error("paired vectors differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("non-finite value at position {0}")]
    NonFinite(usize),
    #[error("tied values present (first tie at value {0}); the matching statistic needs a tie-breaking policy")]
    TiesPresent(f64),
    #[error("variable has zero variance")]
    ZeroVariance,
    #[error("rank vector is not a permutation of 1..={0}")]
    NotAPermutation(usize),
}

/// How tied observations receive ranks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TiePolicy {
    #[default]
    Reject,
    /// Tied values get distinct ranks in a uniformly shuffled order.
    Random(u64),
}

/// Paired real observations.
#[derive(Debug, Clone, PartialEq)]
pub struct BivariateSample {
    x: Vec<f64>,
    y: Vec<f64>,
}

impl BivariateSample {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self, RankError> {
        if x.len() != y.len() {
            return Err(RankError::LengthMismatch(x.len(), y.len()));
        }
        if x.len() < 2 {
            return Err(RankError::TooShort(x.len()));
        }
        if let Some(i) = x
            .iter()
            .zip(&y)
            .position(|(a, b)| !a.is_finite() || !b.is_finite())
        {
            return Err(RankError::NonFinite(i));
        }
        Ok(Self { x, y })
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    /// Ranks both margins. Under [`TiePolicy::Random`] the two margins use
    /// different derived seeds so their tie-breaks are independent.
    pub fn rank(&self, policy: TiePolicy) -> Result<RankedSample, RankError> {
        let (px, py) = match policy {
            TiePolicy::Reject => (TiePolicy::Reject, TiePolicy::Reject),
            TiePolicy::Random(seed) => (
                TiePolicy::Random(seed),
                TiePolicy::Random(seed ^ 0x9E37_79B9_7F4A_7C15),
            ),
        };
        let rx = rank_transform(&self.x, px)?;
        let ry = rank_transform(&self.y, py)?;
        Ok(RankedSample { rx, ry })
    }
}

/// Two rank vectors, each a permutation of `1..=n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankedSample {
    rx: Vec<u32>,
    ry: Vec<u32>,
}

impl RankedSample {
    pub fn new(rx: Vec<u32>, ry: Vec<u32>) -> Result<Self, RankError> {
        if rx.len() != ry.len() {
            return Err(RankError::LengthMismatch(rx.len(), ry.len()));
        }
        if rx.len() < 2 {
            return Err(RankError::TooShort(rx.len()));
        }
        if !is_permutation(&rx) || !is_permutation(&ry) {
            return Err(RankError::NotAPermutation(rx.len()));
        }
        Ok(Self { rx, ry })
    }

    pub fn n(&self) -> usize {
        self.rx.len()
    }

    pub fn rx(&self) -> &[u32] {
        &self.rx
    }

    pub fn ry(&self) -> &[u32] {
        &self.ry
    }
}

fn is_permutation(r: &[u32]) -> bool {
    let n = r.len();
    let mut seen = vec![false; n];
    r.iter().all(|&v| {
        let i = v as usize;
        if i == 0 || i > n || seen[i - 1] {
            return false;
        }
        seen[i - 1] = true;
        true
    })
}

/// Ranks `1..=n`, 1 for the smallest value.
pub fn rank_transform(values: &[f64], policy: TiePolicy) -> Result<Vec<u32>, RankError> {
    let n = values.len();
    if n < 2 {
        return Err(RankError::TooShort(n));
    }
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(RankError::NonFinite(i));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));

    let mut rng = match policy {
        TiePolicy::Reject => None,
        TiePolicy::Random(seed) => Some(ChaCha8Rng::seed_from_u64(seed)),
    };
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        // -0.0 and 0.0 compare equal as values, so group by ==, not total order.
        while end < n && values[order[end]] == values[order[start]] {
            end += 1;
        }
        if end - start > 1 {
            match rng.as_mut() {
                None => return Err(RankError::TiesPresent(values[order[start]])),
                Some(rng) => order[start..end].shuffle(rng),
            }
        }
        start = end;
    }

    let mut ranks = vec![0u32; n];
    for (pos, &idx) in order.iter().enumerate() {
        ranks[idx] = pos as u32 + 1;
    }
    Ok(ranks)
}

/// Number of observations whose two ranks coincide.
pub fn matching_statistic(rs: &RankedSample) -> usize {
    rs.rx.iter().zip(&rs.ry).filter(|(a, b)| a == b).count()
}

/// `1 - 6 sum d^2 / (n(n^2 - 1))`, exact for tie-free ranks.
pub fn spearman_rho(rs: &RankedSample) -> f64 {
    let n = rs.n() as f64;
    let d2: i64 = rs
        .rx
        .iter()
        .zip(&rs.ry)
        .map(|(&a, &b)| {
            let d = a as i64 - b as i64;
            d * d
        })
        .sum();
    1.0 - 6.0 * d2 as f64 / (n * (n * n - 1.0))
}

/// Tau-a over all `n(n-1)/2` pairs.
pub fn kendall_tau(rs: &RankedSample) -> f64 {
    let n = rs.n();
    let mut score: i64 = 0;
    for i in 0..n {
        for j in (i + 1)..n {
            let sx = (rs.rx[i] as i64 - rs.rx[j] as i64).signum();
            let sy = (rs.ry[i] as i64 - rs.ry[j] as i64).signum();
            score += sx * sy;
        }
    }
    let pairs = (n * (n - 1) / 2) as f64;
    score as f64 / pairs
}

/// Product-moment correlation of the raw sample, clamped to `[-1, 1]`.
pub fn pearson_r(s: &BivariateSample) -> Result<f64, RankError> {
    pearson_slices(&s.x, &s.y)
}

pub(crate) fn pearson_slices(x: &[f64], y: &[f64]) -> Result<f64, RankError> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(RankError::ZeroVariance);
    }
    let r = (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0);
    // Exactly collinear data can miss +-1 by a few ulps.
    if 1.0 - r.abs() < 8.0 * f64::EPSILON {
        return Ok(r.signum());
    }
    Ok(r)
}
