//! Rates adjusted thresholding: choose the number of bootstrapped auxiliary
//! variables from a target false-positive rate, derive the screening cutoff
//! from them, and select the reduced model.

use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::screening::utility::ScreeningResponse;
use crate::seeds;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThresholdMode {
    #[default]
    Rate,
    Hard,
    TopK,
}

impl std::str::FromStr for ThresholdMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rate" => Ok(ThresholdMode::Rate),
            "hard" => Ok(ThresholdMode::Hard),
            "topk" => Ok(ThresholdMode::TopK),
            other => Err(Error::InvalidParameter(format!("unknown threshold mode {other:?}"))),
        }
    }
}

/// Thresholding rule for one screening stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateParams {
    /// Target false-positive-rate level.
    pub alpha: f64,
    /// One minus the confidence level.
    pub beta: f64,
    pub mode: ThresholdMode,
    /// HARD keeps the top ⌈multiplier · n / ln n⌉ candidates.
    pub hard_multiplier: f64,
    /// TOPK keeps the top `k` candidates.
    pub k: usize,
}

impl RateParams {
    pub fn rate(alpha: f64, beta: f64) -> Self {
        RateParams { alpha, beta, mode: ThresholdMode::Rate, hard_multiplier: 1.0, k: 0 }
    }

    pub fn hard(multiplier: f64) -> Self {
        RateParams { alpha: 0.0, beta: 0.0, mode: ThresholdMode::Hard, hard_multiplier: multiplier, k: 0 }
    }

    pub fn top_k(k: usize) -> Self {
        RateParams { alpha: 0.0, beta: 0.0, mode: ThresholdMode::TopK, hard_multiplier: 1.0, k }
    }

    pub fn validate(&self) -> Result<()> {
        match self.mode {
            ThresholdMode::Rate => {
                for (name, v) in [("alpha", self.alpha), ("beta", self.beta)] {
                    if !(v > 0.0 && v < 1.0) {
                        return Err(Error::InvalidParameter(format!("{name} = {v} must lie in (0, 1)")));
                    }
                }
            }
            ThresholdMode::Hard => {
                if !(self.hard_multiplier > 0.0 && self.hard_multiplier.is_finite()) {
                    return Err(Error::InvalidParameter("hard multiplier must be positive".into()));
                }
            }
            ThresholdMode::TopK => {}
        }
        Ok(())
    }
}

/// Solution of the auxiliary-count equation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuxiliaryCount {
    pub d: usize,
    /// f(d) = {1 - α(p_n - n)/(p_n + d)}^d ≤ β.
    pub f_d: f64,
    /// f(d - 1) > β (f(0) = 1).
    pub f_prev: f64,
}

/// ln f(d) for the auxiliary-count equation.
pub fn log_fpr_bound(p_n: usize, n: usize, alpha: f64, d: u64) -> f64 {
    if d == 0 {
        return 0.0;
    }
    let c = alpha * (p_n as f64 - n as f64);
    let d = d as f64;
    d * (-c / (p_n as f64 + d)).ln_1p()
}

const MAX_AUXILIARY: u64 = 1 << 40;

/// Smallest d ≥ 1 with f(d) ≤ β, found by doubling then bisection on ln f.
pub fn solve_num_auxiliary(p_n: usize, n: usize, alpha: f64, beta: f64) -> Result<AuxiliaryCount> {
    if p_n <= n {
        return Err(Error::RateTooFewCandidates { p_n, n });
    }
    if !(alpha > 0.0 && alpha < 1.0 && beta > 0.0 && beta < 1.0) {
        return Err(Error::InvalidParameter(format!("alpha = {alpha}, beta = {beta} must lie in (0, 1)")));
    }
    let lhs = alpha * (p_n - n) as f64;
    let rhs = (1.0 / beta).ln();
    // inf_d f(d) = exp(-α(p_n - n)); at or above β no d reaches the target.
    if lhs <= rhs * (1.0 + 1e-12) {
        return Err(Error::RateInfeasible { lhs, rhs });
    }
    let target = beta.ln();
    let below = |d: u64| log_fpr_bound(p_n, n, alpha, d) <= target;
    let mut hi = 1u64;
    while !below(hi) {
        hi *= 2;
        if hi > MAX_AUXILIARY {
            return Err(Error::RateInfeasible { lhs, rhs });
        }
    }
    let mut lo = hi / 2; // below(lo) is false (or lo = 0)
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if below(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let d = hi;
    Ok(AuxiliaryCount {
        d: d as usize,
        f_d: log_fpr_bound(p_n, n, alpha, d).exp(),
        f_prev: log_fpr_bound(p_n, n, alpha, d - 1).exp(),
    })
}

/// A set of candidate columns that can be materialized one at a time.
pub trait CandidatePool: Sync {
    fn len(&self) -> usize;
    fn n(&self) -> usize;
    fn fill(&self, idx: usize, out: &mut [f64]);

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Pool over explicit columns.
pub struct ColumnPool<'a> {
    columns: &'a [Vec<f64>],
    n: usize,
}

impl<'a> ColumnPool<'a> {
    pub fn new(columns: &'a [Vec<f64>]) -> Result<Self> {
        let n = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != n) {
            return Err(Error::Dimension("pool columns have unequal lengths".into()));
        }
        Ok(ColumnPool { columns, n })
    }
}

impl CandidatePool for ColumnPool<'_> {
    fn len(&self) -> usize {
        self.columns.len()
    }

    fn n(&self) -> usize {
        self.n
    }

    fn fill(&self, idx: usize, out: &mut [f64]) {
        out.copy_from_slice(&self.columns[idx]);
    }
}

const PERMUTATION_TAG: u64 = 0x5045_524d;
const AUXILIARY_TAG: u64 = 0x4155_5849;

/// Source column for each auxiliary variable: successive elements of seeded
/// random permutations of the candidates, a fresh permutation per pass when
/// d exceeds the pool size.
pub fn auxiliary_sources(pool_len: usize, d: usize, seed: u64) -> Vec<usize> {
    if pool_len == 0 {
        return Vec::new();
    }
    let mut out = Vec::with_capacity(d);
    let mut pass = 0u64;
    while out.len() < d {
        let take = (d - out.len()).min(pool_len);
        let mut rng = seeds::rng_at(seed, &[PERMUTATION_TAG, pass]);
        out.extend(index::sample(&mut rng, pool_len, take));
        pass += 1;
    }
    out
}

/// Fill `out` with auxiliary column `k` drawn from `source`: each row takes a
/// uniformly chosen value from the other n - 1 rows of the source.
pub fn auxiliary_column(source: &[f64], k: usize, seed: u64, out: &mut [f64]) {
    let n = source.len();
    let mut rng = seeds::rng_at(seed, &[AUXILIARY_TAG, k as u64]);
    for (i, o) in out.iter_mut().enumerate() {
        let mut r = rng.random_range(0..n - 1);
        if r >= i {
            r += 1;
        }
        *o = source[r];
    }
}

/// Materialize `d` auxiliary variables from a pool.
pub fn bootstrap_auxiliary<P: CandidatePool + ?Sized>(pool: &P, d: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let n = pool.n();
    if n < 2 {
        return Err(Error::Dimension("bootstrap needs at least 2 samples".into()));
    }
    if pool.is_empty() {
        return Err(Error::Dimension("bootstrap needs at least one candidate".into()));
    }
    let sources = auxiliary_sources(pool.len(), d, seed);
    let mut src = vec![0.0; n];
    Ok(sources
        .iter()
        .enumerate()
        .map(|(k, &c)| {
            pool.fill(c, &mut src);
            let mut z = vec![0.0; n];
            auxiliary_column(&src, k, seed, &mut z);
            z
        })
        .collect())
}

/// C_d: the largest utility over the auxiliary variables.
pub fn rate_cutoff(aux: &[Vec<f64>], response: &ScreeningResponse) -> f64 {
    let mut scratch = vec![0.0; response.n()];
    aux.iter()
        .map(|z| response.utility(z, &mut scratch))
        .fold(0.0, f64::max)
}

/// Same as bootstrapping then [`rate_cutoff`], streamed in parallel batches
/// without holding the d auxiliary columns.
pub fn streaming_cutoff<P: CandidatePool + ?Sized>(
    pool: &P,
    d: usize,
    seed: u64,
    response: &ScreeningResponse,
    batch: usize,
) -> f64 {
    let n = pool.n();
    let sources = auxiliary_sources(pool.len(), d, seed);
    sources
        .par_chunks(batch.max(1))
        .enumerate()
        .map(|(b, chunk)| {
            let (mut src, mut z, mut scratch) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
            let mut best = 0.0f64;
            for (off, &c) in chunk.iter().enumerate() {
                pool.fill(c, &mut src);
                auxiliary_column(&src, b * batch.max(1) + off, seed, &mut z);
                best = best.max(response.utility(&z, &mut scratch));
            }
            best
        })
        .reduce(|| 0.0, f64::max)
}

/// Utilities of every candidate, computed in parallel batches and returned
/// in candidate order.
pub fn pool_utilities<P: CandidatePool + ?Sized>(pool: &P, response: &ScreeningResponse, batch: usize) -> Vec<f64> {
    let n = pool.n();
    let batch = batch.max(1);
    let mut out = vec![0.0; pool.len()];
    out.par_chunks_mut(batch).enumerate().for_each(|(b, chunk)| {
        let (mut col, mut scratch) = (vec![0.0; n], vec![0.0; n]);
        for (off, u) in chunk.iter_mut().enumerate() {
            pool.fill(b * batch + off, &mut col);
            *u = response.utility(&col, &mut scratch);
        }
    });
    out
}

/// Model size of the hard threshold ⌈multiplier · n / ln n⌉.
pub fn hard_model_size(n: usize, multiplier: f64) -> usize {
    (multiplier * n as f64 / (n as f64).ln()).ceil() as usize
}

/// What the selection rule compares against.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cutoff {
    /// Keep utilities strictly above the value.
    Value(f64),
    /// Keep the top `k` by utility.
    Size(usize),
}

impl Cutoff {
    pub fn for_params(params: &RateParams, n: usize, rate_cutoff: Option<f64>) -> Result<Self> {
        Ok(match params.mode {
            ThresholdMode::Rate => Cutoff::Value(rate_cutoff.ok_or_else(|| {
                Error::InvalidParameter("RATE selection needs a computed cutoff".into())
            })?),
            ThresholdMode::Hard => Cutoff::Size(hard_model_size(n, params.hard_multiplier)),
            ThresholdMode::TopK => Cutoff::Size(params.k),
        })
    }
}

/// Indices of selected candidates ordered by decreasing utility, ties broken
/// by lower index.
pub fn select(utilities: &[f64], cutoff: Cutoff) -> Vec<usize> {
    let mut idx: Vec<usize> = match cutoff {
        Cutoff::Value(c) => (0..utilities.len()).filter(|&i| utilities[i] > c).collect(),
        Cutoff::Size(_) => (0..utilities.len()).collect(),
    };
    idx.sort_by(|&a, &b| utilities[b].total_cmp(&utilities[a]).then(a.cmp(&b)));
    if let Cutoff::Size(k) = cutoff {
        idx.truncate(k);
    }
    idx
}
