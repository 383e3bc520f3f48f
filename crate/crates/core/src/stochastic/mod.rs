//! Stochastic operator oracles with counter-based, reproducible noise.
//!
//! Sample `j` of iteration `k` draws its normals from a ChaCha8 stream keyed
//! by `(seed, k)` at stream index `j`, so any sample can be regenerated in
//! isolation and batches parallelize without changing a single bit.

use std::fmt::Debug;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SqviError};
use crate::scalar::{cst, to_f64, Real};

const KEY_PAD: [u8; 16] = *b"sqvi-sample-key!";
/// Samples per deterministic reduction chunk.
const CHUNK: usize = 512;
/// Below this many samples the batch is averaged on the calling thread.
const PARALLEL_THRESHOLD: usize = 4 * CHUNK;

/// Coordinates of one sample in the counter-based generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SampleStream {
    pub seed: u64,
    pub epoch: u64,
    pub counter: u64,
}

impl SampleStream {
    pub fn new(seed: u64, epoch: u64, counter: u64) -> Self {
        Self { seed, epoch, counter }
    }

    fn rng(&self) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&self.seed.to_le_bytes());
        key[8..16].copy_from_slice(&self.epoch.to_le_bytes());
        key[16..].copy_from_slice(&KEY_PAD);
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(self.counter);
        rng
    }

    /// First `n` standard normal variates of this stream.
    pub fn normals(&self, n: usize) -> Vec<f64> {
        let mut rng = self.rng();
        (0..n).map(|_| rng.sample(StandardNormal)).collect()
    }
}

/// `G(x, ξ)` with optional access to `F(x) = E[G(x, ξ)]`.
pub trait StochasticOracle<T: Real>: Send + Sync + Debug {
    fn dim(&self) -> usize;

    /// Exact mean operator, or [`SqviError::MeanUnavailable`].
    fn mean(&self, x: &[T]) -> Result<Vec<T>>;

    fn sample(&self, x: &[T], stream: &SampleStream) -> Result<Vec<T>>;

    fn has_mean(&self) -> bool {
        true
    }

    /// Known or advertised `ν` with `E‖G - F‖² <= ν²`.
    fn noise_scale_hint(&self) -> Option<T> {
        None
    }

    /// Samples equal the mean; batch averaging is skipped.
    fn is_deterministic(&self) -> bool {
        false
    }
}

/// `F(x) = A x + b`, `G(x, ξ) = F(x) + diag(s) ξ` with `ξ` standard normal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct AffineOracle<T: Real> {
    /// Row-major `d × d`.
    pub matrix: Vec<T>,
    pub offset: Vec<T>,
    /// Per-coordinate noise standard deviation.
    pub noise: Vec<T>,
}

impl<T: Real> AffineOracle<T> {
    pub fn new(matrix: Vec<T>, offset: Vec<T>, noise: Vec<T>) -> Result<Self> {
        let d = offset.len();
        if matrix.len() != d * d {
            return Err(SqviError::DimensionMismatch {
                expected: d * d,
                got: matrix.len(),
            });
        }
        if noise.len() != d {
            return Err(SqviError::DimensionMismatch {
                expected: d,
                got: noise.len(),
            });
        }
        if noise.iter().any(|&s| s < T::zero() || !s.is_finite()) {
            return Err(SqviError::InvalidConfig("noise scales must be finite and >= 0".into()));
        }
        Ok(Self { matrix, offset, noise })
    }

    fn apply(&self, x: &[T]) -> Vec<T> {
        let d = self.offset.len();
        (0..d)
            .map(|i| crate::scalar::dot(&self.matrix[i * d..(i + 1) * d], x) + self.offset[i])
            .collect()
    }
}

impl<T: Real> StochasticOracle<T> for AffineOracle<T> {
    fn dim(&self) -> usize {
        self.offset.len()
    }

    fn mean(&self, x: &[T]) -> Result<Vec<T>> {
        check_len(x, self.dim())?;
        Ok(self.apply(x))
    }

    fn sample(&self, x: &[T], stream: &SampleStream) -> Result<Vec<T>> {
        let mut g = self.mean(x)?;
        if !self.is_deterministic() {
            for ((gi, &s), z) in g.iter_mut().zip(&self.noise).zip(stream.normals(self.dim())) {
                *gi += s * cst::<T>(z);
            }
        }
        Ok(g)
    }

    fn noise_scale_hint(&self) -> Option<T> {
        Some(self.noise.iter().map(|&s| s * s).sum::<T>().sqrt())
    }

    fn is_deterministic(&self) -> bool {
        self.noise.iter().all(|&s| s == T::zero())
    }
}

pub(crate) fn check_len<T>(x: &[T], dim: usize) -> Result<()> {
    if x.len() == dim {
        Ok(())
    } else {
        Err(SqviError::DimensionMismatch {
            expected: dim,
            got: x.len(),
        })
    }
}

fn add_into<T: Real>(acc: &mut [T], other: &[T]) {
    for (a, &b) in acc.iter_mut().zip(other) {
        *a += b;
    }
}

/// Pairwise sum of samples `lo..hi` (1-based counters).
fn pairwise_samples<T: Real>(
    oracle: &dyn StochasticOracle<T>,
    x: &[T],
    seed: u64,
    epoch: u64,
    lo: u64,
    hi: u64,
) -> Result<Vec<T>> {
    if hi - lo <= 8 {
        let mut acc = vec![T::zero(); oracle.dim()];
        for j in lo..hi {
            add_into(&mut acc, &oracle.sample(x, &SampleStream::new(seed, epoch, j))?);
        }
        return Ok(acc);
    }
    let mid = lo + (hi - lo) / 2;
    let mut left = pairwise_samples(oracle, x, seed, epoch, lo, mid)?;
    add_into(&mut left, &pairwise_samples(oracle, x, seed, epoch, mid, hi)?);
    Ok(left)
}

fn pairwise_reduce<T: Real>(parts: &[Vec<T>]) -> Vec<T> {
    match parts.len() {
        0 => unreachable!("at least one chunk"),
        1 => parts[0].clone(),
        n => {
            let mut left = pairwise_reduce(&parts[..n / 2]);
            add_into(&mut left, &pairwise_reduce(&parts[n / 2..]));
            left
        }
    }
}

/// `(1/n) Σ_{j=1..n} G(x, ξ_j)` with `ξ_j` from stream `(seed, epoch, j)`.
///
/// Samples are grouped into fixed chunks; chunk sums are computed in parallel
/// for large batches and always combined in the same pairwise order, so the
/// result does not depend on the number of worker threads.
pub fn batch_average<T: Real>(
    oracle: &dyn StochasticOracle<T>,
    x: &[T],
    n: u64,
    seed: u64,
    epoch: u64,
) -> Result<Vec<T>> {
    if n == 0 {
        return Err(SqviError::InvalidConfig("batch size must be >= 1".into()));
    }
    check_len(x, oracle.dim())?;
    if oracle.is_deterministic() {
        return oracle.mean(x);
    }
    let chunk = CHUNK as u64;
    let chunks = n.div_ceil(chunk);
    let chunk_sum = |c: u64| {
        let lo = 1 + c * chunk;
        let hi = (lo + chunk).min(n + 1);
        pairwise_samples(oracle, x, seed, epoch, lo, hi)
    };
    let parts: Vec<Vec<T>> = if n as usize >= PARALLEL_THRESHOLD {
        (0..chunks).into_par_iter().map(chunk_sum).collect::<Result<_>>()?
    } else {
        (0..chunks).map(chunk_sum).collect::<Result<_>>()?
    };
    let mut total = pairwise_reduce(&parts);
    let inv = T::one() / cst::<T>(n as f64);
    for t in total.iter_mut() {
        *t *= inv;
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseRow {
    pub n: u64,
    /// Estimated `E‖w̄_n‖²`.
    pub mean_sq_error: f64,
    /// `n · E‖w̄_n‖²`.
    pub nu_sq_hat: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseDiagnostic {
    pub rows: Vec<NoiseRow>,
    pub nu_sq_max: f64,
    /// Least-squares slope of `log E‖w̄‖²` against `log n` (`None` if undefined).
    pub slope: Option<f64>,
}

/// Empirical check of `E‖w̄_n‖² <= ν²/n` at `x`.
///
/// Replication `r` of batch size index `i` uses epoch `i * replications + r`,
/// so every batch is independent of every other.
pub fn noise_diagnostic<T: Real>(
    oracle: &dyn StochasticOracle<T>,
    x: &[T],
    n_values: &[u64],
    replications: usize,
    seed: u64,
) -> Result<NoiseDiagnostic> {
    if replications == 0 {
        return Err(SqviError::InvalidConfig("replications must be >= 1".into()));
    }
    let mean = oracle.mean(x)?;
    let mut rows = Vec::with_capacity(n_values.len());
    for (i, &n) in n_values.iter().enumerate() {
        let errs: Vec<f64> = (0..replications)
            .into_par_iter()
            .map(|r| {
                let epoch = (i * replications + r) as u64;
                let avg = batch_average(oracle, x, n, seed, epoch)?;
                Ok(avg
                    .iter()
                    .zip(&mean)
                    .map(|(&a, &m)| to_f64(a - m).powi(2))
                    .sum::<f64>())
            })
            .collect::<Result<_>>()?;
        let mean_sq_error = errs.iter().sum::<f64>() / replications as f64;
        rows.push(NoiseRow {
            n,
            mean_sq_error,
            nu_sq_hat: n as f64 * mean_sq_error,
        });
    }
    let nu_sq_max = rows.iter().map(|r| r.nu_sq_hat).fold(0.0, f64::max);
    let slope = loglog_slope(rows.iter().map(|r| (r.n as f64, r.mean_sq_error)));
    Ok(NoiseDiagnostic { rows, nu_sq_max, slope })
}

/// Least-squares slope of `ln y` against `ln x` over points with `x, y > 0`.
pub fn loglog_slope(points: impl IntoIterator<Item = (f64, f64)>) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .into_iter()
        .filter(|&(x, y)| x > 0.0 && y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}
