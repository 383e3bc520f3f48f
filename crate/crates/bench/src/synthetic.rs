//! Strongly monotone affine instances with a known interior solution.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use sqvi::stochastic::AffineOracle;
use sqvi::{Constants, MovingSet, Problem, StrongMonotonicityData};

use crate::error::{BenchError, Result};

/// `e_k = 0` on box-only sets, so any positive inner constant is valid.
const BOX_ONLY_INNER_C: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub dim: usize,
    pub mu: f64,
    pub lipschitz: f64,
    /// `E‖G - F‖² = ν²`, spread evenly over coordinates.
    pub nu: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            dim: 10,
            mu: 1.0,
            lipschitz: 10.0,
            nu: 1.0,
            seed: 0,
        }
    }
}

pub struct Synthetic {
    pub problem: Problem,
    pub constants: Constants,
    pub matrix: DMatrix<f64>,
}

/// `F(x) = A(x - x̂)`, `A = Qᵀ diag(μ..L) Q` for a random orthogonal `Q`,
/// `x̂` uniform in `[-1, 1]^d`, box `[-2, 2]^d`.
pub fn make_synthetic(spec: &SyntheticSpec) -> Result<Synthetic> {
    let d = spec.dim;
    if d == 0 {
        return Err(BenchError::Config("synthetic dimension must be >= 1".into()));
    }
    if !(spec.mu > 0.0 && spec.mu <= spec.lipschitz) || !(spec.nu >= 0.0) {
        return Err(BenchError::Config(format!(
            "synthetic instance needs 0 < mu <= L and nu >= 0 (mu = {}, L = {}, nu = {})",
            spec.mu, spec.lipschitz, spec.nu
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let gauss = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let q = gauss.qr().q();
    let spectrum = DVector::from_fn(d, |i, _| {
        if d == 1 {
            spec.mu
        } else {
            spec.mu + (spec.lipschitz - spec.mu) * i as f64 / (d - 1) as f64
        }
    });
    let a = q.transpose() * DMatrix::from_diagonal(&spectrum) * &q;
    let a = (&a + a.transpose()) * 0.5;
    let x_hat: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
    let offset = -(&a * DVector::from_column_slice(&x_hat));

    let row_major: Vec<f64> = (0..d).flat_map(|i| (0..d).map(move |j| (i, j))).map(|(i, j)| a[(i, j)]).collect();
    let per_coord = spec.nu / (d as f64).sqrt();
    let oracle = AffineOracle::new(row_major, offset.as_slice().to_vec(), vec![per_coord; d])?;
    let set = MovingSet::boxed(vec![-2.0; d], vec![2.0; d])?;
    let problem = Problem::new(Arc::new(oracle), set)?.with_reference(x_hat)?;
    let constants = StrongMonotonicityData::new(spec.mu, spec.lipschitz, 0.0, spec.nu, BOX_ONLY_INNER_C)?;
    Ok(Synthetic {
        problem,
        constants,
        matrix: a,
    })
}
