//! Numerical estimates of `μ` and `L` from the mean operator.

use nalgebra::DMatrix;

use crate::error::{Result, SqviError};
use crate::problem::QviProblem;
use crate::scalar::{cst, to_f64, Real};
use crate::stochastic::StochasticOracle;
use crate::theory::StrongMonotonicityData;

/// Relative finite-difference step.
pub const FD_STEP: f64 = 1e-6;

/// Central-difference Jacobian of the mean operator at `x`, in `f64`.
pub fn jacobian_fd<T: Real>(oracle: &dyn StochasticOracle<T>, x: &[T]) -> Result<DMatrix<f64>> {
    let d = x.len();
    let mut jac = DMatrix::zeros(d, d);
    let mut probe = x.to_vec();
    for j in 0..d {
        let h = FD_STEP * to_f64(x[j]).abs().max(1.0);
        probe[j] = x[j] + cst(h);
        let plus = oracle.mean(&probe)?;
        probe[j] = x[j] - cst(h);
        let minus = oracle.mean(&probe)?;
        probe[j] = x[j];
        for i in 0..d {
            jac[(i, j)] = (to_f64(plus[i]) - to_f64(minus[i])) / (2.0 * h);
        }
    }
    Ok(jac)
}

/// `(λ_min of the symmetric part, σ_max)` of a Jacobian.
pub fn local_constants(jac: &DMatrix<f64>) -> (f64, f64) {
    let sym = (jac + jac.transpose()) * 0.5;
    let mu = sym.symmetric_eigenvalues().min();
    let lip = jac.singular_values().max();
    (mu, lip)
}

/// Estimates `(μ, L)` as the worst local values over `points` (the box
/// midpoint and, in up to 10 dimensions, every box vertex when `points` is
/// empty). `γ` is set to 0 with a warning; the result is flagged as estimated.
pub fn estimate_constants<T: Real>(
    problem: &QviProblem<T>,
    points: &[Vec<T>],
    nu: T,
    inner_c: T,
) -> Result<StrongMonotonicityData<T>> {
    let set = &problem.moving_set;
    let owned;
    let points = if points.is_empty() {
        owned = default_points(set.lower(), set.upper());
        &owned
    } else {
        points
    };
    let mut mu = f64::INFINITY;
    let mut lip: f64 = 0.0;
    for p in points {
        let (m, l) = local_constants(&jacobian_fd(problem.oracle.as_ref(), p)?);
        mu = mu.min(m);
        lip = lip.max(l);
    }
    if !(mu > 0.0) {
        return Err(SqviError::Numerical(format!(
            "estimated strong-monotonicity modulus {mu} is not positive"
        )));
    }
    log::warn!("gamma has no estimator; using gamma = 0");
    Ok(StrongMonotonicityData::new(cst(mu), cst(lip.max(mu)), T::zero(), nu, inner_c)?.estimated())
}

fn default_points<T: Real>(lo: &[T], hi: &[T]) -> Vec<Vec<T>> {
    let d = lo.len();
    let mut pts = vec![lo.iter().zip(hi).map(|(&l, &h)| (l + h) / cst(2.0)).collect()];
    if d <= 10 {
        for corner in 0u32..(1 << d) {
            pts.push((0..d).map(|j| if corner & (1 << j) != 0 { hi[j] } else { lo[j] }).collect());
        }
    }
    pts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::projection::MovingSet;
    use crate::stochastic::AffineOracle;
    use std::sync::Arc;

    #[test]
    fn recovers_affine_spectrum() {
        // Symmetric part diag(2, 5); the skew part only raises σ_max.
        let a = vec![2.0_f64, 1.0, -1.0, 5.0];
        let oracle = AffineOracle::new(a.clone(), vec![0.0, 0.0], vec![0.0, 0.0]).unwrap();
        let set = MovingSet::boxed(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap();
        let p = QviProblem::new(Arc::new(oracle), set).unwrap();
        let c = estimate_constants(&p, &[], 0.0, 1.0).unwrap();
        assert!((c.mu - 2.0).abs() < 1e-6);
        let exact = DMatrix::from_row_slice(2, 2, &a).singular_values().max();
        assert!((c.lipschitz - exact).abs() < 1e-6);
        assert_eq!(c.provenance, crate::theory::Provenance::Estimated);
    }
}
