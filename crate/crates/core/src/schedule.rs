//! Sample-size and inner-budget schedules.
//!
//! `N_k = ceil(rho^(-2k))` samples are averaged at outer iteration `k`, and the
//! inner projection method receives `t_k = ceil((k+1) ln^2(k+2) / rho^k)`
//! iterations. Both values go through [`guarded_ceil`], which snaps values
//! lying within 8 ulps of an integer onto that integer before taking the
//! ceiling, so exact powers such as `0.5^-4` never round up to 17.

use crate::error::{Result, SqviError};
use crate::scalar::{cst, Real};

/// Ceiling that treats values within 8 ulps of an integer as that integer.
pub fn guarded_ceil<T: Real>(value: T) -> T {
    let nearest = value.round();
    let tol = cst::<T>(8.0) * T::epsilon() * value.abs().max(T::one());
    if (value - nearest).abs() <= tol {
        nearest
    } else {
        value.ceil()
    }
}

fn check_rho<T: Real>(rho: T) -> Result<()> {
    if rho > T::zero() && rho < T::one() {
        Ok(())
    } else {
        Err(SqviError::InvalidConfig(format!(
            "rho must lie in (0, 1), got {rho}"
        )))
    }
}

fn to_count<T: Real>(value: T, what: &'static str, k: usize) -> Result<u64> {
    // Anything past 2^63 is beyond a meaningful iteration or sample count.
    if !value.is_finite() || value >= cst::<T>(2f64.powi(63)) {
        return Err(SqviError::Overflow { what, k });
    }
    value
        .to_u64()
        .map(|n| n.max(1))
        .ok_or(SqviError::Overflow { what, k })
}

/// Mini-batch size `ceil(rho^(-2k))`.
pub fn batch_size<T: Real>(k: usize, rho: T) -> Result<u64> {
    check_rho(rho)?;
    if k == 0 {
        return Ok(1);
    }
    let exponent = i32::try_from(k)
        .ok()
        .and_then(|k| k.checked_mul(2))
        .ok_or(SqviError::Overflow { what: "batch size", k })?;
    to_count(guarded_ceil(rho.powi(-exponent)), "batch size", k)
}

/// Batch size with an optional hard cap. Returns the size and whether the cap engaged.
pub fn capped_batch_size<T: Real>(k: usize, rho: T, cap: Option<u64>) -> Result<(u64, bool)> {
    match (batch_size(k, rho), cap) {
        (Ok(n), Some(cap)) if n > cap => Ok((cap, true)),
        (Ok(n), _) => Ok((n, false)),
        (Err(SqviError::Overflow { .. }), Some(cap)) => Ok((cap, true)),
        (Err(e), _) => Err(e),
    }
}

/// Inner iteration budget `ceil((k+1) ln^2(k+2) / rho^k)`, at least 1.
pub fn inner_budget<T: Real>(k: usize, rho: T) -> Result<u64> {
    check_rho(rho)?;
    let exponent = i32::try_from(k).map_err(|_| SqviError::Overflow {
        what: "inner budget",
        k,
    })?;
    let kf = cst::<T>(k as f64);
    let log = (kf + cst(2.0)).ln();
    let value = (kf + T::one()) * log * log / rho.powi(exponent);
    to_count(guarded_ceil(value), "inner budget", k)
}

/// `Σ_{k<T} N_k`, the number of operator samples drawn over a horizon.
pub fn total_samples<T: Real>(horizon: usize, rho: T, cap: Option<u64>) -> Result<u64> {
    (0..horizon).try_fold(0u64, |acc, k| {
        let (n, _) = capped_batch_size(k, rho, cap)?;
        acc.checked_add(n).ok_or(SqviError::Overflow {
            what: "total samples",
            k,
        })
    })
}

/// `Σ_{k<T} t_k`, the total inner budget over a horizon.
pub fn total_inner_budget<T: Real>(horizon: usize, rho: T) -> Result<u64> {
    (0..horizon).try_fold(0u64, |acc, k| {
        acc.checked_add(inner_budget(k, rho)?)
            .ok_or(SqviError::Overflow {
                what: "total inner budget",
                k,
            })
    })
}
