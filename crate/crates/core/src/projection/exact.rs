//! Exact projection by active-set enumeration.
//!
//! For a block of dimension `d` with affine constraints `a_iᵀy + c_i <= 0`,
//! every combination of {free, at lower, at upper} per coordinate and every
//! subset `S` of constraints with `|S| + #fixed <= d` is tried in order of
//! increasing size. For a candidate, the free coordinates are
//! `y_F = v_F - A_{S,F}ᵀ λ` with `λ` from the Gram system of the active rows;
//! the candidate is accepted when it is primal feasible and every multiplier
//! (constraint and bound) has the right sign. Strict convexity makes the
//! accepted point the unique projection.

use serde::{Deserialize, Serialize};

use super::feasibility::block_feasible;
use super::primal_dual::{AcceleratedPrimalDual, PrimalDualSettings, REFERENCE_BUDGET, REFERENCE_TOLERANCE};
use super::{Convexity, MovingSet};
use crate::error::{Result, SqviError};
use crate::linalg::solve_in_place;
use crate::scalar::{cst, Real};

pub const MAX_EXACT_BLOCK_DIM: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProjectionGrade {
    /// KKT point found by enumeration (or the clamp was already feasible).
    Exact,
    /// Nonlinear constraints: high-budget primal-dual solve.
    Reference,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExactProjection<T: Real> {
    pub point: Vec<T>,
    pub grade: ProjectionGrade,
}

/// `argmin_{y ∈ K(x)} ½‖y - v‖²`, block by block.
pub fn project_exact<T: Real>(set: &MovingSet<T>, x: &[T], v: &[T]) -> Result<ExactProjection<T>> {
    set.check_dim(x)?;
    set.check_dim(v)?;
    let mut point = set.clamp(v);
    let mut grade = ProjectionGrade::Exact;
    for (b, block) in set.blocks().iter().enumerate() {
        let constraints = set.constraints(b);
        if constraints.is_empty() {
            continue;
        }
        let range = block.range();
        let clamped = &point[range.clone()];
        if constraints.iter().all(|c| c.evaluate(x, clamped) <= T::zero()) {
            continue;
        }
        let affine = constraints.iter().all(|c| c.convexity() == Convexity::AffineInY);
        let y = if affine {
            if block.len > MAX_EXACT_BLOCK_DIM {
                return Err(SqviError::DimensionTooLarge {
                    block: b,
                    dim: block.len,
                    max: MAX_EXACT_BLOCK_DIM,
                });
            }
            match enumerate_block(set, b, x, &v[range.clone()]) {
                Some(y) => y,
                None if !block_feasible(set, b, x) => {
                    return Err(SqviError::InfeasibleSet { block: b, iteration: None })
                }
                None => {
                    return Err(SqviError::Numerical(format!(
                        "active-set enumeration found no KKT point in feasible block {b}"
                    )))
                }
            }
        } else {
            grade = ProjectionGrade::Reference;
            let solver = AcceleratedPrimalDual::new(PrimalDualSettings {
                tolerance: Some(cst(REFERENCE_TOLERANCE)),
            });
            let res = solver.solve_block(set, b, x, &v[range.clone()], REFERENCE_BUDGET, None);
            if res.feasibility_violation > cst(super::FEASIBILITY_TOL) && !block_feasible(set, b, x) {
                return Err(SqviError::InfeasibleSet { block: b, iteration: None });
            }
            res.u
        };
        point[range].copy_from_slice(&y);
    }
    Ok(ExactProjection { point, grade })
}

#[derive(Clone, Copy, PartialEq)]
enum Face {
    Free,
    Lower,
    Upper,
}

/// Affine form `(a_i, c_i)` of each constraint of the block at parameter `x`.
pub(crate) fn affine_forms<T: Real>(set: &MovingSet<T>, b: usize, x: &[T]) -> Vec<(Vec<T>, T)> {
    let (lo, hi) = set.block_bounds(b);
    let base: Vec<T> = lo.iter().zip(hi).map(|(&l, &h)| (l + h) / cst(2.0)).collect();
    set.constraints(b)
        .iter()
        .map(|c| {
            let mut a = vec![T::zero(); base.len()];
            c.gradient_y(x, &base, &mut a);
            let offset = c.evaluate(x, &base) - crate::scalar::dot(&a, &base);
            (a, offset)
        })
        .collect()
}

fn enumerate_block<T: Real>(set: &MovingSet<T>, b: usize, x: &[T], v: &[T]) -> Option<Vec<T>> {
    let (lo, hi) = set.block_bounds(b);
    let forms = affine_forms(set, b, x);
    let d = v.len();
    let m = forms.len();

    let scale = v
        .iter()
        .chain(lo)
        .chain(hi)
        .fold(T::one(), |acc, &z| acc.max(z.abs()));
    let tol = cst::<T>(1e-9) * scale;

    let mut faces = vec![Face::Free; d];
    let n_faces = 3usize.pow(d as u32);
    for active in 0..=d {
        for face_code in 0..n_faces {
            let mut code = face_code;
            let mut fixed = 0;
            for f in faces.iter_mut() {
                *f = match code % 3 {
                    0 => Face::Free,
                    1 => Face::Lower,
                    _ => Face::Upper,
                };
                code /= 3;
                if *f != Face::Free {
                    fixed += 1;
                }
            }
            if fixed > active {
                continue;
            }
            if faces
                .iter()
                .zip(lo.iter().zip(hi))
                .any(|(f, (l, h))| *f == Face::Upper && l == h)
            {
                // Degenerate coordinate: the lower face already covers it.
                continue;
            }
            for mask in 0u32..(1u32 << m) {
                if fixed + mask.count_ones() as usize != active {
                    continue;
                }
                if let Some(y) = try_candidate(&faces, mask, &forms, v, lo, hi, tol) {
                    return Some(y);
                }
            }
        }
    }
    None
}

fn try_candidate<T: Real>(
    faces: &[Face],
    mask: u32,
    forms: &[(Vec<T>, T)],
    v: &[T],
    lo: &[T],
    hi: &[T],
    tol: T,
) -> Option<Vec<T>> {
    let d = v.len();
    let rows: Vec<usize> = (0..forms.len()).filter(|i| mask & (1 << i) != 0).collect();
    let s = rows.len();

    let mut y: Vec<T> = (0..d)
        .map(|j| match faces[j] {
            Face::Free => v[j],
            Face::Lower => lo[j],
            Face::Upper => hi[j],
        })
        .collect();

    let mut lambda = vec![T::zero(); s];
    if s > 0 {
        // (A_F A_Fᵀ) λ = A_F v_F + A_X y_X + c
        let mut gram = vec![T::zero(); s * s];
        for (r, &i) in rows.iter().enumerate() {
            for (c, &k) in rows.iter().enumerate() {
                gram[r * s + c] = (0..d)
                    .filter(|&j| faces[j] == Face::Free)
                    .map(|j| forms[i].0[j] * forms[k].0[j])
                    .sum();
            }
            lambda[r] = crate::scalar::dot(&forms[i].0, &y) + forms[i].1;
        }
        solve_in_place(&mut gram, &mut lambda, s)?;
        if lambda.iter().any(|&l| l < -tol) {
            return None;
        }
        for j in (0..d).filter(|&j| faces[j] == Face::Free) {
            let shift: T = rows.iter().zip(&lambda).map(|(&i, &l)| forms[i].0[j] * l).sum();
            y[j] = v[j] - shift;
        }
    }

    for j in 0..d {
        // Bound multipliers from stationarity on the fixed coordinates.
        let grad = y[j] - v[j]
            + rows
                .iter()
                .zip(&lambda)
                .map(|(&i, &l)| forms[i].0[j] * l)
                .sum::<T>();
        match faces[j] {
            Face::Free => {
                if y[j] < lo[j] - tol || y[j] > hi[j] + tol {
                    return None;
                }
            }
            Face::Lower => {
                if grad < -tol {
                    return None;
                }
            }
            Face::Upper => {
                if grad > tol {
                    return None;
                }
            }
        }
    }
    for (a, c) in forms {
        let norm_a = crate::scalar::norm(a);
        let value = crate::scalar::dot(a, &y) + *c;
        if value > tol * (T::one() + norm_a) {
            return None;
        }
    }
    for j in 0..d {
        y[j] = y[j].max(lo[j]).min(hi[j]);
    }
    Some(y)
}
