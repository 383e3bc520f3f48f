//! Moving constraint sets `K(x) = {y ∈ box | g_i(x, y) <= 0}` with per-player
//! block structure, and the projections onto them.

use std::fmt::Debug;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SqviError};
use crate::scalar::{cst, Real};

mod exact;
mod feasibility;
mod primal_dual;

pub use exact::{project_exact, ExactProjection, ProjectionGrade, MAX_EXACT_BLOCK_DIM};
pub use feasibility::feasibility_probe;
pub use primal_dual::{
    project_inexact, AcceleratedPrimalDual, InnerSolveResult, PrimalDualSettings, Projector,
    REFERENCE_BUDGET, REFERENCE_TOLERANCE,
};

/// Absolute tolerance on constraint values for feasibility decisions.
pub const FEASIBILITY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Convexity {
    AffineInY,
    ConvexInY,
}

/// One functional constraint `g(x, y) <= 0` owned by a block.
///
/// `y` holds only the owning block's coordinates; `x` is the full parameter
/// point. Implementations must be convex in `y` for every `x` in the box.
pub trait ParamConstraint<T: Real>: Send + Sync + Debug {
    fn evaluate(&self, x: &[T], y: &[T]) -> T;

    /// Writes `∇_y g(x, y)` into `out` (length of the block).
    fn gradient_y(&self, x: &[T], y: &[T], out: &mut [T]);

    fn convexity(&self) -> Convexity;
}

/// `g(x, y) = aᵀy + cᵀx + b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct AffineConstraint<T: Real> {
    /// Coefficients on the block's own coordinates.
    pub own: Vec<T>,
    /// Coefficients on the full parameter point (may be empty).
    pub param: Vec<T>,
    pub offset: T,
}

impl<T: Real> AffineConstraint<T> {
    /// Constraint independent of the parameter: `aᵀy + b <= 0`.
    pub fn fixed(own: Vec<T>, offset: T) -> Self {
        Self {
            own,
            param: Vec::new(),
            offset,
        }
    }
}

impl<T: Real> ParamConstraint<T> for AffineConstraint<T> {
    fn evaluate(&self, x: &[T], y: &[T]) -> T {
        let own: T = self.own.iter().zip(y).map(|(&a, &b)| a * b).sum();
        let param: T = self.param.iter().zip(x).map(|(&a, &b)| a * b).sum();
        own + param + self.offset
    }

    fn gradient_y(&self, _x: &[T], _y: &[T], out: &mut [T]) {
        out.copy_from_slice(&self.own);
    }

    fn convexity(&self) -> Convexity {
        Convexity::AffineInY
    }
}

/// Contiguous coordinate range owned by one player.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub start: usize,
    pub len: usize,
}

impl Block {
    pub fn range(&self) -> std::ops::Range<usize> {
        self.start..self.start + self.len
    }
}

#[derive(Debug, Clone)]
pub struct MovingSet<T: Real> {
    lower: Vec<T>,
    upper: Vec<T>,
    blocks: Vec<Block>,
    constraints: Vec<Vec<Arc<dyn ParamConstraint<T>>>>,
}

fn check_bounds<T: Real>(lo: &[T], hi: &[T]) -> Result<()> {
    if lo.len() != hi.len() {
        return Err(SqviError::DimensionMismatch {
            expected: lo.len(),
            got: hi.len(),
        });
    }
    for (index, (&l, &h)) in lo.iter().zip(hi).enumerate() {
        if !(l <= h) {
            return Err(SqviError::BoundOrder {
                index,
                lo: crate::scalar::to_f64(l),
                hi: crate::scalar::to_f64(h),
            });
        }
    }
    Ok(())
}

impl<T: Real> MovingSet<T> {
    /// Box-only set treated as a single block.
    pub fn boxed(lower: Vec<T>, upper: Vec<T>) -> Result<Self> {
        let n = lower.len();
        Self::with_blocks(lower, upper, vec![Block { start: 0, len: n }])
    }

    pub fn with_blocks(lower: Vec<T>, upper: Vec<T>, blocks: Vec<Block>) -> Result<Self> {
        check_bounds(&lower, &upper)?;
        if lower.is_empty() {
            return Err(SqviError::InvalidConfig("moving set needs dimension >= 1".into()));
        }
        let mut next = 0;
        for b in &blocks {
            if b.start != next || b.len == 0 {
                return Err(SqviError::InvalidConfig(
                    "blocks must be non-empty and partition the coordinates in order".into(),
                ));
            }
            next += b.len;
        }
        if next != lower.len() {
            return Err(SqviError::DimensionMismatch {
                expected: lower.len(),
                got: next,
            });
        }
        let constraints = vec![Vec::new(); blocks.len()];
        Ok(Self {
            lower,
            upper,
            blocks,
            constraints,
        })
    }

    pub fn add_constraint(&mut self, block: usize, constraint: Arc<dyn ParamConstraint<T>>) -> Result<()> {
        let slot = self.constraints.get_mut(block).ok_or_else(|| {
            SqviError::InvalidConfig(format!("no block with index {block}"))
        })?;
        slot.push(constraint);
        Ok(())
    }

    pub fn with_constraint(mut self, block: usize, constraint: Arc<dyn ParamConstraint<T>>) -> Result<Self> {
        self.add_constraint(block, constraint)?;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[T] {
        &self.lower
    }

    pub fn upper(&self) -> &[T] {
        &self.upper
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn constraints(&self, block: usize) -> &[Arc<dyn ParamConstraint<T>>] {
        &self.constraints[block]
    }

    pub fn is_box_only(&self) -> bool {
        self.constraints.iter().all(Vec::is_empty)
    }

    pub fn midpoint(&self) -> Vec<T> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(&l, &h)| (l + h) / cst(2.0))
            .collect()
    }

    pub fn clamp(&self, v: &[T]) -> Vec<T> {
        v.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(&x, (&l, &h))| x.max(l).min(h))
            .collect()
    }

    pub fn in_box(&self, y: &[T]) -> bool {
        y.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(&x, (&l, &h))| x >= l && x <= h)
    }

    pub(crate) fn check_dim(&self, v: &[T]) -> Result<()> {
        if v.len() == self.dim() {
            Ok(())
        } else {
            Err(SqviError::DimensionMismatch {
                expected: self.dim(),
                got: v.len(),
            })
        }
    }

    /// `g(x, y)` for constraint `index` of `block`, taking a full-length `y`.
    pub fn constraint_value(&self, block: usize, index: usize, x: &[T], y: &[T]) -> T {
        let range = self.blocks[block].range();
        self.constraints[block][index].evaluate(x, &y[range])
    }

    /// `max(0, g_i(x, y))` over every constraint.
    pub fn max_violation(&self, x: &[T], y: &[T]) -> T {
        let mut worst = T::zero();
        for (b, block) in self.blocks.iter().enumerate() {
            for c in &self.constraints[b] {
                worst = worst.max(c.evaluate(x, &y[block.range()]));
            }
        }
        worst
    }

    /// `y ∈ K(x)` up to `tol` on constraint values (the box is checked exactly).
    pub fn contains(&self, x: &[T], y: &[T], tol: T) -> bool {
        self.in_box(y) && self.max_violation(x, y) <= tol
    }

    pub(crate) fn block_bounds(&self, block: usize) -> (&[T], &[T]) {
        let r = self.blocks[block].range();
        (&self.lower[r.clone()], &self.upper[r])
    }
}

/// Coordinatewise clamp of `v` onto `[lo, hi]`.
pub fn project_box<T: Real>(v: &[T], lo: &[T], hi: &[T]) -> Result<Vec<T>> {
    check_bounds(lo, hi)?;
    if v.len() != lo.len() {
        return Err(SqviError::DimensionMismatch {
            expected: lo.len(),
            got: v.len(),
        });
    }
    Ok(v.iter()
        .zip(lo.iter().zip(hi))
        .map(|(&x, (&l, &h))| x.max(l).min(h))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_projection_examples() {
        let lo = [1.0, 1.0];
        let hi = [2.0, 2.0];
        assert_eq!(project_box(&[0.0, 0.0], &lo, &hi).unwrap(), vec![1.0, 1.0]);
        assert_eq!(project_box(&[1.2, 1.7], &lo, &hi).unwrap(), vec![1.2, 1.7]);
        assert_eq!(project_box(&[3.0, 1.5], &lo, &hi).unwrap(), vec![2.0, 1.5]);
    }

    #[test]
    fn box_projection_rejects_bad_bounds() {
        let err = project_box(&[0.0], &[1.0], &[0.0]).unwrap_err();
        assert!(matches!(err, SqviError::BoundOrder { index: 0, .. }));
    }

    #[test]
    fn blocks_must_partition() {
        let lo = vec![0.0; 4];
        let hi = vec![1.0; 4];
        let bad = vec![Block { start: 0, len: 2 }, Block { start: 3, len: 1 }];
        assert!(MovingSet::with_blocks(lo.clone(), hi.clone(), bad).is_err());
        let good = vec![Block { start: 0, len: 2 }, Block { start: 2, len: 2 }];
        assert!(MovingSet::with_blocks(lo, hi, good).is_ok());
    }

    #[test]
    fn affine_constraint_value_and_gradient() {
        let c = AffineConstraint {
            own: vec![1.0, 2.0],
            param: vec![0.0, 0.0, 3.0],
            offset: -1.0,
        };
        assert_eq!(c.evaluate(&[9.0, 9.0, 1.0], &[1.0, 1.0]), 5.0);
        let mut g = [0.0; 2];
        c.gradient_y(&[0.0; 3], &[0.0; 2], &mut g);
        assert_eq!(g, [1.0, 2.0]);
    }
}
