//! Budgeted inexact projection.
//!
//! Each block solves the saddle problem
//!
//! ```text
//! min_{u ∈ box} max_{λ >= 0}  ½‖u - v‖² + λᵀ g(x, u)
//! ```
//!
//! with an accelerated linearized primal-dual iteration. The primal objective
//! is 1-strongly convex, so the steps follow the strongly convex schedule
//! `θ = 1/√(1+2τ)`, `τ ← θτ`, `σ ← σ/θ`, which gives `‖u_t - ũ‖² = O(1/t²)`.
//! The dual step extrapolates constraint values, the primal step is a box
//! clamp of a prox step on the Lagrangian. A local smoothness estimate of `g`
//! is backtracked so that `τσL² <= 1` and the linearization error stays below
//! `‖Δu‖²/(2τ)`; for affine constraints the initial estimate is already valid.

use super::{Convexity, MovingSet, FEASIBILITY_TOL};
use crate::error::{Result, SqviError};
use crate::scalar::{cst, Real};

/// Iteration cap of the reference-grade (tight tolerance) solve.
pub const REFERENCE_BUDGET: usize = 1_000_000;
/// Stopping tolerance on the primal gap proxy for reference-grade solves.
pub const REFERENCE_TOLERANCE: f64 = 1e-12;

const MAX_BACKTRACKS: usize = 30;

/// Output of an inner solve.
#[derive(Debug, Clone, PartialEq)]
pub struct InnerSolveResult<T: Real> {
    /// Approximate projection, always inside the box.
    pub u: Vec<T>,
    /// Inner iterations performed, summed over blocks.
    pub iterations: usize,
    /// Largest per-block `‖u_t - u_{t-1}‖ (1+τ)/τ`.
    pub primal_gap_proxy: T,
    /// `max(0, g_i(x, u))` over all constraints.
    pub feasibility_violation: T,
}

/// Something that approximately projects onto `K(x)` within an iteration budget.
pub trait Projector<T: Real>: Send + Sync {
    fn project(
        &self,
        set: &MovingSet<T>,
        x: &[T],
        v: &[T],
        budget: usize,
        warm_start: Option<&[T]>,
    ) -> Result<InnerSolveResult<T>>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrimalDualSettings<T: Real> {
    /// Stop once the gap proxy drops below this and the iterate is feasible.
    /// `None` runs the whole budget.
    pub tolerance: Option<T>,
}

impl<T: Real> Default for PrimalDualSettings<T> {
    fn default() -> Self {
        Self { tolerance: None }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct AcceleratedPrimalDual<T: Real> {
    settings: PrimalDualSettings<T>,
}

#[derive(Debug, Clone)]
pub(crate) struct BlockSolve<T: Real> {
    pub u: Vec<T>,
    pub iterations: usize,
    pub primal_gap_proxy: T,
    pub feasibility_violation: T,
}

impl<T: Real> AcceleratedPrimalDual<T> {
    pub fn new(settings: PrimalDualSettings<T>) -> Self {
        Self { settings }
    }

    pub fn settings(&self) -> &PrimalDualSettings<T> {
        &self.settings
    }

    pub(crate) fn solve_block(
        &self,
        set: &MovingSet<T>,
        b: usize,
        x: &[T],
        v: &[T],
        budget: usize,
        warm_start: Option<&[T]>,
    ) -> BlockSolve<T> {
        let (lo, hi) = set.block_bounds(b);
        let constraints = set.constraints(b);
        let d = v.len();
        let m = constraints.len();
        let clamp = |z: &mut [T]| {
            for j in 0..d {
                z[j] = z[j].max(lo[j]).min(hi[j]);
            }
        };
        let eval_g = |u: &[T], out: &mut [T]| {
            for (o, c) in out.iter_mut().zip(constraints) {
                *o = c.evaluate(x, u);
            }
        };
        let violation = |g: &[T]| g.iter().fold(T::zero(), |w, &gi| w.max(gi));

        let mut clamped_v = v.to_vec();
        clamp(&mut clamped_v);
        let mut g_clamped = vec![T::zero(); m];
        eval_g(&clamped_v, &mut g_clamped);
        if m == 0 || g_clamped.iter().all(|&gi| gi <= T::zero()) {
            // λ = 0 is optimal and the clamp is the exact projection.
            return BlockSolve {
                u: clamped_v,
                iterations: 0,
                primal_gap_proxy: T::zero(),
                feasibility_violation: T::zero(),
            };
        }

        let mut u = match warm_start {
            Some(w) => {
                let mut w = w.to_vec();
                clamp(&mut w);
                w
            }
            None => clamped_v,
        };

        // Affine blocks have an exact Lipschitz bound up front; backtracking
        // there would only react to roundoff.
        let nonlinear = constraints.iter().any(|c| c.convexity() != Convexity::AffineInY);
        let mut jac = vec![T::zero(); m * d];
        let jacobian = |u: &[T], jac: &mut [T]| {
            for (i, c) in constraints.iter().enumerate() {
                c.gradient_y(x, u, &mut jac[i * d..(i + 1) * d]);
            }
        };
        jacobian(&u, &mut jac);
        let mut lip = jac
            .iter()
            .map(|&a| a * a)
            .sum::<T>()
            .sqrt()
            .max(cst(1e-12));

        let half = cst::<T>(0.5);
        let two = cst::<T>(2.0);
        let mut tau = T::one() / lip;
        let mut sigma = T::one() / (tau * lip * lip);
        let mut theta = T::one();
        let mut lambda = vec![T::zero(); m];
        let mut g_cur = vec![T::zero(); m];
        eval_g(&u, &mut g_cur);
        let mut g_prev = g_cur.clone();

        let mut s = vec![T::zero(); m];
        let mut lambda_next = vec![T::zero(); m];
        let mut grad = vec![T::zero(); d];
        let mut u_next = vec![T::zero(); d];
        let mut g_next = vec![T::zero(); m];
        let mut proxy = T::infinity();
        let mut iterations = 0;

        while iterations < budget {
            let mut accepted = false;
            for _ in 0..MAX_BACKTRACKS {
                for i in 0..m {
                    s[i] = g_cur[i] + theta * (g_cur[i] - g_prev[i]);
                    lambda_next[i] = (lambda[i] + sigma * s[i]).max(T::zero());
                }
                for j in 0..d {
                    let mut jt = T::zero();
                    for i in 0..m {
                        jt += jac[i * d + j] * lambda_next[i];
                    }
                    grad[j] = u[j] - v[j] + jt;
                }
                // prox of τ(½‖·-v‖²) after the linear step, then the box.
                let shrink = tau / (T::one() + tau);
                for j in 0..d {
                    u_next[j] = u[j] - shrink * grad[j];
                }
                clamp(&mut u_next);
                eval_g(&u_next, &mut g_next);

                let step_sq: T = u.iter().zip(&u_next).map(|(&a, &b)| (b - a) * (b - a)).sum();
                // Below this the finite-difference curvature tests measure roundoff.
                let u_sq: T = u.iter().map(|&a| a * a).sum();
                let noise_floor = cst::<T>(4096.0) * T::epsilon() * T::epsilon() * (u_sq + T::one());
                if step_sq <= noise_floor || !nonlinear {
                    accepted = true;
                    break;
                }
                let dg_sq: T = g_next.iter().zip(&g_cur).map(|(&a, &b)| (a - b) * (a - b)).sum();
                let local_lip_sq = dg_sq / step_sq;
                if tau * sigma * local_lip_sq > T::one() * cst(1.0 + 1e-9) {
                    lip = local_lip_sq.sqrt() * cst(1.1);
                    sigma = T::one() / (tau * lip * lip);
                    continue;
                }
                let mut curvature = T::zero();
                let mut roundoff = T::zero();
                for i in 0..m {
                    roundoff += lambda_next[i] * (g_next[i].abs() + g_cur[i].abs());
                    let mut lin = T::zero();
                    for j in 0..d {
                        lin += jac[i * d + j] * (u_next[j] - u[j]);
                    }
                    curvature += lambda_next[i] * (g_next[i] - g_cur[i] - lin);
                }
                if curvature > half * step_sq / tau + cst::<T>(64.0) * T::epsilon() * roundoff {
                    tau *= half;
                    sigma *= two;
                    continue;
                }
                accepted = true;
                break;
            }
            if !accepted {
                log::debug!("primal-dual backtracking exhausted in block {b}");
            }
            iterations += 1;

            let step: T = u
                .iter()
                .zip(&u_next)
                .map(|(&a, &b)| (b - a) * (b - a))
                .sum::<T>()
                .sqrt();
            proxy = step * (T::one() + tau) / tau;
            let fixed_point = u == u_next && lambda == lambda_next;

            std::mem::swap(&mut g_prev, &mut g_cur);
            g_cur.copy_from_slice(&g_next);
            std::mem::swap(&mut u, &mut u_next);
            std::mem::swap(&mut lambda, &mut lambda_next);
            jacobian(&u, &mut jac);

            theta = T::one() / (T::one() + two * tau).sqrt();
            tau *= theta;
            sigma /= theta;

            if fixed_point {
                break;
            }
            if let Some(tol) = self.settings.tolerance {
                if proxy <= tol && violation(&g_cur) <= cst(FEASIBILITY_TOL) {
                    break;
                }
            }
        }

        BlockSolve {
            feasibility_violation: violation(&g_cur),
            u,
            iterations,
            primal_gap_proxy: proxy,
        }
    }
}

impl<T: Real> Projector<T> for AcceleratedPrimalDual<T> {
    fn project(
        &self,
        set: &MovingSet<T>,
        x: &[T],
        v: &[T],
        budget: usize,
        warm_start: Option<&[T]>,
    ) -> Result<InnerSolveResult<T>> {
        if budget == 0 {
            return Err(SqviError::InvalidConfig("inner budget must be >= 1".into()));
        }
        set.check_dim(x)?;
        set.check_dim(v)?;
        if let Some(w) = warm_start {
            set.check_dim(w)?;
        }
        let mut u = vec![T::zero(); set.dim()];
        let mut iterations = 0;
        let mut proxy = T::zero();
        let mut violation = T::zero();
        for (b, block) in set.blocks().iter().enumerate() {
            let r = block.range();
            let res = self.solve_block(set, b, x, &v[r.clone()], budget, warm_start.map(|w| &w[r.clone()]));
            u[r].copy_from_slice(&res.u);
            iterations += res.iterations;
            proxy = proxy.max(res.primal_gap_proxy);
            violation = violation.max(res.feasibility_violation);
        }
        if u.iter().any(|z| !z.is_finite()) || violation.is_nan() {
            return Err(SqviError::Numerical(
                "inner solve produced a non-finite iterate; constraint left its domain".into(),
            ));
        }
        Ok(InnerSolveResult {
            u,
            iterations,
            primal_gap_proxy: proxy,
            feasibility_violation: violation,
        })
    }
}

/// Inexact projection with the default accelerated primal-dual solver.
pub fn project_inexact<T: Real>(
    set: &MovingSet<T>,
    x: &[T],
    v: &[T],
    budget: usize,
    warm_start: Option<&[T]>,
) -> Result<InnerSolveResult<T>> {
    AcceleratedPrimalDual::default().project(set, x, v, budget, warm_start)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::projection::{project_exact, AffineConstraint};
    use std::sync::Arc;

    fn halfspace() -> MovingSet<f64> {
        MovingSet::boxed(vec![-10.0, -10.0], vec![10.0, 10.0])
            .unwrap()
            .with_constraint(0, Arc::new(AffineConstraint::fixed(vec![-1.0, -1.0], 3.0)))
            .unwrap()
    }

    #[test]
    fn inactive_constraints_return_the_clamp() {
        let set = halfspace();
        for budget in [1, 7, 1000] {
            let r = project_inexact(&set, &[0.0, 0.0], &[12.0, 4.0], budget, None).unwrap();
            assert_eq!(r.u, vec![10.0, 4.0]);
            assert_eq!(r.iterations, 0);
        }
    }

    #[test]
    fn halfspace_converges() {
        let r = project_inexact(&halfspace(), &[0.0, 0.0], &[0.0, 0.0], 10_000, None).unwrap();
        assert!((r.u[0] - 1.5).abs() < 1e-4 && (r.u[1] - 1.5).abs() < 1e-4, "{:?}", r.u);
    }

    #[test]
    fn iterates_stay_in_box() {
        let set = MovingSet::boxed(vec![0.0, 0.0], vec![1.0, 1.0])
            .unwrap()
            .with_constraint(0, Arc::new(AffineConstraint::fixed(vec![-1.0, -1.0], 1.0)))
            .unwrap();
        for budget in [1, 2, 5, 50] {
            let r = project_inexact(&set, &[0.0, 0.0], &[0.5, -1.0], budget, None).unwrap();
            assert!(set.in_box(&r.u));
        }
    }

    #[test]
    fn error_shrinks_with_budget() {
        let set = MovingSet::boxed(vec![0.0, 0.0, 0.0], vec![2.0, 2.0, 2.0])
            .unwrap()
            .with_constraint(0, Arc::new(AffineConstraint::fixed(vec![-1.0, -2.0, -0.5], 2.0)))
            .unwrap()
            .with_constraint(0, Arc::new(AffineConstraint::fixed(vec![1.0, -1.0, 0.0], 0.2)))
            .unwrap();
        let x = [0.0; 3];
        let v = [1.8, -0.5, 0.1];
        let exact = project_exact(&set, &x, &v).unwrap().point;
        let err = |t| {
            let u = project_inexact(&set, &x, &v, t, None).unwrap().u;
            crate::scalar::dist(&u, &exact)
        };
        let (e16, e64) = (err(16), err(64));
        assert!(e64 <= e16 / 2.0 || e64 < 1e-10, "{e16} {e64}");
    }

    #[test]
    fn zero_budget_rejected() {
        assert!(project_inexact(&halfspace(), &[0.0, 0.0], &[0.0, 0.0], 0, None).is_err());
    }
}
