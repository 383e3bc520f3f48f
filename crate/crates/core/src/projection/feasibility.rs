use super::exact::{affine_forms, MAX_EXACT_BLOCK_DIM};
use super::{Convexity, MovingSet, FEASIBILITY_TOL};
use crate::linalg::solve_in_place;
use crate::scalar::{cst, Real};

const SUBGRADIENT_BUDGET: usize = 100_000;

/// For each block, whether `min_{y ∈ box} max_i g_i(x, y) <= 1e-8`.
pub fn feasibility_probe<T: Real>(set: &MovingSet<T>, x: &[T]) -> Vec<bool> {
    (0..set.blocks().len()).map(|b| block_feasible(set, b, x)).collect()
}

pub(crate) fn block_feasible<T: Real>(set: &MovingSet<T>, b: usize, x: &[T]) -> bool {
    min_max_violation(set, b, x) <= cst(FEASIBILITY_TOL)
}

fn max_g<T: Real>(set: &MovingSet<T>, b: usize, x: &[T], y: &[T]) -> T {
    set.constraints(b)
        .iter()
        .map(|c| c.evaluate(x, y))
        .fold(T::neg_infinity(), T::max)
}

/// `min_{y ∈ box} max_i g_i(x, y)` (or an upper estimate of it for nonlinear constraints).
pub(crate) fn min_max_violation<T: Real>(set: &MovingSet<T>, b: usize, x: &[T]) -> T {
    let constraints = set.constraints(b);
    if constraints.is_empty() {
        return T::neg_infinity();
    }
    let d = set.blocks()[b].len;
    let affine = constraints.iter().all(|c| c.convexity() == Convexity::AffineInY);
    if affine && d <= MAX_EXACT_BLOCK_DIM {
        affine_min_max(set, b, x)
    } else {
        convex_min_max(set, b, x)
    }
}

/// Exact LP `min t s.t. a_iᵀy + c_i <= t, y ∈ box` by vertex enumeration.
fn affine_min_max<T: Real>(set: &MovingSet<T>, b: usize, x: &[T]) -> T {
    let (lo, hi) = set.block_bounds(b);
    let forms = affine_forms(set, b, x);
    let d = lo.len();
    let m = forms.len();
    let eval = |y: &[T]| {
        forms
            .iter()
            .map(|(a, c)| crate::scalar::dot(a, y) + *c)
            .fold(T::neg_infinity(), T::max)
    };

    let mut best = T::infinity();
    let mut faces = vec![0u8; d];
    for face_code in 0..3usize.pow(d as u32) {
        let mut code = face_code;
        for f in faces.iter_mut() {
            *f = (code % 3) as u8;
            code /= 3;
        }
        let free: Vec<usize> = (0..d).filter(|&j| faces[j] == 0).collect();
        let need = free.len() + 1;
        let base: Vec<T> = (0..d)
            .map(|j| match faces[j] {
                1 => lo[j],
                2 => hi[j],
                _ => (lo[j] + hi[j]) / cst(2.0),
            })
            .collect();
        if free.is_empty() {
            best = best.min(eval(&base));
            continue;
        }
        for mask in 0u32..(1u32 << m) {
            if mask.count_ones() as usize != need {
                continue;
            }
            let rows: Vec<usize> = (0..m).filter(|i| mask & (1 << i) != 0).collect();
            let n = need;
            let mut a = vec![T::zero(); n * n];
            let mut rhs = vec![T::zero(); n];
            for (r, &i) in rows.iter().enumerate() {
                let (coef, c) = &forms[i];
                for (col, &j) in free.iter().enumerate() {
                    a[r * n + col] = coef[j];
                }
                a[r * n + free.len()] = -T::one();
                let fixed: T = (0..d).filter(|&j| faces[j] != 0).map(|j| coef[j] * base[j]).sum();
                rhs[r] = -*c - fixed;
            }
            if solve_in_place(&mut a, &mut rhs, n).is_none() {
                continue;
            }
            let mut y = base.clone();
            for (col, &j) in free.iter().enumerate() {
                y[j] = rhs[col].max(lo[j]).min(hi[j]);
            }
            best = best.min(eval(&y));
        }
    }
    best
}

/// Vertex scan followed by normalized projected subgradient descent on
/// `max_i g_i(x, ·)` from the box midpoint.
fn convex_min_max<T: Real>(set: &MovingSet<T>, b: usize, x: &[T]) -> T {
    let (lo, hi) = set.block_bounds(b);
    let d = lo.len();
    let tol = cst::<T>(FEASIBILITY_TOL);
    let mut best = T::infinity();

    if d <= 16 {
        let mut y = vec![T::zero(); d];
        for corner in 0u32..(1u32 << d) {
            for j in 0..d {
                y[j] = if corner & (1 << j) != 0 { hi[j] } else { lo[j] };
            }
            best = best.min(max_g(set, b, x, &y));
            if best <= tol {
                return best;
            }
        }
    }

    let diam = lo
        .iter()
        .zip(hi)
        .map(|(&l, &h)| (h - l) * (h - l))
        .sum::<T>()
        .sqrt()
        .max(T::epsilon());
    let mut y: Vec<T> = lo.iter().zip(hi).map(|(&l, &h)| (l + h) / cst(2.0)).collect();
    let mut grad = vec![T::zero(); d];
    for t in 0..SUBGRADIENT_BUDGET {
        let (worst, value) = set
            .constraints(b)
            .iter()
            .enumerate()
            .map(|(i, c)| (i, c.evaluate(x, &y)))
            .fold((0, T::neg_infinity()), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
        best = best.min(value);
        if best <= tol {
            break;
        }
        set.constraints(b)[worst].gradient_y(x, &y, &mut grad);
        let g_norm = crate::scalar::norm(&grad);
        if g_norm == T::zero() {
            break;
        }
        let step = diam / cst::<T>(2.0 * ((t + 1) as f64).sqrt()) / g_norm;
        for j in 0..d {
            y[j] = (y[j] - step * grad[j]).max(lo[j]).min(hi[j]);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::projection::{AffineConstraint, ParamConstraint};
    use std::sync::Arc;

    #[test]
    fn box_only_is_feasible() {
        let set = MovingSet::boxed(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        assert_eq!(feasibility_probe(&set, &[0.0, 0.0]), vec![true]);
    }

    #[test]
    fn affine_violated_at_every_vertex() {
        let set = MovingSet::boxed(vec![0.0_f64, 0.0], vec![1.0, 1.0])
            .unwrap()
            .with_constraint(0, Arc::new(AffineConstraint::fixed(vec![-1.0, -1.0], 2.5)))
            .unwrap();
        assert_eq!(feasibility_probe(&set, &[0.0, 0.0]), vec![false]);
        // min over the box of max(2.5 - y1 - y2) is 0.5 at (1, 1).
        assert!((min_max_violation(&set, 0, &[0.0, 0.0]) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn two_constraints_balance_inside_the_box() {
        // max(y1 - y2 + 1, y2 - y1 + 1) >= 1 with equality on the diagonal.
        let set = MovingSet::boxed(vec![0.0_f64, 0.0], vec![1.0, 1.0])
            .unwrap()
            .with_constraint(0, Arc::new(AffineConstraint::fixed(vec![1.0, -1.0], 1.0)))
            .unwrap()
            .with_constraint(0, Arc::new(AffineConstraint::fixed(vec![-1.0, 1.0], 1.0)))
            .unwrap();
        assert!((min_max_violation(&set, 0, &[0.0, 0.0]) - 1.0).abs() < 1e-12);
    }

    #[derive(Debug)]
    struct Disk {
        centre: [f64; 2],
        radius: f64,
    }

    impl ParamConstraint<f64> for Disk {
        fn evaluate(&self, _x: &[f64], y: &[f64]) -> f64 {
            (y[0] - self.centre[0]).powi(2) + (y[1] - self.centre[1]).powi(2) - self.radius * self.radius
        }
        fn gradient_y(&self, _x: &[f64], y: &[f64], out: &mut [f64]) {
            out[0] = 2.0 * (y[0] - self.centre[0]);
            out[1] = 2.0 * (y[1] - self.centre[1]);
        }
        fn convexity(&self) -> Convexity {
            Convexity::ConvexInY
        }
    }

    #[test]
    fn nonlinear_probe_finds_interior_disk() {
        let set = MovingSet::boxed(vec![0.0, 0.0], vec![1.0, 1.0])
            .unwrap()
            .with_constraint(0, Arc::new(Disk { centre: [0.5, 0.5], radius: 0.1 }))
            .unwrap();
        assert_eq!(feasibility_probe(&set, &[0.0, 0.0]), vec![true]);
        let far = MovingSet::boxed(vec![0.0, 0.0], vec![1.0, 1.0])
            .unwrap()
            .with_constraint(0, Arc::new(Disk { centre: [3.0, 3.0], radius: 0.5 }))
            .unwrap();
        assert_eq!(feasibility_probe(&far, &[0.0, 0.0]), vec![false]);
    }
}
