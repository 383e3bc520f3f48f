//! Tiny dense solves used by the active-set enumerations. Matrices are
//! row-major `n × n` slices; sizes here never exceed a dozen.

use crate::scalar::{cst, Real};

/// Solves `a x = b` in place (`b` receives `x`) by Gaussian elimination with
/// partial pivoting. Returns `None` for (numerically) singular systems.
pub(crate) fn solve_in_place<T: Real>(a: &mut [T], b: &mut [T], n: usize) -> Option<()> {
    debug_assert_eq!(a.len(), n * n);
    debug_assert_eq!(b.len(), n);
    let scale = a.iter().fold(T::zero(), |m, v| m.max(v.abs()));
    if scale == T::zero() {
        return if n == 0 { Some(()) } else { None };
    }
    let tiny = scale * T::epsilon() * cst::<T>(64.0 * n as f64);
    for col in 0..n {
        let (pivot_row, pivot) = (col..n)
            .map(|r| (r, a[r * n + col].abs()))
            .fold((col, T::zero()), |best, cur| if cur.1 > best.1 { cur } else { best });
        if pivot <= tiny {
            return None;
        }
        if pivot_row != col {
            for c in 0..n {
                a.swap(col * n + c, pivot_row * n + c);
            }
            b.swap(col, pivot_row);
        }
        let diag = a[col * n + col];
        for r in col + 1..n {
            let factor = a[r * n + col] / diag;
            if factor == T::zero() {
                continue;
            }
            for c in col..n {
                let v = a[col * n + c];
                a[r * n + c] -= factor * v;
            }
            let v = b[col];
            b[r] -= factor * v;
        }
    }
    for row in (0..n).rev() {
        let mut acc = b[row];
        for c in row + 1..n {
            acc -= a[row * n + c] * b[c];
        }
        b[row] = acc / a[row * n + row];
    }
    Some(())
}
