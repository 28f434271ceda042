//! Dense linear solves, backed by nalgebra's LU decomposition.

use nalgebra::{DMatrix, DVector};

/// Solves `A x = b` for a row-major `n × n` matrix. `None` when `A` is
/// numerically singular.
pub fn solve_dense(n: usize, a: &[f64], b: &[f64]) -> Option<Vec<f64>> {
    debug_assert_eq!(a.len(), n * n);
    debug_assert_eq!(b.len(), n);
    let m = DMatrix::from_row_slice(n, n, a);
    let rhs = DVector::from_column_slice(b);
    let x = m.lu().solve(&rhs)?;
    x.iter()
        .all(|v| v.is_finite())
        .then(|| x.iter().copied().collect())
}
