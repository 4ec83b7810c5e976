//! Dense symmetric positive-definite solves for the small Newton systems
//! (dimension <= K).

use nalgebra::{DMatrix, DVector};

/// Solves `h x = rhs` for symmetric positive-definite `h` (row-major, `n x n`).
///
/// The system is Jacobi-scaled before the Cholesky factorization; barrier
/// Hessians mix entries that differ by many orders of magnitude. Returns
/// `None` when the scaled matrix is not numerically positive definite.
pub(crate) fn solve_spd(h: &[f64], rhs: &[f64]) -> Option<Vec<f64>> {
    let n = rhs.len();
    debug_assert_eq!(h.len(), n * n);
    let mut scale = Vec::with_capacity(n);
    for i in 0..n {
        let d = h[i * n + i];
        if !(d > 0.0 && d.is_finite()) {
            return None;
        }
        scale.push(1.0 / d.sqrt());
    }
    // (D H D) y = D rhs, x = D y.
    let scaled = DMatrix::from_fn(n, n, |i, j| h[i * n + j] * scale[i] * scale[j]);
    let chol = scaled.cholesky()?;
    let y = chol.solve(&DVector::from_fn(n, |i, _| rhs[i] * scale[i]));
    if y.iter().any(|v| !v.is_finite()) {
        return None;
    }
    Some(y.iter().zip(&scale).map(|(v, s)| v * s).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_badly_scaled_system() {
        let h = [1e12, 1e3, 1e3, 2.0];
        let x_true = [1e-6, 3.0];
        let rhs = [
            h[0] * x_true[0] + h[1] * x_true[1],
            h[2] * x_true[0] + h[3] * x_true[1],
        ];
        let x = solve_spd(&h, &rhs).unwrap();
        assert!((x[0] - x_true[0]).abs() < 1e-15);
        assert!((x[1] - x_true[1]).abs() < 1e-12);
    }

    #[test]
    fn rejects_indefinite() {
        assert!(solve_spd(&[1.0, 2.0, 2.0, 1.0], &[1.0, 1.0]).is_none());
    }
}
