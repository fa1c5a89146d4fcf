//! Dense Cholesky factorization and triangular solves.

use nalgebra::{DMatrix, DVector};

/// Lower-triangular `L` with `L Lᵀ = a`, or `None` if `a` is not
/// numerically positive definite. Only the lower triangle of `a` is read.
pub(crate) fn cholesky_lower(a: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = a.nrows();
    debug_assert_eq!(n, a.ncols());
    let mut l = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        // Relative pivot floor: a pivot that lost all significant digits
        // means the matrix is singular to working precision.
        if !(d > f64::EPSILON * a[(j, j)].abs()) || !d.is_finite() {
            return None;
        }
        let d = d.sqrt();
        l[(j, j)] = d;
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / d;
        }
    }
    Some(l)
}

/// Solve `L x = b` for lower-triangular `L`.
pub(crate) fn solve_lower(l: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let n = l.nrows();
    let mut x = b.clone();
    for i in 0..n {
        let mut s = x[i];
        for k in 0..i {
            s -= l[(i, k)] * x[k];
        }
        x[i] = s / l[(i, i)];
    }
    x
}

/// Solve `Lᵀ x = b` for lower-triangular `L`.
pub(crate) fn solve_lower_transpose(l: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let n = l.nrows();
    let mut x = b.clone();
    for i in (0..n).rev() {
        let mut s = x[i];
        for k in (i + 1)..n {
            s -= l[(k, i)] * x[k];
        }
        x[i] = s / l[(i, i)];
    }
    x
}

/// Solve `(L Lᵀ) x = b`.
pub(crate) fn cholesky_solve(l: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    solve_lower_transpose(l, &solve_lower(l, b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factors_known_matrix() {
        let a = DMatrix::from_row_slice(
            3,
            3,
            &[4.0, 12.0, -16.0, 12.0, 37.0, -43.0, -16.0, -43.0, 98.0],
        );
        let l = cholesky_lower(&a).unwrap();
        let expected =
            DMatrix::from_row_slice(3, 3, &[2.0, 0.0, 0.0, 6.0, 1.0, 0.0, -8.0, 5.0, 3.0]);
        assert!((l.clone() - expected).abs().max() < 1e-12);
        let b = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let x = cholesky_solve(&l, &b);
        assert!((&a * x - b).abs().max() < 1e-10);
    }

    #[test]
    fn rejects_singular_and_indefinite() {
        let singular = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(cholesky_lower(&singular).is_none());
        let indefinite = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(cholesky_lower(&indefinite).is_none());
    }

    #[test]
    fn empty_matrix_factors() {
        let l = cholesky_lower(&DMatrix::zeros(0, 0)).unwrap();
        assert_eq!(l.nrows(), 0);
    }
}
