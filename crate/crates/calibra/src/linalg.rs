//! Small dense linear-algebra helpers.
//!
//! The systems solved here are tiny (the empirical-likelihood dual has a
//! handful of coordinates, ridge systems are (p+1)-dimensional), so a plain
//! Cholesky factorization is all that is needed.

use ndarray::{Array1, Array2};

/// Cholesky factorization of a symmetric positive-definite matrix.
/// Returns the lower factor, or `None` if a pivot falls below
/// `rel_tol` times the largest diagonal entry.
pub fn cholesky(a: &Array2<f64>, rel_tol: f64) -> Option<Array2<f64>> {
    let n = a.nrows();
    debug_assert_eq!(n, a.ncols());
    let max_diag = (0..n).map(|i| a[[i, i]].abs()).fold(0.0f64, f64::max);
    let floor = rel_tol * max_diag.max(f64::MIN_POSITIVE);
    let mut l = Array2::<f64>::zeros((n, n));
    for j in 0..n {
        let mut d = a[[j, j]];
        for k in 0..j {
            d -= l[[j, k]] * l[[j, k]];
        }
        if !(d > floor) {
            return None;
        }
        let dj = d.sqrt();
        l[[j, j]] = dj;
        for i in (j + 1)..n {
            let mut s = a[[i, j]];
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]];
            }
            l[[i, j]] = s / dj;
        }
    }
    Some(l)
}

/// Solve `A x = b` given the lower Cholesky factor of `A`.
pub fn cholesky_solve(l: &Array2<f64>, b: &Array1<f64>) -> Array1<f64> {
    let n = l.nrows();
    let mut y = Array1::<f64>::zeros(n);
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[[i, k]] * y[k];
        }
        y[i] = s / l[[i, i]];
    }
    let mut x = Array1::<f64>::zeros(n);
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in (i + 1)..n {
            s -= l[[k, i]] * x[k];
        }
        x[i] = s / l[[i, i]];
    }
    x
}

/// Solve a symmetric positive-definite system, escalating diagonal damping
/// until the factorization succeeds. Returns `None` only when the matrix is
/// essentially rank deficient (damping would dominate the data term).
pub fn solve_spd(a: &Array2<f64>, b: &Array1<f64>, rel_tol: f64) -> Option<Array1<f64>> {
    if let Some(l) = cholesky(a, rel_tol) {
        return Some(cholesky_solve(&l, b));
    }
    None
}
