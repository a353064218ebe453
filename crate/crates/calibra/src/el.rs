//! Empirical-likelihood weight solver.
//!
//! Maximizes `Σ log w_i` subject to `w_i > 0`, `Σ w_i = T`, and
//! `Σ w_i G_i = 0` by Newton's method on the dual. Writing
//! `w_i = (T/m) / (1 + λᵀ G_i)`, the multiplier λ is the root of
//! `Σ_i G_i / (1 + λᵀ G_i) = 0`, equivalently the minimizer of the convex
//! dual objective `-(T/m) Σ log(1 + λᵀ G_i)`. The logarithm is extended by a
//! quadratic continuation below `1/m` so the dual is globally defined and the
//! Newton iteration cannot step outside the domain.
//!
//! Callers feed this solver the calibration constraints for group weights and
//! the pooled main/auxiliary moment constraints for integration scores.

use ndarray::{Array1, Array2};

use crate::error::{CalibraError, Result};
use crate::linalg;

/// A stack of constraint rows; row `i` is the constraint vector for unit `i`.
#[derive(Debug, Clone)]
pub struct ConstraintMatrix {
    pub values: Array2<f64>,
}

impl ConstraintMatrix {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        if values.nrows() == 0 || values.ncols() == 0 {
            return Err(CalibraError::Validation(
                "constraint matrix must have at least one row and one column".into(),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(CalibraError::Validation(
                "constraint matrix contains a non-finite entry".into(),
            ));
        }
        Ok(ConstraintMatrix { values })
    }

    pub fn m(&self) -> usize {
        self.values.nrows()
    }

    pub fn q(&self) -> usize {
        self.values.ncols()
    }
}

/// Converged weights, dual multipliers, and diagnostics.
#[derive(Debug, Clone)]
pub struct ELSolution {
    pub weights: Array1<f64>,
    pub dual: Array1<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub max_constraint_violation: f64,
}

const MAX_HALVINGS: usize = 30;
/// Residual scale above which a stalled solve is diagnosed as infeasible.
const HULL_RESIDUAL_FLOOR: f64 = 1e-6;
/// Relative pivot tolerance for declaring `GᵀG` singular.
const RANK_REL_TOL: f64 = 1e-12;

/// Log with quadratic continuation below `eps`: value, first and second
/// derivative all match at `eps`, so the extended function stays strictly
/// concave and globally defined.
fn log_star(z: f64, eps: f64) -> f64 {
    if z >= eps {
        z.ln()
    } else {
        eps.ln() - 1.5 + 2.0 * z / eps - z * z / (2.0 * eps * eps)
    }
}

fn log_star_d1(z: f64, eps: f64) -> f64 {
    if z >= eps {
        1.0 / z
    } else {
        2.0 / eps - z / (eps * eps)
    }
}

fn log_star_d2(z: f64, eps: f64) -> f64 {
    if z >= eps {
        -1.0 / (z * z)
    } else {
        -1.0 / (eps * eps)
    }
}

/// Solve for positive weights with total `T` and zero weighted moments.
///
/// Convergence requires the weighted-moment residual `‖Σ w_i G_i‖∞` to fall
/// below `tol` with every `1 + λᵀG_i` strictly positive. Infeasible moment
/// systems (origin outside the convex hull of the rows) surface as
/// `ConvexHullViolation`; numerically collinear columns as `RankDeficiency`.
pub fn solve_el(g: &ConstraintMatrix, total: f64, tol: f64, max_iter: usize) -> Result<ELSolution> {
    let m = g.m();
    let q = g.q();
    if !(total > 0.0) {
        return Err(CalibraError::Validation(format!(
            "weight total must be positive; got {total}"
        )));
    }
    if q >= m {
        return Err(CalibraError::Validation(format!(
            "need more rows than constraint columns for a nondegenerate solve (m={m}, q={q})"
        )));
    }

    // A column whose entries all share one strict sign can never average to
    // zero under positive weights.
    for j in 0..q {
        let col = g.values.column(j);
        let min = col.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if (min >= 0.0 && max > 0.0) || (max <= 0.0 && min < 0.0) {
            return Err(CalibraError::ConvexHullViolation(format!(
                "constraint column {j} has single-signed entries (range [{min:.3e}, {max:.3e}])"
            )));
        }
    }

    // Column scaling: work on B = G · diag(1/s) so the dual is well
    // conditioned and weights are invariant to column rescaling.
    let mut scale = vec![1.0f64; q];
    for j in 0..q {
        let s = g.values.column(j).iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if s > 0.0 {
            scale[j] = s;
        }
    }
    let mut b = g.values.clone();
    for j in 0..q {
        if scale[j] != 1.0 {
            b.column_mut(j).mapv_inplace(|v| v / scale[j]);
        }
    }

    let eps = 1.0 / m as f64;
    let per_unit = total / m as f64;
    let dual_objective = |lambda: &Array1<f64>| -> f64 {
        let mut f = 0.0;
        for i in 0..m {
            let z = 1.0 + b.row(i).dot(lambda);
            f -= per_unit * log_star(z, eps);
        }
        f
    };

    let mut lambda = Array1::<f64>::zeros(q);
    let mut f_cur = dual_objective(&lambda);
    let mut lambda_norms: Vec<f64> = Vec::with_capacity(max_iter);

    for iter in 1..=max_iter {
        // Weighted-moment residual on the original column scale.
        let mut z = Array1::<f64>::zeros(m);
        let mut min_z = f64::INFINITY;
        for i in 0..m {
            let zi = 1.0 + b.row(i).dot(&lambda);
            z[i] = zi;
            min_z = min_z.min(zi);
        }
        let mut residual = Array1::<f64>::zeros(q);
        if min_z > 0.0 {
            for i in 0..m {
                let w = per_unit / z[i];
                for j in 0..q {
                    residual[j] += w * b[[i, j]] * scale[j];
                }
            }
            let violation = residual.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            if violation <= tol {
                let weights = Array1::from_iter((0..m).map(|i| per_unit / z[i]));
                let dual = Array1::from_iter((0..q).map(|j| lambda[j] / scale[j]));
                return Ok(ELSolution {
                    weights,
                    dual,
                    iterations: iter,
                    converged: true,
                    max_constraint_violation: violation,
                });
            }
        }

        // Newton step on the extended dual: gradient and Hessian use the
        // log-star derivatives so both exist everywhere.
        let mut grad = Array1::<f64>::zeros(q);
        let mut hess = Array2::<f64>::zeros((q, q));
        for i in 0..m {
            let d1 = log_star_d1(z[i], eps);
            let d2 = log_star_d2(z[i], eps);
            let row = b.row(i);
            for j in 0..q {
                grad[j] -= per_unit * row[j] * d1;
                for k in j..q {
                    hess[[j, k]] -= per_unit * row[j] * row[k] * d2;
                }
            }
        }
        for j in 0..q {
            for k in 0..j {
                hess[[j, k]] = hess[[k, j]];
            }
        }
        let neg_grad = grad.mapv(|v| -v);
        let step = match linalg::solve_spd(&hess, &neg_grad, RANK_REL_TOL) {
            Some(s) => s,
            None => {
                return Err(CalibraError::RankDeficiency(format!(
                    "dual Hessian numerically singular at iteration {iter}; \
                     constraint columns are collinear"
                )))
            }
        };

        // Backtracking: accept the first step length that lowers the dual.
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..=MAX_HALVINGS {
            let cand = &lambda + &step.mapv(|v| v * t);
            let f_new = dual_objective(&cand);
            if f_new < f_cur {
                lambda = cand;
                f_cur = f_new;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            // Dual cannot be decreased along the Newton direction: we are at
            // a stationary point of the extended objective. If the residual
            // is still large the moment system is infeasible.
            break;
        }
        lambda_norms.push(lambda.dot(&lambda).sqrt());
    }

    // Stalled or out of iterations: diagnose.
    let mut min_z = f64::INFINITY;
    let mut residual = vec![0.0f64; q];
    let mut z_final = vec![0.0f64; m];
    for i in 0..m {
        let zi = 1.0 + b.row(i).dot(&lambda);
        z_final[i] = zi;
        min_z = min_z.min(zi);
    }
    let mut violation = f64::INFINITY;
    if min_z > 0.0 {
        for i in 0..m {
            let w = per_unit / z_final[i];
            for j in 0..q {
                residual[j] += w * b[[i, j]] * scale[j];
            }
        }
        violation = residual.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    }
    let grew = lambda_norms.len() >= 10
        && lambda_norms
            .windows(2)
            .rev()
            .take(9)
            .all(|w| w[1] > w[0]);
    if violation > HULL_RESIDUAL_FLOOR || grew || min_z <= 0.0 {
        return Err(CalibraError::ConvexHullViolation(format!(
            "no interior solution after {max_iter} iterations \
             (residual {violation:.3e}, |dual| {:.3e})",
            lambda.dot(&lambda).sqrt()
        )));
    }
    Ok(ELSolution {
        weights: Array1::from_iter((0..m).map(|i| per_unit / z_final[i])),
        dual: Array1::from_iter((0..q).map(|j| lambda[j] / scale[j])),
        iterations: max_iter,
        converged: false,
        max_constraint_violation: violation,
    })
}

/// Greedy QR-style column filter: keep a column when its residual after
/// projection onto the span of already-kept columns exceeds `rel_tol` times
/// its own norm. Columns that are tiny relative to the largest column are
/// treated as structurally zero and dropped. At least one column (the
/// largest) is always returned, so a fully degenerate matrix still yields a
/// valid (inactive) constraint.
pub fn drop_collinear_columns(
    g: &ConstraintMatrix,
    rel_tol: f64,
) -> (ConstraintMatrix, Vec<usize>) {
    let m = g.m();
    let q = g.q();
    let norms: Vec<f64> = (0..q)
        .map(|j| g.values.column(j).dot(&g.values.column(j)).sqrt())
        .collect();
    let max_norm = norms.iter().cloned().fold(0.0f64, f64::max);
    if max_norm == 0.0 {
        let kept = vec![0usize];
        let out = g.values.column(0).to_owned().insert_axis(ndarray::Axis(1));
        return (ConstraintMatrix { values: out }, kept);
    }
    let zero_floor = rel_tol * max_norm;

    let mut basis: Vec<Array1<f64>> = Vec::new();
    let mut kept: Vec<usize> = Vec::new();
    for j in 0..q {
        if norms[j] <= zero_floor {
            continue;
        }
        let mut r = g.values.column(j).to_owned();
        // Two projection passes for numerical stability.
        for _ in 0..2 {
            for qvec in &basis {
                let c = r.dot(qvec);
                r = &r - &qvec.mapv(|v| v * c);
            }
        }
        let rn = r.dot(&r).sqrt();
        if rn > rel_tol * norms[j] {
            basis.push(r.mapv(|v| v / rn));
            kept.push(j);
        }
    }
    if kept.is_empty() {
        // Everything was near-zero or collinear below the floor; keep the
        // largest column so the caller still has a well-formed matrix.
        let j = norms
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(j, _)| j)
            .unwrap_or(0);
        kept.push(j);
    }
    let mut out = Array2::<f64>::zeros((m, kept.len()));
    for (jj, &j) in kept.iter().enumerate() {
        out.column_mut(jj).assign(&g.values.column(j));
    }
    (ConstraintMatrix { values: out }, kept)
}
