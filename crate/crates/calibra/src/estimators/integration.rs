//! Integration scores and the information-borrowing estimator.
//!
//! A working moment function shared by the main and auxiliary samples is
//! stacked into per-sample blocks, and empirical likelihood over the pooled
//! units turns the over-identification into informative unit scores: units
//! whose outcomes pull the two samples apart are down-weighted, units that
//! reconcile them are up-weighted. With no auxiliary data the scores are
//! identically one and the whole path collapses to the plain calibrated
//! estimator.

use ndarray::{Array1, Array2};

use crate::data::{AuxDataset, MainDataset, WorkingFunction};
use crate::el::{self, ConstraintMatrix};
use crate::error::{CalibraError, Result};
use crate::learners::CandidatePredictions;
use crate::linalg;

use super::{
    effective_size, group_rows, solve_calibration, weighted_mean, ElDiag, ElSettings,
    CALIBRATION_FILTER_TOL, MOMENT_CERTIFICATE_TOL,
};

/// Integration scores over the pooled sample (main units first), with the
/// working-moment parameter they were computed at.
#[derive(Debug, Clone)]
pub struct IntegrationResult {
    pub theta_hat: Vec<f64>,
    pub scores: Array1<f64>,
    pub dual: Vec<f64>,
    pub iterations: usize,
    pub violation: f64,
}

impl IntegrationResult {
    /// Scores for the main-data units (the leading n entries).
    pub fn main_scores(&self, n: usize) -> &[f64] {
        &self.scores.as_slice().expect("contiguous")[..n]
    }
}

/// Working-moment design row for one unit under form II: an intercept plus
/// one indicator per non-baseline exposure level.
fn design_row(x: usize, levels: usize) -> Vec<f64> {
    let mut d = vec![0.0; levels];
    d[0] = 1.0;
    for level in 1..levels {
        d[level] = if x == level { 1.0 } else { 0.0 };
    }
    d
}

/// Solve the pooled working-moment equations directly: the pooled outcome
/// mean under form I, the least-squares fit of outcome on exposure
/// indicators under form II. Equivalent to profiling the nuisance parameter
/// out of the pooled empirical likelihood, at a fraction of the cost.
pub fn integration_theta(
    main: &MainDataset,
    aux: &AuxDataset,
    form: WorkingFunction,
) -> Result<Vec<f64>> {
    integration_theta_parts(
        main.y.as_slice().expect("contiguous"),
        &main.x,
        aux.y.as_slice().expect("contiguous"),
        &aux.x,
        main.levels(),
        form,
    )
}

/// Slice-level core of [`integration_theta`].
pub fn integration_theta_parts(
    y_main: &[f64],
    x_main: &[usize],
    y_aux: &[f64],
    x_aux: &[usize],
    levels: usize,
    form: WorkingFunction,
) -> Result<Vec<f64>> {
    let n_total = y_main.len() + y_aux.len();
    if n_total < 2 {
        return Err(CalibraError::Validation(
            "pooled sample too small for the working moment".into(),
        ));
    }
    match form {
        WorkingFunction::FormI => {
            let sum: f64 = y_main.iter().chain(y_aux.iter()).sum();
            Ok(vec![sum / n_total as f64])
        }
        WorkingFunction::FormII => {
            let mut xtx = Array2::<f64>::zeros((levels, levels));
            let mut xty = Array1::<f64>::zeros(levels);
            let pooled = x_main
                .iter()
                .chain(x_aux.iter())
                .zip(y_main.iter().chain(y_aux.iter()));
            for (&x, &y) in pooled {
                let d = design_row(x, levels);
                for a in 0..levels {
                    xty[a] += d[a] * y;
                    for b in a..levels {
                        xtx[[a, b]] += d[a] * d[b];
                    }
                }
            }
            for a in 0..levels {
                for b in 0..a {
                    xtx[[a, b]] = xtx[[b, a]];
                }
            }
            let theta = linalg::solve_spd(&xtx, &xty, 1e-12).ok_or_else(|| {
                CalibraError::RankDeficiency(
                    "working-moment design is rank deficient (an exposure level is missing)"
                        .into(),
                )
            })?;
            Ok(theta.to_vec())
        }
    }
}

fn moment_row(y: f64, x: usize, levels: usize, theta: &[f64], form: WorkingFunction) -> Vec<f64> {
    match form {
        WorkingFunction::FormI => vec![y - theta[0]],
        WorkingFunction::FormII => {
            let d = design_row(x, levels);
            let fitted: f64 = d.iter().zip(theta).map(|(a, b)| a * b).sum();
            let resid = y - fitted;
            d.into_iter().map(|v| v * resid).collect()
        }
    }
}

/// Maximize the pooled empirical likelihood subject to zero weighted moments
/// in both the main and the auxiliary block. With no auxiliary units the
/// over-identification vanishes and every score is exactly one, so this
/// short-circuits to the unit vector.
pub fn integration_scores(
    main: &MainDataset,
    aux: &AuxDataset,
    theta: &[f64],
    form: WorkingFunction,
    el: &ElSettings,
) -> Result<IntegrationResult> {
    integration_scores_parts(
        main.y.as_slice().expect("contiguous"),
        &main.x,
        aux.y.as_slice().expect("contiguous"),
        &aux.x,
        main.levels(),
        theta,
        form,
        el,
    )
}

/// Slice-level core of [`integration_scores`].
#[allow(clippy::too_many_arguments)]
pub fn integration_scores_parts(
    y_main: &[f64],
    x_main: &[usize],
    y_aux: &[f64],
    x_aux: &[usize],
    levels: usize,
    theta: &[f64],
    form: WorkingFunction,
    el: &ElSettings,
) -> Result<IntegrationResult> {
    let n = y_main.len();
    if y_aux.is_empty() {
        return Ok(IntegrationResult {
            theta_hat: theta.to_vec(),
            scores: Array1::ones(n),
            dual: Vec::new(),
            iterations: 0,
            violation: 0.0,
        });
    }
    let n_total = n + y_aux.len();
    let hdim = match form {
        WorkingFunction::FormI => 1,
        WorkingFunction::FormII => levels,
    };
    let mut h = Array2::<f64>::zeros((n_total, 2 * hdim));
    for i in 0..n {
        let row = moment_row(y_main[i], x_main[i], levels, theta, form);
        for (j, v) in row.into_iter().enumerate() {
            h[[i, j]] = v;
        }
    }
    for i in 0..y_aux.len() {
        let row = moment_row(y_aux[i], x_aux[i], levels, theta, form);
        for (j, v) in row.into_iter().enumerate() {
            h[[n + i, hdim + j]] = v;
        }
    }

    let full = ConstraintMatrix::new(h)?;
    let (filtered, kept) = el::drop_collinear_columns(&full, CALIBRATION_FILTER_TOL);
    let solution = el::solve_el(&filtered, n_total as f64, el.tol, el.max_iter).map_err(|e| {
        match e {
            CalibraError::ConvexHullViolation(msg) => CalibraError::ConvexHullViolation(format!(
                "auxiliary data incompatible with main data moments; \
                 the pooled working-moment constraints have no interior solution ({msg})"
            )),
            other => other,
        }
    })?;
    // Certificate over the unfiltered moment blocks.
    let mut certificate = 0.0f64;
    for j in 0..full.q() {
        let mut s = 0.0;
        for i in 0..full.m() {
            s += solution.weights[i] * full.values[[i, j]];
        }
        certificate = certificate.max(s.abs());
    }
    if certificate > MOMENT_CERTIFICATE_TOL * n_total as f64 {
        return Err(CalibraError::NotConverged(format!(
            "integration-score certificate {certificate:.3e} out of bounds"
        )));
    }
    let _ = kept;
    Ok(IntegrationResult {
        theta_hat: theta.to_vec(),
        scores: solution.weights,
        dual: solution.dual.to_vec(),
        iterations: solution.iterations,
        violation: solution.max_constraint_violation,
    })
}

/// Calibration constraints with integration scores folded in: propensity
/// columns are unchanged, while each conditional-mean column couples the
/// score-weighted prediction with the score shortfall times the average
/// prediction, which is what guarantees the variance reduction.
pub fn build_g_star(
    preds: &CandidatePredictions,
    scores_eval: &[f64],
    level: usize,
    group: &[usize],
) -> Array2<f64> {
    let m = preds.n_units();
    let j1 = preds.j1();
    let j2 = preds.j2();
    let ps = &preds.ps[level];
    let cm = &preds.cm[level];
    let mut g = Array2::<f64>::zeros((group.len(), j1 + j2));
    for j in 0..j1 {
        let mut mean = 0.0;
        for l in 0..m {
            mean += ps[[l, j]];
        }
        mean /= m as f64;
        for (r, &i) in group.iter().enumerate() {
            g[[r, j]] = ps[[i, j]] - mean;
        }
    }
    for j in 0..j2 {
        let mut weighted_mean_term = 0.0;
        let mut plain_mean = 0.0;
        for l in 0..m {
            weighted_mean_term += scores_eval[l] * cm[[l, j]];
            plain_mean += cm[[l, j]];
        }
        weighted_mean_term /= m as f64;
        plain_mean /= m as f64;
        for (r, &i) in group.iter().enumerate() {
            g[[r, j1 + j]] = scores_eval[i] * cm[[i, j]] - weighted_mean_term
                + (1.0 - scores_eval[i]) * plain_mean;
        }
    }
    g
}

/// Doubly weighted group estimate: integration scores times recalibrated
/// weights, normalized within the group.
pub fn cmlib_tau(
    y_eval: &[f64],
    x_eval: &[usize],
    preds: &CandidatePredictions,
    scores_eval: &[f64],
    level: usize,
    el: &ElSettings,
) -> Result<(f64, f64, ElDiag)> {
    let group = group_rows(x_eval, level);
    if group.is_empty() {
        return Err(CalibraError::Validation(format!(
            "no evaluation units at exposure level {level}"
        )));
    }
    let g_star = build_g_star(preds, scores_eval, level, &group);
    let (omega, diag) = solve_calibration(g_star, el)?;
    let y_group: Vec<f64> = group.iter().map(|&i| y_eval[i]).collect();
    let combined: Vec<f64> = group
        .iter()
        .zip(&omega)
        .map(|(&i, w)| scores_eval[i] * w)
        .collect();
    let tau = weighted_mean(&combined, &y_group);
    Ok((tau, effective_size(&combined), diag))
}
