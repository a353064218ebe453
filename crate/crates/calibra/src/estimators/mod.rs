//! The estimator family: the plain subgroup average, the doubly robust
//! augmented inverse-probability estimator per candidate pairing, the
//! empirical-likelihood calibrated ensemble estimator (CML), and its
//! information-borrowing extension (CMLIB) that re-weights by integration
//! scores computed from the pooled main and auxiliary samples.

mod bootstrap;
mod crossfit;
mod influence;
mod integration;

pub use bootstrap::{bootstrap_inference, BootstrapDiag};
pub use crossfit::{
    cross_fit_collect, cross_fit_estimate, stratified_split, CrossFitOutput, MethodFailure,
    TuningPlan,
};
pub use influence::{influence_variance, InfluenceOracle};
pub use integration::{
    build_g_star, cmlib_tau, integration_scores, integration_theta, IntegrationResult,
};

use ndarray::Array2;
use serde::Serialize;

use crate::data::MainDataset;
use crate::el::{self, ConstraintMatrix};
use crate::error::{CalibraError, Result};
use crate::learners::CandidatePredictions;

/// Collinearity tolerance applied to calibration constraint matrices before
/// each solve; candidate learners can emit near-identical columns.
pub const CALIBRATION_FILTER_TOL: f64 = 1e-8;

/// Ceiling accepted when the weighted moments are re-evaluated on the full,
/// unfiltered constraint set after a solve.
pub const MOMENT_CERTIFICATE_TOL: f64 = 1e-6;

/// Estimator identity for report rows.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub enum Method {
    Raw,
    /// One doubly robust estimate per candidate pairing, tagged by the
    /// candidate label.
    Aiptw(String),
    Cml,
    Cmlib,
}

impl Method {
    pub fn label(&self) -> String {
        match self {
            Method::Raw => "Raw".to_string(),
            Method::Aiptw(tag) => format!("AIPTW.{tag}"),
            Method::Cml => "CML".to_string(),
            Method::Cmlib => "CMLIB".to_string(),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.label())
    }
}

/// Numerical settings for the empirical-likelihood solves.
#[derive(Debug, Clone, Copy)]
pub struct ElSettings {
    pub tol: f64,
    pub max_iter: usize,
}

/// Diagnostics from the solve behind a calibrated estimate.
#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct ElDiag {
    pub iterations: usize,
    pub violation: f64,
    /// Constraint columns surviving the collinearity filter.
    pub kept_columns: usize,
    /// Weighted-moment residual re-evaluated on the unfiltered constraints.
    pub certificate: f64,
}

/// One per-level, per-method estimate with optional bootstrap inference.
#[derive(Debug, Clone, Serialize)]
pub struct LevelEstimate {
    pub level: usize,
    pub method: Method,
    pub tau_hat: f64,
    pub bsd: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    pub p_value: Option<f64>,
    /// Effective group size 1/Σw² of the (normalized) weights behind the
    /// estimate.
    pub n_eff: f64,
    pub el: ElDiag,
}

impl LevelEstimate {
    /// A bare point estimate, before any bootstrap augmentation.
    pub fn point(level: usize, method: Method, tau_hat: f64, n_eff: f64, el: ElDiag) -> Self {
        LevelEstimate {
            level,
            method,
            tau_hat,
            bsd: None,
            ci_low: None,
            ci_high: None,
            p_value: None,
            n_eff,
            el,
        }
    }

    /// Attach a bootstrap standard deviation; the interval is the normal
    /// approximation `point ± 1.96·BSD` and the p-value the two-sided normal
    /// test of a zero mean potential outcome.
    pub fn with_bootstrap_sd(mut self, bsd: f64) -> Self {
        self.bsd = Some(bsd);
        self.ci_low = Some(self.tau_hat - 1.96 * bsd);
        self.ci_high = Some(self.tau_hat + 1.96 * bsd);
        self.p_value = Some(crate::stats::two_sided_p(self.tau_hat, bsd));
        self
    }
}

/// Rows of the evaluation half with the given exposure level.
pub(crate) fn group_rows(x_eval: &[usize], level: usize) -> Vec<usize> {
    (0..x_eval.len()).filter(|&i| x_eval[i] == level).collect()
}

/// Normalized weighted mean `Σ w y / Σ w`. The calibration weights sum to one
/// by construction, so for CML this is the plain weighted sum; sharing the
/// normalized form with CMLIB makes the no-auxiliary reduction exact.
pub(crate) fn weighted_mean(weights: &[f64], values: &[f64]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for (w, y) in weights.iter().zip(values) {
        num += w * y;
        den += w;
    }
    num / den
}

/// Effective sample size of a weight vector after normalization.
pub(crate) fn effective_size(weights: &[f64]) -> f64 {
    let total: f64 = weights.iter().sum();
    let ss: f64 = weights.iter().map(|w| (w / total) * (w / total)).sum();
    1.0 / ss
}

/// Simple subgroup average of the observed outcomes at one exposure level.
pub fn raw_mean(main: &MainDataset, level: usize) -> Result<LevelEstimate> {
    let group = group_rows(&main.x, level);
    if group.is_empty() {
        return Err(CalibraError::Validation(format!(
            "no units at exposure level {level}"
        )));
    }
    let mean = group.iter().map(|&i| main.y[i]).sum::<f64>() / group.len() as f64;
    Ok(LevelEstimate::point(
        level,
        Method::Raw,
        mean,
        group.len() as f64,
        ElDiag::default(),
    ))
}

/// Augmented inverse-probability estimate over an evaluation set: the
/// inverse-weighted outcome corrected by the propensity-residual-weighted
/// conditional mean, averaged over all units.
pub fn aiptw_tau(
    y_eval: &[f64],
    x_eval: &[usize],
    ps: &[f64],
    cm: &[f64],
    level: usize,
) -> Result<f64> {
    let m = y_eval.len();
    let mut acc = 0.0;
    for i in 0..m {
        let pi = ps[i];
        if !(pi > 0.0 && pi < 1.0) {
            return Err(CalibraError::Validation(format!(
                "propensity estimate {pi} outside (0,1) at unit {i}"
            )));
        }
        let ind = if x_eval[i] == level { 1.0 } else { 0.0 };
        acc += ind / pi * y_eval[i] - (ind - pi) / pi * cm[i];
    }
    Ok(acc / m as f64)
}

/// Calibration constraints for one exposure group: each group unit's row
/// stacks every candidate's propensity and conditional-mean prediction,
/// centered at that candidate's average over the whole evaluation half.
/// Zeroing these moments forces the group's weighted covariate profile to
/// match the full half.
pub fn build_g(preds: &CandidatePredictions, level: usize, group: &[usize]) -> Array2<f64> {
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
        let mut mean = 0.0;
        for l in 0..m {
            mean += cm[[l, j]];
        }
        mean /= m as f64;
        for (r, &i) in group.iter().enumerate() {
            g[[r, j1 + j]] = cm[[i, j]] - mean;
        }
    }
    g
}

/// Solve the calibrated-weights problem for a constraint matrix and return
/// the weights plus diagnostics; shared by the CML and CMLIB paths.
pub(crate) fn solve_calibration(
    g_full: Array2<f64>,
    el: &ElSettings,
) -> Result<(Vec<f64>, ElDiag)> {
    let full = ConstraintMatrix::new(g_full)?;
    let (filtered, kept) = el::drop_collinear_columns(&full, CALIBRATION_FILTER_TOL);
    let solution = el::solve_el(&filtered, 1.0, el.tol, el.max_iter)?;
    // Moment certificate on the unfiltered constraints.
    let mut certificate = 0.0f64;
    for j in 0..full.q() {
        let mut s = 0.0;
        for i in 0..full.m() {
            s += solution.weights[i] * full.values[[i, j]];
        }
        certificate = certificate.max(s.abs());
    }
    if certificate > MOMENT_CERTIFICATE_TOL {
        return Err(CalibraError::NotConverged(format!(
            "moment certificate {certificate:.3e} above {MOMENT_CERTIFICATE_TOL:.0e}"
        )));
    }
    Ok((
        solution.weights.to_vec(),
        ElDiag {
            iterations: solution.iterations,
            violation: solution.max_constraint_violation,
            kept_columns: kept.len(),
            certificate,
        },
    ))
}

/// Ensemble-calibrated group estimate: empirical-likelihood weights under the
/// candidate-balancing constraints, then the weighted outcome mean.
pub fn cml_tau(
    y_eval: &[f64],
    x_eval: &[usize],
    preds: &CandidatePredictions,
    level: usize,
    el: &ElSettings,
) -> Result<(f64, f64, ElDiag)> {
    let group = group_rows(x_eval, level);
    if group.is_empty() {
        return Err(CalibraError::Validation(format!(
            "no evaluation units at exposure level {level}"
        )));
    }
    let g = build_g(preds, level, &group);
    let (weights, diag) = solve_calibration(g, el)?;
    let y_group: Vec<f64> = group.iter().map(|&i| y_eval[i]).collect();
    let tau = weighted_mean(&weights, &y_group);
    Ok((tau, effective_size(&weights), diag))
}
