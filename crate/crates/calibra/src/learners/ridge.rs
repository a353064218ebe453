//! L2-penalized regression and softmax-linear classification with the ridge
//! strength chosen by k-fold cross-validation over a fixed grid. Covariates
//! are standardized with the training sample's means and standard deviations;
//! the intercept is never penalized. The penalty enters as `n·λ·‖β‖²/2` so a
//! given grid point means the same shrinkage at any sample size.

use ndarray::{Array1, Array2, ArrayView2};

use crate::error::{CalibraError, Result};
use crate::linalg;
use crate::rng;

/// Column means and standard deviations of the training rows; zero-variance
/// columns get unit scale so they pass through harmlessly.
#[derive(Debug, Clone)]
pub struct Standardizer {
    pub means: Array1<f64>,
    pub scales: Array1<f64>,
}

impl Standardizer {
    pub fn fit(z: &ArrayView2<f64>) -> Self {
        let n = z.nrows() as f64;
        let p = z.ncols();
        let mut means = Array1::<f64>::zeros(p);
        let mut scales = Array1::<f64>::zeros(p);
        for j in 0..p {
            let col = z.column(j);
            let m = col.sum() / n;
            let v = col.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n;
            means[j] = m;
            scales[j] = if v > 0.0 { v.sqrt() } else { 1.0 };
        }
        Standardizer { means, scales }
    }

    /// Standardize and prepend an intercept column.
    pub fn design(&self, z: &ArrayView2<f64>) -> Array2<f64> {
        let (n, p) = (z.nrows(), z.ncols());
        let mut x = Array2::<f64>::zeros((n, p + 1));
        for i in 0..n {
            x[[i, 0]] = 1.0;
            for j in 0..p {
                x[[i, j + 1]] = (z[[i, j]] - self.means[j]) / self.scales[j];
            }
        }
        x
    }
}

/// 20 log-spaced grid points; the canonical tuning grid.
pub fn default_lambda_grid() -> Vec<f64> {
    log_spaced_grid(1e-4, 1e2, 20)
}

pub fn log_spaced_grid(lo: f64, hi: f64, len: usize) -> Vec<f64> {
    if len == 1 {
        return vec![lo];
    }
    let (llo, lhi) = (lo.ln(), hi.ln());
    (0..len)
        .map(|k| (llo + (lhi - llo) * k as f64 / (len - 1) as f64).exp())
        .collect()
}

/// Deal shuffled indices into `folds` round-robin groups.
fn make_folds(n: usize, folds: usize, seed: u64) -> Vec<Vec<usize>> {
    let k = folds.min(n).max(2);
    let mut idx: Vec<usize> = (0..n).collect();
    rng::shuffle(&mut idx, &mut rng::rng_from(seed));
    let mut out = vec![Vec::new(); k];
    for (pos, i) in idx.into_iter().enumerate() {
        out[pos % k].push(i);
    }
    out
}

/// Stratified variant keeping every class in every fold complement.
fn make_folds_stratified(labels: &[usize], n_classes: usize, folds: usize, seed: u64) -> Vec<Vec<usize>> {
    let k = folds.min(labels.len()).max(2);
    let mut rng = rng::rng_from(seed);
    let mut out = vec![Vec::new(); k];
    let mut pos = 0usize;
    for c in 0..n_classes {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        rng::shuffle(&mut members, &mut rng);
        for i in members {
            out[pos % k].push(i);
            pos += 1;
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Ridge regression
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct RidgeFit {
    standardizer: Standardizer,
    /// Intercept followed by standardized-scale coefficients.
    coef: Array1<f64>,
    pub lambda: f64,
    /// (λ, summed held-out squared error) per grid point; empty when the
    /// penalty was frozen.
    pub cv_curve: Vec<(f64, f64)>,
}

fn ridge_solve(
    gram: &Array2<f64>,
    xty: &Array1<f64>,
    n_train: f64,
    lambda: f64,
) -> Option<Array1<f64>> {
    let d = gram.nrows();
    let mut a = gram.clone();
    for j in 1..d {
        a[[j, j]] += n_train * lambda;
    }
    // Unpenalized intercept; a whisper of damping keeps the factorization
    // well posed when a covariate column is constant.
    a[[0, 0]] += 1e-12 * n_train.max(1.0);
    linalg::solve_spd(&a, xty, 1e-14)
}

/// Fit ridge regression of `y` on `z`. When `frozen_lambda` is given the CV
/// step is skipped entirely and that penalty is used as-is.
pub fn fit_ridge_regression(
    z: &ArrayView2<f64>,
    y: &[f64],
    grid: &[f64],
    cv_folds: usize,
    seed: u64,
    frozen_lambda: Option<f64>,
) -> Result<RidgeFit> {
    let n = z.nrows();
    if n == 0 || grid.is_empty() {
        return Err(CalibraError::Validation(
            "ridge regression needs rows and a non-empty grid".into(),
        ));
    }
    let standardizer = Standardizer::fit(z);
    let x = standardizer.design(z);
    let d = x.ncols();
    let yv = Array1::from_iter(y.iter().cloned());
    let gram_all = x.t().dot(&x);
    let xty_all = x.t().dot(&yv);

    let mut cv_curve = Vec::new();
    let lambda = match frozen_lambda {
        Some(l) => l,
        None if grid.len() == 1 => grid[0],
        None => {
            let folds = make_folds(n, cv_folds, rng::derive(seed, rng::tag::CV));
            // Per-fold Gram blocks let each training fit be assembled by
            // subtraction instead of re-scanning the data.
            let fold_parts: Vec<(Array2<f64>, Array1<f64>)> = folds
                .iter()
                .map(|fold| {
                    let mut g = Array2::<f64>::zeros((d, d));
                    let mut b = Array1::<f64>::zeros(d);
                    for &i in fold {
                        let xi = x.row(i);
                        for a in 0..d {
                            b[a] += xi[a] * yv[i];
                            for c in a..d {
                                g[[a, c]] += xi[a] * xi[c];
                            }
                        }
                    }
                    for a in 0..d {
                        for c in 0..a {
                            g[[a, c]] = g[[c, a]];
                        }
                    }
                    (g, b)
                })
                .collect();
            let mut best = (f64::INFINITY, grid[0]);
            for &lam in grid {
                let mut sse = 0.0;
                for (fold, (g_f, b_f)) in folds.iter().zip(&fold_parts) {
                    let g_tr = &gram_all - g_f;
                    let b_tr = &xty_all - b_f;
                    let n_tr = (n - fold.len()) as f64;
                    match ridge_solve(&g_tr, &b_tr, n_tr, lam) {
                        Some(beta) => {
                            for &i in fold {
                                let pred = x.row(i).dot(&beta);
                                sse += (yv[i] - pred) * (yv[i] - pred);
                            }
                        }
                        None => sse = f64::INFINITY,
                    }
                }
                cv_curve.push((lam, sse));
                if sse < best.0 {
                    best = (sse, lam);
                }
            }
            best.1
        }
    };

    let coef = ridge_solve(&gram_all, &xty_all, n as f64, lambda).ok_or_else(|| {
        CalibraError::RankDeficiency("ridge normal equations are singular".into())
    })?;
    Ok(RidgeFit {
        standardizer,
        coef,
        lambda,
        cv_curve,
    })
}

impl RidgeFit {
    pub fn predict(&self, z: &ArrayView2<f64>) -> Array1<f64> {
        self.standardizer.design(z).dot(&self.coef)
    }
}

// ---------------------------------------------------------------------------
// Multinomial ridge logistic regression
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct MultinomialFit {
    standardizer: Standardizer,
    /// (K-1) × (p+1) coefficients; class 0 is the baseline.
    coef: Array2<f64>,
    pub n_classes: usize,
    pub lambda: f64,
    /// (λ, summed held-out deviance) per grid point.
    pub cv_curve: Vec<(f64, f64)>,
}

fn softmax_probs(coef: &Array2<f64>, x_row: ndarray::ArrayView1<f64>) -> Vec<f64> {
    let km1 = coef.nrows();
    let mut eta = vec![0.0f64; km1 + 1];
    for k in 0..km1 {
        eta[k + 1] = coef.row(k).dot(&x_row);
    }
    let max = eta.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut probs: Vec<f64> = eta.iter().map(|e| (e - max).exp()).collect();
    let sum: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|p| *p /= sum);
    probs
}

/// Penalized negative log-likelihood; the optimization objective.
fn multinomial_nll(
    x: &Array2<f64>,
    labels: &[usize],
    rows: &[usize],
    coef: &Array2<f64>,
    lambda_n: f64,
) -> f64 {
    let mut nll = 0.0;
    for &i in rows {
        let probs = softmax_probs(coef, x.row(i));
        nll -= probs[labels[i]].max(1e-300).ln();
    }
    let mut pen = 0.0;
    for k in 0..coef.nrows() {
        for j in 1..coef.ncols() {
            pen += coef[[k, j]] * coef[[k, j]];
        }
    }
    nll + 0.5 * lambda_n * pen
}

/// Full Newton fit of the softmax model on the given rows. `warm` seeds the
/// iteration when tuning walks the grid.
fn fit_multinomial_rows(
    x: &Array2<f64>,
    labels: &[usize],
    rows: &[usize],
    n_classes: usize,
    lambda: f64,
    warm: Option<&Array2<f64>>,
) -> Result<Array2<f64>> {
    let d = x.ncols();
    let km1 = n_classes - 1;
    let dim = km1 * d;
    let n_tr = rows.len() as f64;
    let lambda_n = lambda * n_tr;
    let mut coef = warm.cloned().unwrap_or_else(|| Array2::zeros((km1, d)));
    let mut nll = multinomial_nll(x, labels, rows, &coef, lambda_n);

    for _iter in 0..100 {
        let mut grad = Array1::<f64>::zeros(dim);
        let mut hess = Array2::<f64>::zeros((dim, dim));
        for &i in rows {
            let xi = x.row(i);
            let probs = softmax_probs(&coef, xi);
            for k in 0..km1 {
                let resid = probs[k + 1] - if labels[i] == k + 1 { 1.0 } else { 0.0 };
                for a in 0..d {
                    grad[k * d + a] += xi[a] * resid;
                }
                for l in k..km1 {
                    let w = probs[k + 1]
                        * (if k == l { 1.0 } else { 0.0 } - probs[l + 1]);
                    for a in 0..d {
                        let base = xi[a] * w;
                        for c in 0..d {
                            hess[[k * d + a, l * d + c]] += base * xi[c];
                        }
                    }
                }
            }
        }
        // Mirror the upper block triangle and add the penalty.
        for k in 0..km1 {
            for l in 0..k {
                for a in 0..d {
                    for c in 0..d {
                        hess[[k * d + a, l * d + c]] = hess[[l * d + c, k * d + a]];
                    }
                }
            }
        }
        for k in 0..km1 {
            grad[k * d] += 0.0; // intercept unpenalized
            for j in 1..d {
                grad[k * d + j] += lambda_n * coef[[k, j]];
                hess[[k * d + j, k * d + j]] += lambda_n;
            }
            hess[[k * d, k * d]] += 1e-10 * n_tr.max(1.0);
        }
        let gnorm = grad.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if gnorm <= 1e-9 * n_tr.max(1.0) {
            break;
        }
        let step = linalg::solve_spd(&hess, &grad.mapv(|v| -v), 1e-13).ok_or_else(|| {
            CalibraError::RankDeficiency("softmax Newton system is singular".into())
        })?;
        let mut t = 1.0;
        let mut improved = false;
        for _ in 0..30 {
            let mut cand = coef.clone();
            for k in 0..km1 {
                for a in 0..d {
                    cand[[k, a]] += t * step[k * d + a];
                }
            }
            let cand_nll = multinomial_nll(x, labels, rows, &cand, lambda_n);
            if cand_nll < nll {
                coef = cand;
                nll = cand_nll;
                improved = true;
                break;
            }
            t *= 0.5;
        }
        if !improved {
            break;
        }
    }
    Ok(coef)
}

/// Fit the softmax-linear propensity model with ridge strength from CV on
/// multinomial deviance. Requires every class in the training rows.
pub fn fit_ridge_multinomial(
    z: &ArrayView2<f64>,
    labels: &[usize],
    n_classes: usize,
    grid: &[f64],
    cv_folds: usize,
    seed: u64,
    frozen_lambda: Option<f64>,
) -> Result<MultinomialFit> {
    let n = z.nrows();
    if grid.is_empty() {
        return Err(CalibraError::Validation("empty ridge grid".into()));
    }
    let mut present = vec![false; n_classes];
    for &l in labels {
        present[l] = true;
    }
    if let Some(c) = present.iter().position(|p| !p) {
        return Err(CalibraError::Validation(format!(
            "exposure level {c} absent from the training rows"
        )));
    }
    let standardizer = Standardizer::fit(z);
    let x = standardizer.design(z);
    let all_rows: Vec<usize> = (0..n).collect();

    // Walk the grid from the most to the least regularized point, warm
    // starting each fit from its neighbour.
    let mut order: Vec<usize> = (0..grid.len()).collect();
    order.sort_by(|&a, &b| grid[b].total_cmp(&grid[a]));

    let mut cv_curve = vec![(0.0, 0.0); grid.len()];
    let lambda = match frozen_lambda {
        Some(l) => l,
        None if grid.len() == 1 => grid[0],
        None => {
            let folds = make_folds_stratified(
                labels,
                n_classes,
                cv_folds,
                rng::derive(seed, rng::tag::CV),
            );
            let mut deviances = vec![0.0f64; grid.len()];
            for fold in &folds {
                let mut in_fold = vec![false; n];
                for &i in fold {
                    in_fold[i] = true;
                }
                let train: Vec<usize> = (0..n).filter(|&i| !in_fold[i]).collect();
                let mut train_present = vec![false; n_classes];
                for &i in &train {
                    train_present[labels[i]] = true;
                }
                if train_present.iter().any(|p| !p) {
                    return Err(CalibraError::Validation(
                        "a cross-validation fold lost an exposure level".into(),
                    ));
                }
                let mut warm: Option<Array2<f64>> = None;
                for &gi in &order {
                    let coef =
                        fit_multinomial_rows(&x, labels, &train, n_classes, grid[gi], warm.as_ref())?;
                    let mut dev = 0.0;
                    for &i in fold {
                        let probs = softmax_probs(&coef, x.row(i));
                        dev -= 2.0 * probs[labels[i]].max(1e-300).ln();
                    }
                    deviances[gi] += dev;
                    warm = Some(coef);
                }
            }
            for (gi, &lam) in grid.iter().enumerate() {
                cv_curve[gi] = (lam, deviances[gi]);
            }
            let mut best = (f64::INFINITY, grid[0]);
            for (gi, &lam) in grid.iter().enumerate() {
                if deviances[gi] < best.0 {
                    best = (deviances[gi], lam);
                }
            }
            best.1
        }
    };
    if frozen_lambda.is_some() || grid.len() == 1 {
        cv_curve.clear();
    }

    let coef = fit_multinomial_rows(&x, labels, &all_rows, n_classes, lambda, None)?;
    Ok(MultinomialFit {
        standardizer,
        coef,
        n_classes,
        lambda,
        cv_curve,
    })
}

impl MultinomialFit {
    /// Class probabilities, one row per evaluation unit.
    pub fn predict_proba(&self, z: &ArrayView2<f64>) -> Array2<f64> {
        let x = self.standardizer.design(z);
        let mut out = Array2::<f64>::zeros((z.nrows(), self.n_classes));
        for i in 0..z.nrows() {
            let probs = softmax_probs(&self.coef, x.row(i));
            for (k, p) in probs.iter().enumerate() {
                out[[i, k]] = *p;
            }
        }
        out
    }
}
