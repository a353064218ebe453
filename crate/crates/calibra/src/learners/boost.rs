//! Gradient-boosted shallow trees: squared-error boosting for conditional
//! means and one-vs-rest logistic boosting for class probabilities. The
//! number of rounds is picked by k-fold cross-validation over staged
//! predictions (round 0 = base score alone), then the model is refit on the
//! full sample with that many rounds.

use ndarray::{Array1, ArrayView2};

use crate::learners::tree::{RegTree, TreeParams};
use crate::rng;

const BOOST_MIN_LEAF: usize = 5;
const LOGIT_CAP: f64 = 36.0;

#[derive(Debug, Clone, Copy)]
pub struct BoostParams {
    pub depth: usize,
    pub shrinkage: f64,
    pub max_rounds: usize,
    pub cv_folds: usize,
}

/// Squared-error gradient boosting machine.
#[derive(Debug, Clone)]
pub struct Gbm {
    pub base: f64,
    pub trees: Vec<RegTree>,
    pub shrinkage: f64,
}

impl Gbm {
    pub fn predict(&self, z: &ArrayView2<f64>) -> Array1<f64> {
        let m = z.nrows();
        let mut out = Array1::<f64>::from_elem(m, self.base);
        let mut row = vec![0.0f64; z.ncols()];
        for i in 0..m {
            for (j, v) in row.iter_mut().enumerate() {
                *v = z[[i, j]];
            }
            for tree in &self.trees {
                out[i] += self.shrinkage * tree.predict_row(&row);
            }
        }
        out
    }

    pub fn rounds(&self) -> usize {
        self.trees.len()
    }
}

fn tree_params(z: &ArrayView2<f64>, depth: usize) -> TreeParams {
    TreeParams {
        max_depth: depth,
        min_leaf: BOOST_MIN_LEAF,
        mtry: z.ncols(),
    }
}

/// Fit `rounds` squared-error boosting rounds on the given rows; after each
/// round, staged predictions for `watch` rows are handed to `on_round`.
fn boost_sse_rows<F: FnMut(usize, &[f64])>(
    z: &ArrayView2<f64>,
    y: &[f64],
    rows: &[usize],
    watch: &[usize],
    params: &BoostParams,
    mut on_round: F,
) -> Gbm {
    let base = rows.iter().map(|&i| y[i]).sum::<f64>() / rows.len().max(1) as f64;
    let n = z.nrows();
    let mut fitted = vec![base; n];
    let tp = tree_params(z, params.depth);
    let mut residual = vec![0.0f64; n];
    let mut trees = Vec::with_capacity(params.max_rounds);
    let mut watch_pred: Vec<f64> = vec![base; watch.len()];
    on_round(0, &watch_pred);
    // Deterministic: boosting trees use the full feature set, so the tree RNG
    // is never consulted; a fixed stream keeps the signature uniform.
    let mut tree_rng = rng::rng_from(0);
    let mut row_buf = vec![0.0f64; z.ncols()];
    for r in 1..=params.max_rounds {
        for &i in rows {
            residual[i] = y[i] - fitted[i];
        }
        let (tree, _) = RegTree::fit(z, &residual, rows, &tp, &mut tree_rng);
        for &i in rows {
            for (j, v) in row_buf.iter_mut().enumerate() {
                *v = z[[i, j]];
            }
            fitted[i] += params.shrinkage * tree.predict_row(&row_buf);
        }
        for (w, &i) in watch_pred.iter_mut().zip(watch) {
            for (j, v) in row_buf.iter_mut().enumerate() {
                *v = z[[i, j]];
            }
            *w += params.shrinkage * tree.predict_row(&row_buf);
        }
        trees.push(tree);
        on_round(r, &watch_pred);
    }
    Gbm {
        base,
        trees,
        shrinkage: params.shrinkage,
    }
}

/// Squared-error boosting with rounds picked by CV; `frozen_rounds` skips the
/// CV pass entirely.
pub fn fit_gbm(
    z: &ArrayView2<f64>,
    y: &[f64],
    params: &BoostParams,
    seed: u64,
    frozen_rounds: Option<usize>,
) -> Gbm {
    let n = z.nrows();
    let all: Vec<usize> = (0..n).collect();
    let rounds = match frozen_rounds {
        Some(r) => r.min(params.max_rounds),
        None => {
            let folds = make_folds(n, params.cv_folds, rng::derive(seed, rng::tag::CV));
            let mut sse_by_round = vec![0.0f64; params.max_rounds + 1];
            for fold in &folds {
                let mut in_fold = vec![false; n];
                for &i in fold {
                    in_fold[i] = true;
                }
                let train: Vec<usize> = (0..n).filter(|&i| !in_fold[i]).collect();
                if train.is_empty() {
                    continue;
                }
                boost_sse_rows(z, y, &train, fold, params, |r, staged| {
                    let mut sse = 0.0;
                    for (pred, &i) in staged.iter().zip(fold) {
                        sse += (y[i] - pred) * (y[i] - pred);
                    }
                    sse_by_round[r] += sse;
                });
            }
            argmin(&sse_by_round)
        }
    };
    let capped = BoostParams {
        max_rounds: rounds,
        ..*params
    };
    boost_sse_rows(z, y, &all, &[], &capped, |_, _| {})
}

fn argmin(xs: &[f64]) -> usize {
    let mut best = (f64::INFINITY, 0usize);
    for (i, &v) in xs.iter().enumerate() {
        if v < best.0 {
            best = (v, i);
        }
    }
    best.1
}

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

// ---------------------------------------------------------------------------
// Logistic boosting (one binary model; callers assemble one-vs-rest stacks)
// ---------------------------------------------------------------------------

/// Boosted additive model on the log-odds scale.
#[derive(Debug, Clone)]
pub struct LogitGbm {
    pub base: f64,
    pub trees: Vec<RegTree>,
    pub shrinkage: f64,
}

fn sigmoid(f: f64) -> f64 {
    1.0 / (1.0 + (-f.clamp(-LOGIT_CAP, LOGIT_CAP)).exp())
}

impl LogitGbm {
    pub fn predict_proba(&self, z: &ArrayView2<f64>) -> Array1<f64> {
        let m = z.nrows();
        let mut out = Array1::<f64>::zeros(m);
        let mut row = vec![0.0f64; z.ncols()];
        for i in 0..m {
            for (j, v) in row.iter_mut().enumerate() {
                *v = z[[i, j]];
            }
            let mut f = self.base;
            for tree in &self.trees {
                f += self.shrinkage * tree.predict_row(&row);
            }
            out[i] = sigmoid(f);
        }
        out
    }

    pub fn rounds(&self) -> usize {
        self.trees.len()
    }
}

/// One boosting pass with binomial deviance: trees are grown on the gradient
/// residuals `y - p` and each leaf takes the one-step Newton value
/// `Σ(y - p) / Σ p(1 - p)` over its region.
fn boost_logit_rows<F: FnMut(usize, &[f64])>(
    z: &ArrayView2<f64>,
    y01: &[f64],
    rows: &[usize],
    watch: &[usize],
    params: &BoostParams,
    mut on_round: F,
) -> LogitGbm {
    let n = z.nrows();
    let pos = rows.iter().map(|&i| y01[i]).sum::<f64>();
    let rate = (pos / rows.len().max(1) as f64).clamp(1e-6, 1.0 - 1e-6);
    let base = (rate / (1.0 - rate)).ln();
    let mut score = vec![base; n];
    let tp = tree_params(z, params.depth);
    let mut residual = vec![0.0f64; n];
    let mut trees = Vec::with_capacity(params.max_rounds);
    let mut watch_score = vec![base; watch.len()];
    on_round(0, &watch_score);
    let mut tree_rng = rng::rng_from(0);
    let mut row_buf = vec![0.0f64; z.ncols()];
    for r in 1..=params.max_rounds {
        for &i in rows {
            residual[i] = y01[i] - sigmoid(score[i]);
        }
        let (mut tree, leaves) = RegTree::fit(z, &residual, rows, &tp, &mut tree_rng);
        let leaf_values: Vec<(usize, f64)> = leaves
            .iter()
            .map(|(slot, members)| {
                let mut num = 0.0;
                let mut den = 0.0;
                for &i in members {
                    let p = sigmoid(score[i]);
                    num += y01[i] - p;
                    den += p * (1.0 - p);
                }
                (*slot, num / den.max(1e-12))
            })
            .collect();
        tree.set_leaf_values(&leaf_values);
        for &i in rows {
            for (j, v) in row_buf.iter_mut().enumerate() {
                *v = z[[i, j]];
            }
            score[i] = (score[i] + params.shrinkage * tree.predict_row(&row_buf))
                .clamp(-LOGIT_CAP, LOGIT_CAP);
        }
        for (w, &i) in watch_score.iter_mut().zip(watch) {
            for (j, v) in row_buf.iter_mut().enumerate() {
                *v = z[[i, j]];
            }
            *w = (*w + params.shrinkage * tree.predict_row(&row_buf)).clamp(-LOGIT_CAP, LOGIT_CAP);
        }
        trees.push(tree);
        on_round(r, &watch_score);
    }
    LogitGbm {
        base,
        trees,
        shrinkage: params.shrinkage,
    }
}

/// Logistic boosting with rounds picked by CV on held-out binomial deviance.
pub fn fit_logit_gbm(
    z: &ArrayView2<f64>,
    y01: &[f64],
    params: &BoostParams,
    seed: u64,
    frozen_rounds: Option<usize>,
) -> LogitGbm {
    let n = z.nrows();
    let all: Vec<usize> = (0..n).collect();
    let rounds = match frozen_rounds {
        Some(r) => r.min(params.max_rounds),
        None => {
            let folds = make_folds(n, params.cv_folds, rng::derive(seed, rng::tag::CV));
            let mut dev_by_round = vec![0.0f64; params.max_rounds + 1];
            for fold in &folds {
                let mut in_fold = vec![false; n];
                for &i in fold {
                    in_fold[i] = true;
                }
                let train: Vec<usize> = (0..n).filter(|&i| !in_fold[i]).collect();
                if train.is_empty() {
                    continue;
                }
                boost_logit_rows(z, y01, &train, fold, params, |r, staged| {
                    let mut dev = 0.0;
                    for (score, &i) in staged.iter().zip(fold) {
                        let p = sigmoid(*score).clamp(1e-12, 1.0 - 1e-12);
                        dev -= 2.0 * (y01[i] * p.ln() + (1.0 - y01[i]) * (1.0 - p).ln());
                    }
                    dev_by_round[r] += dev;
                });
            }
            argmin(&dev_by_round)
        }
    };
    let capped = BoostParams {
        max_rounds: rounds,
        ..*params
    };
    boost_logit_rows(z, y01, &all, &[], &capped, |_, _| {})
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use rand::Rng;

    fn params(max_rounds: usize) -> BoostParams {
        BoostParams {
            depth: 3,
            shrinkage: 0.1,
            max_rounds,
            cv_folds: 5,
        }
    }

    #[test]
    fn zero_rounds_predicts_base_score() {
        let mut z = Array2::<f64>::zeros((20, 2));
        let y: Vec<f64> = (0..20).map(|i| i as f64).collect();
        for i in 0..20 {
            z[[i, 0]] = (i as f64).cos();
        }
        let model = fit_gbm(&z.view(), &y, &params(100), 0, Some(0));
        assert_eq!(model.rounds(), 0);
        let mean = y.iter().sum::<f64>() / 20.0;
        for p in model.predict(&z.view()).iter() {
            assert_eq!(*p, mean);
        }
    }

    #[test]
    fn constant_outcome_predicts_constant() {
        let mut z = Array2::<f64>::zeros((25, 2));
        let mut rng = crate::rng::rng_from(4);
        for i in 0..25 {
            z[[i, 0]] = rng.random_range(-1.0..1.0);
            z[[i, 1]] = rng.random_range(-1.0..1.0);
        }
        let y = vec![2.5; 25];
        let model = fit_gbm(&z.view(), &y, &params(50), 11, None);
        for p in model.predict(&z.view()).iter() {
            assert!((p - 2.5).abs() < 1e-9);
        }
    }

    #[test]
    fn boosting_fits_nonlinear_signal() {
        let n = 300;
        let mut z = Array2::<f64>::zeros((n, 2));
        let mut y = vec![0.0; n];
        let mut rng = crate::rng::rng_from(6);
        for i in 0..n {
            z[[i, 0]] = rng.random_range(-2.0..2.0);
            z[[i, 1]] = rng.random_range(-2.0..2.0);
            y[i] = z[[i, 0]] * z[[i, 0]] + (z[[i, 1]] > 0.0) as i32 as f64;
        }
        let model = fit_gbm(&z.view(), &y, &params(200), 3, None);
        let preds = model.predict(&z.view());
        let sse: f64 = preds
            .iter()
            .zip(&y)
            .map(|(p, t)| (p - t) * (p - t))
            .sum::<f64>()
            / n as f64;
        assert!(sse < 0.15, "in-sample mse {sse}");
        assert!(model.rounds() > 10);
    }

    #[test]
    fn logit_boosting_separates_classes() {
        let n = 200;
        let mut z = Array2::<f64>::zeros((n, 1));
        let mut y01 = vec![0.0; n];
        let mut rng = crate::rng::rng_from(14);
        for i in 0..n {
            z[[i, 0]] = rng.random_range(-1.0..1.0);
            y01[i] = (z[[i, 0]] > 0.1) as i32 as f64;
        }
        let model = fit_logit_gbm(&z.view(), &y01, &params(150), 5, None);
        let probs = model.predict_proba(&z.view());
        let mut correct = 0;
        for i in 0..n {
            if (probs[i] > 0.5) == (y01[i] > 0.5) {
                correct += 1;
            }
        }
        assert!(correct as f64 / n as f64 > 0.9);
    }
}
