//! Candidate learners for the propensity score and the conditional outcome
//! mean: L2-penalized (multinomial) regression, random forests, and gradient
//! boosting, each with its own cross-validated tuning. The ensemble never
//! picks a winner; all candidate predictions are handed downstream where
//! empirical-likelihood calibration weighs them jointly.

pub mod boost;
pub mod forest;
pub mod ridge;
pub mod tree;

use ndarray::{Array1, Array2, ArrayView2};
use serde::Serialize;

use crate::data::{MainDataset, StudyConfig};
use crate::error::{CalibraError, Result};
use crate::rng;

pub use boost::BoostParams;

/// One candidate algorithm together with its hyperparameter search space.
#[derive(Debug, Clone)]
pub enum LearnerSpec {
    RidgeRegression {
        grid: Vec<f64>,
        cv_folds: usize,
    },
    RidgeMultinomial {
        grid: Vec<f64>,
        cv_folds: usize,
    },
    RandomForest {
        n_trees: usize,
        mtry: Option<usize>,
        min_leaf: usize,
    },
    GradientBoosting {
        depth: usize,
        shrinkage: f64,
        max_rounds: usize,
        cv_folds: usize,
    },
}

impl LearnerSpec {
    pub fn ridge_regression_default() -> Self {
        LearnerSpec::RidgeRegression {
            grid: ridge::default_lambda_grid(),
            cv_folds: 5,
        }
    }

    pub fn ridge_multinomial_default() -> Self {
        LearnerSpec::RidgeMultinomial {
            grid: ridge::default_lambda_grid(),
            cv_folds: 5,
        }
    }

    pub fn forest_default() -> Self {
        LearnerSpec::RandomForest {
            n_trees: 1000,
            mtry: None,
            min_leaf: 5,
        }
    }

    pub fn boosting_default() -> Self {
        LearnerSpec::GradientBoosting {
            depth: 3,
            shrinkage: 0.1,
            max_rounds: 500,
            cv_folds: 10,
        }
    }

    /// Short label used for report method tags and candidate pairing.
    pub fn label(&self) -> &'static str {
        match self {
            LearnerSpec::RidgeRegression { .. } | LearnerSpec::RidgeMultinomial { .. } => "ridge",
            LearnerSpec::RandomForest { .. } => "forest",
            LearnerSpec::GradientBoosting { .. } => "boost",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            LearnerSpec::RidgeRegression { grid, cv_folds }
            | LearnerSpec::RidgeMultinomial { grid, cv_folds } => {
                if grid.is_empty() {
                    return Err(CalibraError::Validation("ridge grid is empty".into()));
                }
                if grid.iter().any(|l| !(*l > 0.0)) {
                    return Err(CalibraError::Validation(
                        "ridge grid entries must be positive".into(),
                    ));
                }
                if *cv_folds < 2 {
                    return Err(CalibraError::Validation("cv_folds must be >= 2".into()));
                }
            }
            LearnerSpec::RandomForest { n_trees, min_leaf, .. } => {
                if *n_trees < 1 {
                    return Err(CalibraError::Validation("n_trees must be >= 1".into()));
                }
                if *min_leaf < 1 {
                    return Err(CalibraError::Validation("min_leaf must be >= 1".into()));
                }
            }
            LearnerSpec::GradientBoosting { depth, shrinkage, cv_folds, .. } => {
                if *depth < 1 {
                    return Err(CalibraError::Validation("boost depth must be >= 1".into()));
                }
                if !(*shrinkage > 0.0 && *shrinkage <= 1.0) {
                    return Err(CalibraError::Validation(
                        "boost shrinkage must lie in (0, 1]".into(),
                    ));
                }
                if *cv_folds < 2 {
                    return Err(CalibraError::Validation("cv_folds must be >= 2".into()));
                }
            }
        }
        Ok(())
    }
}

/// Hyperparameter values a tuning pass settled on; replayed verbatim when the
/// bootstrap refits with frozen tuning.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum SelectedHyper {
    None,
    RidgeLambda(f64),
    BoostRounds(usize),
    /// One-vs-rest boosting keeps one round count per exposure level.
    BoostRoundsPerLevel(Vec<usize>),
}

/// Fitted propensity model over all exposure levels.
pub enum FittedPs {
    Multinomial(ridge::MultinomialFit),
    Forest(forest::ClassForest),
    /// One logistic boosting model per level; probabilities renormalized at
    /// prediction time.
    Boost(Vec<boost::LogitGbm>),
}

pub struct FittedPsModel {
    pub model: FittedPs,
    pub label: &'static str,
    pub selected: SelectedHyper,
    /// Ridge tuning curve (λ, CV deviance) when a grid search ran.
    pub cv_curve: Vec<(f64, f64)>,
}

/// Fitted conditional-mean model for a single exposure level.
pub enum FittedCm {
    Ridge(ridge::RidgeFit),
    Forest(forest::RegForest),
    Boost(boost::Gbm),
}

pub struct FittedCmModel {
    pub model: FittedCm,
    pub label: &'static str,
    pub selected: SelectedHyper,
    pub cv_curve: Vec<(f64, f64)>,
}

/// Fit one propensity candidate as a multinomial model over `levels` classes.
pub fn fit_ps(
    spec: &LearnerSpec,
    z_train: &ArrayView2<f64>,
    x_train: &[usize],
    levels: usize,
    seed: u64,
    frozen: Option<&SelectedHyper>,
) -> Result<FittedPsModel> {
    let mut present = vec![false; levels];
    for &x in x_train {
        present[x] = true;
    }
    if let Some(missing) = present.iter().position(|p| !p) {
        return Err(CalibraError::Validation(format!(
            "exposure level {missing} absent from the training rows"
        )));
    }
    match spec {
        LearnerSpec::RidgeMultinomial { grid, cv_folds } => {
            let frozen_lambda = match frozen {
                Some(SelectedHyper::RidgeLambda(l)) => Some(*l),
                None => None,
                Some(other) => {
                    return Err(CalibraError::Validation(format!(
                        "frozen hyperparameter {other:?} does not fit a ridge propensity model"
                    )))
                }
            };
            let fit = ridge::fit_ridge_multinomial(
                z_train,
                x_train,
                levels,
                grid,
                *cv_folds,
                seed,
                frozen_lambda,
            )?;
            Ok(FittedPsModel {
                selected: SelectedHyper::RidgeLambda(fit.lambda),
                cv_curve: fit.cv_curve.clone(),
                label: "ridge",
                model: FittedPs::Multinomial(fit),
            })
        }
        LearnerSpec::RidgeRegression { .. } => Err(CalibraError::Validation(
            "ridge regression is an outcome-mean learner; use the multinomial form for the propensity score".into(),
        )),
        LearnerSpec::RandomForest { n_trees, mtry, min_leaf } => {
            let forest = forest::fit_class_forest(
                z_train, x_train, levels, *n_trees, *mtry, *min_leaf, seed,
            );
            Ok(FittedPsModel {
                model: FittedPs::Forest(forest),
                label: "forest",
                selected: SelectedHyper::None,
                cv_curve: Vec::new(),
            })
        }
        LearnerSpec::GradientBoosting { depth, shrinkage, max_rounds, cv_folds } => {
            let params = BoostParams {
                depth: *depth,
                shrinkage: *shrinkage,
                max_rounds: *max_rounds,
                cv_folds: *cv_folds,
            };
            let frozen_rounds: Option<Vec<usize>> = match frozen {
                Some(SelectedHyper::BoostRoundsPerLevel(r)) => Some(r.clone()),
                None => None,
                Some(other) => {
                    return Err(CalibraError::Validation(format!(
                        "frozen hyperparameter {other:?} does not fit a boosted propensity model"
                    )))
                }
            };
            let mut models = Vec::with_capacity(levels);
            let mut rounds = Vec::with_capacity(levels);
            for level in 0..levels {
                let y01: Vec<f64> = x_train
                    .iter()
                    .map(|&x| if x == level { 1.0 } else { 0.0 })
                    .collect();
                let fr = frozen_rounds.as_ref().map(|r| r[level]);
                let model = boost::fit_logit_gbm(
                    z_train,
                    &y01,
                    &params,
                    rng::derive_indexed(seed, rng::tag::LEARNER_PS, level as u64),
                    fr,
                );
                rounds.push(model.rounds());
                models.push(model);
            }
            Ok(FittedPsModel {
                model: FittedPs::Boost(models),
                label: "boost",
                selected: SelectedHyper::BoostRoundsPerLevel(rounds),
                cv_curve: Vec::new(),
            })
        }
    }
}

/// Raw class probabilities before clipping and renormalization.
pub fn predict_ps(model: &FittedPsModel, z_eval: &ArrayView2<f64>) -> Array2<f64> {
    match &model.model {
        FittedPs::Multinomial(fit) => fit.predict_proba(z_eval),
        FittedPs::Forest(f) => f.predict_proba(z_eval),
        FittedPs::Boost(models) => {
            let m = z_eval.nrows();
            let k = models.len();
            let mut out = Array2::<f64>::zeros((m, k));
            for (level, model) in models.iter().enumerate() {
                let probs = model.predict_proba(z_eval);
                for i in 0..m {
                    out[[i, level]] = probs[i];
                }
            }
            // One-vs-rest scores are renormalized so each unit's class
            // probabilities sum to one.
            for i in 0..m {
                let s: f64 = (0..k).map(|c| out[[i, c]]).sum();
                if s > 0.0 {
                    for c in 0..k {
                        out[[i, c]] /= s;
                    }
                }
            }
            out
        }
    }
}

/// Smallest exposure subgroup on which a conditional-mean fit is attempted.
pub fn cm_subgroup_floor(p: usize) -> usize {
    10.max(p / 10)
}

/// Fit one conditional-mean candidate on the `x == level` subgroup of the
/// training rows; the model predicts counterfactual means for arbitrary rows.
pub fn fit_cm(
    spec: &LearnerSpec,
    z_train: &ArrayView2<f64>,
    y_train: &[f64],
    x_train: &[usize],
    level: usize,
    seed: u64,
    frozen: Option<&SelectedHyper>,
) -> Result<FittedCmModel> {
    let rows: Vec<usize> = (0..x_train.len()).filter(|&i| x_train[i] == level).collect();
    let floor = cm_subgroup_floor(z_train.ncols());
    if rows.len() < floor {
        return Err(CalibraError::Validation(format!(
            "exposure level {level} has {} training units; conditional-mean fits need at least {floor}",
            rows.len()
        )));
    }
    let z_sub = select_rows(z_train, &rows);
    let y_sub: Vec<f64> = rows.iter().map(|&i| y_train[i]).collect();
    match spec {
        LearnerSpec::RidgeRegression { grid, cv_folds } => {
            let frozen_lambda = match frozen {
                Some(SelectedHyper::RidgeLambda(l)) => Some(*l),
                None => None,
                Some(other) => {
                    return Err(CalibraError::Validation(format!(
                        "frozen hyperparameter {other:?} does not fit a ridge outcome model"
                    )))
                }
            };
            let fit = ridge::fit_ridge_regression(
                &z_sub.view(),
                &y_sub,
                grid,
                *cv_folds,
                seed,
                frozen_lambda,
            )?;
            Ok(FittedCmModel {
                selected: SelectedHyper::RidgeLambda(fit.lambda),
                cv_curve: fit.cv_curve.clone(),
                label: "ridge",
                model: FittedCm::Ridge(fit),
            })
        }
        LearnerSpec::RidgeMultinomial { .. } => Err(CalibraError::Validation(
            "multinomial ridge is a propensity learner; use ridge regression for outcome means".into(),
        )),
        LearnerSpec::RandomForest { n_trees, mtry, min_leaf } => {
            let forest =
                forest::fit_reg_forest(&z_sub.view(), &y_sub, *n_trees, *mtry, *min_leaf, seed);
            Ok(FittedCmModel {
                model: FittedCm::Forest(forest),
                label: "forest",
                selected: SelectedHyper::None,
                cv_curve: Vec::new(),
            })
        }
        LearnerSpec::GradientBoosting { depth, shrinkage, max_rounds, cv_folds } => {
            let params = BoostParams {
                depth: *depth,
                shrinkage: *shrinkage,
                max_rounds: *max_rounds,
                cv_folds: *cv_folds,
            };
            let frozen_rounds = match frozen {
                Some(SelectedHyper::BoostRounds(r)) => Some(*r),
                None => None,
                Some(other) => {
                    return Err(CalibraError::Validation(format!(
                        "frozen hyperparameter {other:?} does not fit a boosted outcome model"
                    )))
                }
            };
            let model = boost::fit_gbm(&z_sub.view(), &y_sub, &params, seed, frozen_rounds);
            Ok(FittedCmModel {
                selected: SelectedHyper::BoostRounds(model.rounds()),
                label: "boost",
                model: FittedCm::Boost(model),
                cv_curve: Vec::new(),
            })
        }
    }
}

pub fn predict_cm(model: &FittedCmModel, z_eval: &ArrayView2<f64>) -> Array1<f64> {
    match &model.model {
        FittedCm::Ridge(fit) => fit.predict(z_eval),
        FittedCm::Forest(f) => f.predict(z_eval),
        FittedCm::Boost(g) => g.predict(z_eval),
    }
}

fn select_rows(z: &ArrayView2<f64>, rows: &[usize]) -> Array2<f64> {
    let mut out = Array2::<f64>::zeros((rows.len(), z.ncols()));
    for (r, &i) in rows.iter().enumerate() {
        out.row_mut(r).assign(&z.row(i));
    }
    out
}

/// Candidate predictions over an evaluation set: for each exposure level, an
/// m×J1 matrix of propensity estimates (clipped to [ε, 1-ε] then renormalized
/// across levels) and an m×J2 matrix of conditional-mean estimates.
pub struct CandidatePredictions {
    pub levels: usize,
    pub ps: Vec<Array2<f64>>,
    pub cm: Vec<Array2<f64>>,
    pub ps_labels: Vec<&'static str>,
    pub cm_labels: Vec<&'static str>,
    /// Fraction of raw propensity values that hit the clip.
    pub clip_fraction: f64,
}

impl CandidatePredictions {
    pub fn n_units(&self) -> usize {
        self.ps.first().map_or(0, |m| m.nrows())
    }

    pub fn j1(&self) -> usize {
        self.ps_labels.len()
    }

    pub fn j2(&self) -> usize {
        self.cm_labels.len()
    }
}

/// Hyperparameters chosen while assembling one evaluation half.
#[derive(Debug, Clone, Serialize)]
pub struct HalfSelections {
    pub ps: Vec<SelectedHyper>,
    /// `cm[j][level]`
    pub cm: Vec<Vec<SelectedHyper>>,
}

/// Select hyperparameters fresh, or replay a previous selection.
#[derive(Clone, Copy)]
pub enum TuningMode<'a> {
    Select,
    Frozen(&'a HalfSelections),
}

/// Fit every propensity candidate once and every conditional-mean candidate
/// per level on the training rows; evaluate all of them on the evaluation
/// rows. Predictions are aligned with `eval_idx` order.
pub fn assemble_candidates(
    main: &MainDataset,
    config: &StudyConfig,
    train_idx: &[usize],
    eval_idx: &[usize],
    seed: u64,
    tuning: TuningMode<'_>,
) -> Result<(CandidatePredictions, HalfSelections)> {
    let levels = main.levels();
    if train_idx.len() + eval_idx.len() != main.n() {
        return Err(CalibraError::Validation(
            "training and evaluation indices must partition the main data".into(),
        ));
    }
    for idx_set in [train_idx, eval_idx] {
        let mut present = vec![false; levels];
        for &i in idx_set {
            present[main.x[i]] = true;
        }
        if present.iter().any(|p| !p) {
            return Err(CalibraError::Validation(
                "every exposure level must appear in both data halves".into(),
            ));
        }
    }

    let z_train = select_rows(&main.z.view(), train_idx);
    let x_train: Vec<usize> = train_idx.iter().map(|&i| main.x[i]).collect();
    let y_train: Vec<f64> = train_idx.iter().map(|&i| main.y[i]).collect();
    let z_eval = select_rows(&main.z.view(), eval_idx);
    let m = eval_idx.len();

    let j1 = config.ps_candidates.len();
    let j2 = config.cm_candidates.len();
    let mut ps: Vec<Array2<f64>> = (0..levels).map(|_| Array2::zeros((m, j1))).collect();
    let mut cm: Vec<Array2<f64>> = (0..levels).map(|_| Array2::zeros((m, j2))).collect();
    let mut ps_selected = Vec::with_capacity(j1);
    let mut cm_selected = Vec::with_capacity(j2);
    let mut clipped = 0usize;

    for (j, spec) in config.ps_candidates.iter().enumerate() {
        let frozen = match tuning {
            TuningMode::Select => None,
            TuningMode::Frozen(sel) => Some(&sel.ps[j]),
        };
        let model = fit_ps(
            spec,
            &z_train.view(),
            &x_train,
            levels,
            rng::derive_indexed(seed, rng::tag::LEARNER_PS, j as u64),
            frozen,
        )?;
        let mut probs = predict_ps(&model, &z_eval.view());
        clipped += clip_renormalize(&mut probs, config.ps_clip);
        for level in 0..levels {
            for i in 0..m {
                ps[level][[i, j]] = probs[[i, level]];
            }
        }
        ps_selected.push(model.selected);
    }

    for (j, spec) in config.cm_candidates.iter().enumerate() {
        let mut per_level = Vec::with_capacity(levels);
        for level in 0..levels {
            let frozen = match tuning {
                TuningMode::Select => None,
                TuningMode::Frozen(sel) => Some(&sel.cm[j][level]),
            };
            let model = fit_cm(
                spec,
                &z_train.view(),
                &y_train,
                &x_train,
                level,
                rng::derive_indexed(
                    seed,
                    rng::tag::LEARNER_CM,
                    (j * levels + level) as u64,
                ),
                frozen,
            )?;
            let preds = predict_cm(&model, &z_eval.view());
            for i in 0..m {
                cm[level][[i, j]] = preds[i];
            }
            per_level.push(model.selected);
        }
        cm_selected.push(per_level);
    }

    let total_ps_cells = (m * levels * j1).max(1);
    Ok((
        CandidatePredictions {
            levels,
            ps,
            cm,
            ps_labels: config.ps_candidates.iter().map(|s| s.label()).collect(),
            cm_labels: config.cm_candidates.iter().map(|s| s.label()).collect(),
            clip_fraction: clipped as f64 / total_ps_cells as f64,
        },
        HalfSelections {
            ps: ps_selected,
            cm: cm_selected,
        },
    ))
}

/// Clip every probability into [ε, 1-ε], then renormalize each row to sum
/// to one. Returns how many cells the clip touched.
pub fn clip_renormalize(probs: &mut Array2<f64>, eps: f64) -> usize {
    let (m, k) = probs.dim();
    let mut clipped = 0usize;
    for i in 0..m {
        for c in 0..k {
            let v = probs[[i, c]];
            let clamped = v.clamp(eps, 1.0 - eps);
            if clamped != v {
                clipped += 1;
            }
            probs[[i, c]] = clamped;
        }
        let s: f64 = (0..k).map(|c| probs[[i, c]]).sum();
        for c in 0..k {
            probs[[i, c]] /= s;
        }
    }
    clipped
}
