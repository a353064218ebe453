//! Two-fold cross-fitting: integration scores are computed once on the full
//! pooled sample, the main data is split into level-stratified halves, each
//! half's candidates are trained on the other half, every estimator is
//! evaluated on each half, and the two half-estimates are averaged.

use serde::Serialize;

use crate::data::{AuxDataset, MainDataset, StudyConfig};
use crate::error::{CalibraError, Result};
use crate::learners::{assemble_candidates, HalfSelections, TuningMode};
use crate::rng;

use super::integration::{cmlib_tau, integration_scores, integration_theta};
use super::{aiptw_tau, cml_tau, group_rows, ElDiag, ElSettings, LevelEstimate, Method};

/// An estimator that could not be computed, with enough context to tell
/// which level and which half broke.
#[derive(Debug, Clone, Serialize)]
pub struct MethodFailure {
    pub method: Method,
    pub level: usize,
    /// 0-based evaluation-half index.
    pub half: usize,
    pub message: String,
}

/// Everything a cross-fitted run produces: final estimates, per-method
/// failures, the tuning selections (replayed by the bootstrap), and
/// diagnostics.
#[derive(Debug)]
pub struct CrossFitOutput {
    pub estimates: Vec<LevelEstimate>,
    pub failures: Vec<MethodFailure>,
    pub selections: Vec<HalfSelections>,
    pub theta_hat: Vec<f64>,
    pub integration_iterations: usize,
    pub integration_violation: f64,
    /// 1 - n/N.
    pub rho_hat: f64,
    pub n: usize,
    pub n_total: usize,
    /// Fraction of propensity cells that hit the clip, maximized over halves.
    pub clip_fraction: f64,
}

/// Reuse or re-derive tuning selections.
#[derive(Clone, Copy)]
pub enum TuningPlan<'a> {
    Select,
    Frozen(&'a [HalfSelections]),
}

/// Split the main indices into two halves at random, stratified by exposure
/// level so no level can vanish from either half. Both halves come back
/// sorted.
pub fn stratified_split(x: &[usize], levels: usize, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = rng::rng_from(rng::derive(seed, rng::tag::SPLIT));
    let mut half_a = Vec::with_capacity(x.len() / 2 + levels);
    let mut half_b = Vec::with_capacity(x.len() / 2 + levels);
    for level in 0..levels {
        let mut members: Vec<usize> = (0..x.len()).filter(|&i| x[i] == level).collect();
        rng::shuffle(&mut members, &mut rng);
        let cut = members.len().div_ceil(2);
        half_a.extend_from_slice(&members[..cut]);
        half_b.extend_from_slice(&members[cut..]);
    }
    half_a.sort_unstable();
    half_b.sort_unstable();
    (half_a, half_b)
}

struct HalfOutcome {
    tau: f64,
    n_eff: f64,
    el: ElDiag,
}

/// Per-candidate AIPTW pairings: each propensity candidate is matched with
/// the first conditional-mean candidate of the same label.
fn aiptw_pairs(config: &StudyConfig) -> Vec<(usize, usize, String)> {
    let mut pairs = Vec::new();
    for (j1, ps_spec) in config.ps_candidates.iter().enumerate() {
        if let Some(j2) = config
            .cm_candidates
            .iter()
            .position(|cm_spec| cm_spec.label() == ps_spec.label())
        {
            pairs.push((j1, j2, ps_spec.label().to_string()));
        }
    }
    pairs
}

/// Run the full procedure, collecting per-method failures instead of failing
/// wholesale. Data-level problems (bad split, unusable candidates,
/// incompatible auxiliary moments) still surface as errors.
pub fn cross_fit_collect(
    main: &MainDataset,
    aux: &AuxDataset,
    config: &StudyConfig,
    tuning: TuningPlan<'_>,
) -> Result<CrossFitOutput> {
    let levels = main.levels();
    let n = main.n();
    let n_total = n + aux.len();
    let el = ElSettings {
        tol: config.el_tolerance,
        max_iter: config.el_max_iter,
    };

    // Integration scores over the pooled sample; splitting is not needed for
    // them, only for the calibration weights.
    let theta = integration_theta(main, aux, config.working_function)?;
    let integration = integration_scores(main, aux, &theta, config.working_function, &el)?;
    let main_scores = integration.main_scores(n);

    let (half_a, half_b) = stratified_split(&main.x, levels, config.seed);
    let halves = [(half_a.clone(), half_b.clone()), (half_b, half_a)];

    let pairs = aiptw_pairs(config);
    // (method, level) -> per-half outcomes
    let mut half_results: Vec<Vec<Vec<Option<HalfOutcome>>>> = Vec::new();
    let method_list: Vec<Method> = {
        let mut ms = vec![Method::Raw];
        for (_, _, label) in &pairs {
            ms.push(Method::Aiptw(label.clone()));
        }
        ms.push(Method::Cml);
        ms.push(Method::Cmlib);
        ms
    };
    for _ in &method_list {
        let mut per_level = Vec::with_capacity(levels);
        for _ in 0..levels {
            per_level.push(vec![None, None]);
        }
        half_results.push(per_level);
    }
    let mut failures: Vec<MethodFailure> = Vec::new();
    let mut selections: Vec<HalfSelections> = Vec::new();
    let mut clip_fraction = 0.0f64;

    for (half_idx, (eval_idx, train_idx)) in halves.iter().enumerate() {
        let half_tuning = match tuning {
            TuningPlan::Select => TuningMode::Select,
            TuningPlan::Frozen(sel) => TuningMode::Frozen(&sel[half_idx]),
        };
        let (preds, selected) = assemble_candidates(
            main,
            config,
            train_idx,
            eval_idx,
            rng::derive_indexed(config.seed, rng::tag::LEARNER_PS, half_idx as u64),
            half_tuning,
        )?;
        selections.push(selected);
        clip_fraction = clip_fraction.max(preds.clip_fraction);

        let y_eval: Vec<f64> = eval_idx.iter().map(|&i| main.y[i]).collect();
        let x_eval: Vec<usize> = eval_idx.iter().map(|&i| main.x[i]).collect();
        let scores_eval: Vec<f64> = eval_idx.iter().map(|&i| main_scores[i]).collect();

        for level in 0..levels {
            let mut slot = 0usize;
            // Raw: subgroup mean within the evaluation half.
            let group = group_rows(&x_eval, level);
            if group.is_empty() {
                failures.push(MethodFailure {
                    method: Method::Raw,
                    level,
                    half: half_idx,
                    message: "empty evaluation group".into(),
                });
            } else {
                let mean = group.iter().map(|&i| y_eval[i]).sum::<f64>() / group.len() as f64;
                half_results[slot][level][half_idx] = Some(HalfOutcome {
                    tau: mean,
                    n_eff: group.len() as f64,
                    el: ElDiag::default(),
                });
            }
            slot += 1;

            for (j1, j2, label) in &pairs {
                let ps_col: Vec<f64> = (0..preds.n_units())
                    .map(|i| preds.ps[level][[i, *j1]])
                    .collect();
                let cm_col: Vec<f64> = (0..preds.n_units())
                    .map(|i| preds.cm[level][[i, *j2]])
                    .collect();
                match aiptw_tau(&y_eval, &x_eval, &ps_col, &cm_col, level) {
                    Ok(tau) => {
                        let norm: f64 = group
                            .iter()
                            .map(|&i| 1.0 / ps_col[i])
                            .sum();
                        let n_eff = if norm > 0.0 {
                            let ss: f64 = group
                                .iter()
                                .map(|&i| (1.0 / ps_col[i] / norm).powi(2))
                                .sum();
                            1.0 / ss
                        } else {
                            0.0
                        };
                        half_results[slot][level][half_idx] = Some(HalfOutcome {
                            tau,
                            n_eff,
                            el: ElDiag::default(),
                        });
                    }
                    Err(e) => failures.push(MethodFailure {
                        method: Method::Aiptw(label.clone()),
                        level,
                        half: half_idx,
                        message: e.to_string(),
                    }),
                }
                slot += 1;
            }

            match cml_tau(&y_eval, &x_eval, &preds, level, &el) {
                Ok((tau, n_eff, diag)) => {
                    half_results[slot][level][half_idx] =
                        Some(HalfOutcome { tau, n_eff, el: diag });
                }
                Err(e) => failures.push(MethodFailure {
                    method: Method::Cml,
                    level,
                    half: half_idx,
                    message: e.to_string(),
                }),
            }
            slot += 1;

            match cmlib_tau(&y_eval, &x_eval, &preds, &scores_eval, level, &el) {
                Ok((tau, n_eff, diag)) => {
                    half_results[slot][level][half_idx] =
                        Some(HalfOutcome { tau, n_eff, el: diag });
                }
                Err(e) => failures.push(MethodFailure {
                    method: Method::Cmlib,
                    level,
                    half: half_idx,
                    message: e.to_string(),
                }),
            }
        }
        let _ = preds; // dropped here; each half owns its own predictions
    }

    // Average the half-estimates; a method missing either half is a failure.
    let mut estimates = Vec::new();
    for level in 0..levels {
        for (slot, method) in method_list.iter().enumerate() {
            let pair = &half_results[slot][level];
            if let (Some(a), Some(b)) = (&pair[0], &pair[1]) {
                estimates.push(LevelEstimate::point(
                    level,
                    method.clone(),
                    0.5 * (a.tau + b.tau),
                    a.n_eff + b.n_eff,
                    ElDiag {
                        iterations: a.el.iterations.max(b.el.iterations),
                        violation: a.el.violation.max(b.el.violation),
                        kept_columns: a.el.kept_columns.max(b.el.kept_columns),
                        certificate: a.el.certificate.max(b.el.certificate),
                    },
                ));
            }
        }
    }

    Ok(CrossFitOutput {
        estimates,
        failures,
        selections,
        theta_hat: theta,
        integration_iterations: integration.iterations,
        integration_violation: integration.violation,
        rho_hat: 1.0 - n as f64 / n_total as f64,
        n,
        n_total,
        clip_fraction,
    })
}

/// Strict variant: any per-method failure aborts the whole estimate with
/// half- and level-level context in the message.
pub fn cross_fit_estimate(
    main: &MainDataset,
    aux: &AuxDataset,
    config: &StudyConfig,
) -> Result<CrossFitOutput> {
    let out = cross_fit_collect(main, aux, config, TuningPlan::Select)?;
    if let Some(first) = out.failures.first() {
        return Err(CalibraError::ConvexHullViolation(format!(
            "{} failed at exposure level {} (evaluation half {}): {}",
            first.method.label(),
            first.level,
            first.half + 1,
            first.message
        )));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::ExposureCoding;
    use crate::learners::LearnerSpec;
    use ndarray::{Array1, Array2};
    use rand::Rng;

    fn synthetic_study(n: usize, seed: u64, aux_len: usize) -> (MainDataset, AuxDataset) {
        let mut rng = crate::rng::rng_from(seed);
        let p = 3;
        let mut z = Array2::<f64>::zeros((n, p));
        let mut y = Array1::<f64>::zeros(n);
        let mut x = vec![0usize; n];
        for i in 0..n {
            for j in 0..p {
                z[[i, j]] = rng.random_range(-1.5..1.5);
            }
            let logit: f64 = 0.7 * z[[i, 0]] - 0.4 * z[[i, 1]];
            let pi = 1.0 / (1.0 + (-logit).exp());
            x[i] = (rng.random::<f64>() < pi) as usize;
            y[i] = 0.5 * x[i] as f64
                + z[[i, 0]]
                + 0.5 * z[[i, 2]]
                + 0.3 * rng.random_range(-1.0..1.0);
        }
        x[0] = 0;
        x[1] = 1;
        let main = MainDataset::new(
            y,
            x,
            z,
            vec!["z1".into(), "z2".into(), "z3".into()],
            ExposureCoding::identity(2),
        )
        .unwrap();
        let mut ay = Array1::<f64>::zeros(aux_len);
        let mut ax = vec![0usize; aux_len];
        for i in 0..aux_len {
            ax[i] = (rng.random::<f64>() < 0.5) as usize;
            ay[i] = 0.5 * ax[i] as f64 + 0.3 * rng.random_range(-1.0..1.0);
        }
        (main, AuxDataset::new(ay, ax).unwrap())
    }

    fn fast_config(seed: u64) -> StudyConfig {
        let mut cfg = StudyConfig::default_for_levels(2);
        cfg.seed = seed;
        cfg.ps_candidates = vec![
            LearnerSpec::ridge_multinomial_default(),
            LearnerSpec::RandomForest { n_trees: 25, mtry: None, min_leaf: 5 },
        ];
        cfg.cm_candidates = vec![
            LearnerSpec::ridge_regression_default(),
            LearnerSpec::RandomForest { n_trees: 25, mtry: None, min_leaf: 5 },
        ];
        cfg
    }

    #[test]
    fn split_is_stratified_and_deterministic() {
        let x: Vec<usize> = (0..101).map(|i| (i % 3 == 0) as usize).collect();
        let (a1, b1) = stratified_split(&x, 2, 42);
        let (a2, b2) = stratified_split(&x, 2, 42);
        assert_eq!(a1, a2);
        assert_eq!(b1, b2);
        assert_eq!(a1.len() + b1.len(), 101);
        for half in [&a1, &b1] {
            let ones = half.iter().filter(|&&i| x[i] == 1).count();
            let zeros = half.len() - ones;
            assert!(ones > 0 && zeros > 0);
        }
        let mut merged: Vec<usize> = a1.iter().chain(b1.iter()).cloned().collect();
        merged.sort_unstable();
        assert_eq!(merged, (0..101).collect::<Vec<_>>());
        let (a3, _) = stratified_split(&x, 2, 43);
        assert_ne!(a1, a3);
    }

    #[test]
    fn output_has_one_row_per_method_and_level() {
        let (main, aux) = synthetic_study(120, 7, 60);
        let cfg = fast_config(7);
        let out = cross_fit_estimate(&main, &aux, &cfg).unwrap();
        // Raw, AIPTW.ridge, AIPTW.forest, CML, CMLIB at 2 levels.
        assert_eq!(out.estimates.len(), 10);
        let methods: Vec<String> = out
            .estimates
            .iter()
            .filter(|e| e.level == 1)
            .map(|e| e.method.label())
            .collect();
        assert_eq!(
            methods,
            vec!["Raw", "AIPTW.ridge", "AIPTW.forest", "CML", "CMLIB"]
        );
        assert!((out.rho_hat - (1.0 - 120.0 / 180.0)).abs() < 1e-12);
    }

    #[test]
    fn same_seed_same_results() {
        let (main, aux) = synthetic_study(100, 9, 50);
        let cfg = fast_config(31);
        let a = cross_fit_estimate(&main, &aux, &cfg).unwrap();
        let b = cross_fit_estimate(&main, &aux, &cfg).unwrap();
        for (ea, eb) in a.estimates.iter().zip(b.estimates.iter()) {
            assert_eq!(ea.tau_hat.to_bits(), eb.tau_hat.to_bits());
        }
    }

    #[test]
    fn aux_empty_makes_cmlib_equal_cml_bitwise() {
        let (main, _) = synthetic_study(100, 11, 0);
        let cfg = fast_config(13);
        let out = cross_fit_estimate(&main, &AuxDataset::empty(), &cfg).unwrap();
        for level in 0..2 {
            let cml = out
                .estimates
                .iter()
                .find(|e| e.level == level && e.method == Method::Cml)
                .unwrap();
            let cmlib = out
                .estimates
                .iter()
                .find(|e| e.level == level && e.method == Method::Cmlib)
                .unwrap();
            assert_eq!(
                cml.tau_hat.to_bits(),
                cmlib.tau_hat.to_bits(),
                "level {level}: CML {} vs CMLIB {}",
                cml.tau_hat,
                cmlib.tau_hat
            );
        }
    }

    #[test]
    fn estimates_are_thread_count_invariant() {
        let (main, aux) = synthetic_study(90, 17, 45);
        let cfg = fast_config(5);
        let run = |threads: usize| -> Vec<u64> {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            pool.install(|| {
                cross_fit_estimate(&main, &aux, &cfg)
                    .unwrap()
                    .estimates
                    .iter()
                    .map(|e| e.tau_hat.to_bits())
                    .collect()
            })
        };
        assert_eq!(run(1), run(4));
    }
}
