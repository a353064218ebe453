//! Nonparametric bootstrap for standard errors: main and auxiliary rows are
//! resampled independently (sizes preserved), the whole cross-fitted
//! procedure is re-run on each replicate with every tuning parameter frozen
//! at the original fit's selection, and the replicate spread becomes the
//! standard deviation behind normal-approximation intervals.

use std::collections::HashMap;

use ndarray::Array1;
use rand::Rng;
use rayon::prelude::*;

use crate::data::{AuxDataset, MainDataset, StudyConfig};
use crate::error::{CalibraError, Result};
use crate::rng;
use crate::stats;

use super::crossfit::{cross_fit_collect, CrossFitOutput, TuningPlan};
use super::{LevelEstimate, Method};

/// Replicate accounting per run.
#[derive(Debug, Clone)]
pub struct BootstrapDiag {
    pub replicates: usize,
    /// Replicates on which a given method/level could not be computed.
    pub failed: HashMap<(String, usize), usize>,
    /// True when more than 10% of replicates failed for some method; the
    /// resulting intervals should not be trusted.
    pub unreliable: bool,
}

fn resample_main<R: Rng>(main: &MainDataset, rng: &mut R) -> Result<MainDataset> {
    let n = main.n();
    let mut y = Array1::<f64>::zeros(n);
    let mut x = vec![0usize; n];
    let mut z = ndarray::Array2::<f64>::zeros((n, main.p()));
    for slot in 0..n {
        let i = rng.random_range(0..n);
        y[slot] = main.y[i];
        x[slot] = main.x[i];
        z.row_mut(slot).assign(&main.z.row(i));
    }
    MainDataset::new(y, x, z, main.column_names.clone(), main.coding.clone())
}

fn resample_aux<R: Rng>(aux: &AuxDataset, rng: &mut R) -> Result<AuxDataset> {
    let n = aux.len();
    if n == 0 {
        return Ok(AuxDataset::empty());
    }
    let mut y = Array1::<f64>::zeros(n);
    let mut x = vec![0usize; n];
    for slot in 0..n {
        let i = rng.random_range(0..n);
        y[slot] = aux.y[i];
        x[slot] = aux.x[i];
    }
    AuxDataset::new(y, x)
}

/// Attach bootstrap standard deviations, normal-approximation intervals, and
/// p-values to the base run's point estimates.
pub fn bootstrap_inference(
    main: &MainDataset,
    aux: &AuxDataset,
    config: &StudyConfig,
    base: &CrossFitOutput,
) -> Result<(Vec<LevelEstimate>, BootstrapDiag)> {
    let b = config.bootstrap_reps;
    if b < 2 {
        return Err(CalibraError::Validation(format!(
            "bootstrap needs at least 2 replicates; got {b}"
        )));
    }

    // One independent stream per replicate; collected in replicate order so
    // the aggregation is schedule-independent.
    let replicate_estimates: Vec<Option<Vec<(Method, usize, f64)>>> = (0..b)
        .into_par_iter()
        .map(|rep| {
            let seed = rng::derive_indexed(config.seed, rng::tag::BOOTSTRAP, rep as u64);
            let mut rng = rng::rng_from(seed);
            let main_b = match resample_main(main, &mut rng) {
                Ok(m) => m,
                Err(_) => return None, // a level vanished in the resample
            };
            let aux_b = match resample_aux(aux, &mut rng) {
                Ok(a) => a,
                Err(_) => return None,
            };
            let mut cfg_b = config.clone();
            cfg_b.seed = seed;
            match cross_fit_collect(&main_b, &aux_b, &cfg_b, TuningPlan::Frozen(&base.selections))
            {
                Ok(out) => Some(
                    out.estimates
                        .into_iter()
                        .map(|e| (e.method, e.level, e.tau_hat))
                        .collect(),
                ),
                Err(_) => None,
            }
        })
        .collect();

    let mut values: HashMap<(String, usize), Vec<f64>> = HashMap::new();
    for rows in replicate_estimates.iter().flatten() {
        for (method, level, tau) in rows {
            values
                .entry((method.label(), *level))
                .or_default()
                .push(*tau);
        }
    }

    let mut failed: HashMap<(String, usize), usize> = HashMap::new();
    let mut unreliable = false;
    let mut augmented = Vec::with_capacity(base.estimates.len());
    for est in &base.estimates {
        let key = (est.method.label(), est.level);
        let reps = values.get(&key).cloned().unwrap_or_default();
        let n_failed = b - reps.len();
        if n_failed > 0 {
            failed.insert(key.clone(), n_failed);
        }
        if n_failed * 10 > b {
            unreliable = true;
        }
        if reps.len() < 2 {
            return Err(CalibraError::NotConverged(format!(
                "all bootstrap replicates failed for {} at level {}",
                est.method.label(),
                est.level
            )));
        }
        let bsd = stats::sample_sd(&reps).unwrap_or(0.0);
        augmented.push(est.clone().with_bootstrap_sd(bsd));
    }
    Ok((
        augmented,
        BootstrapDiag {
            replicates: b,
            failed,
            unreliable,
        },
    ))
}
