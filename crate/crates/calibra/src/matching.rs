//! Membership-propensity matching between the main and auxiliary samples.
//!
//! When the two samples come from different populations, the shared working
//! moment is biased; matching auxiliary units to main units on covariates
//! observed in both samples restores comparability before integration. The
//! membership model is a logistic regression of the sample indicator on the
//! shared covariates; matching is greedy nearest-neighbour on the logit
//! scale, without replacement, with k passes over the main units in seeded
//! random order.

use ndarray::{Array2, ArrayView2};

use crate::error::{CalibraError, Result};
use crate::learners::ridge::Standardizer;
use crate::linalg;
use crate::rng;

/// Matching outcome: which auxiliary rows to keep, the fitted membership
/// scores (main units first), and covariate balance before/after.
#[derive(Debug, Clone)]
pub struct MatchResult {
    pub kept_aux_indices: Vec<usize>,
    /// Membership probabilities in (0,1), main units first.
    pub membership_scores: Vec<f64>,
    pub ratio: usize,
    pub balance: Vec<CovariateBalance>,
    /// Set when the auxiliary pool was too small for a full 1:k match.
    pub partial: bool,
}

/// Standardized mean difference of one shared covariate before and after
/// matching.
#[derive(Debug, Clone, serde::Serialize)]
pub struct CovariateBalance {
    pub column: usize,
    pub smd_before: f64,
    pub smd_after: f64,
}

const SEPARATION_LOGIT: f64 = 12.0;

/// Logistic regression of the sample indicator (1 = main, 0 = auxiliary) on
/// the shared covariates. Returns per-unit logits for (main, aux).
pub fn fit_membership_scores(
    main_shared: &ArrayView2<f64>,
    aux_shared: &ArrayView2<f64>,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if main_shared.ncols() != aux_shared.ncols() {
        return Err(CalibraError::Validation(format!(
            "shared covariate count mismatch: main {}, aux {}",
            main_shared.ncols(),
            aux_shared.ncols()
        )));
    }
    let n1 = main_shared.nrows();
    let n0 = aux_shared.nrows();
    if n1 == 0 || n0 == 0 {
        return Err(CalibraError::Validation(
            "both samples need rows for membership scoring".into(),
        ));
    }
    let p = main_shared.ncols();
    let mut stacked = Array2::<f64>::zeros((n1 + n0, p));
    for i in 0..n1 {
        stacked.row_mut(i).assign(&main_shared.row(i));
    }
    for i in 0..n0 {
        stacked.row_mut(n1 + i).assign(&aux_shared.row(i));
    }
    let standardizer = Standardizer::fit(&stacked.view());
    let x = standardizer.design(&stacked.view());
    let d = x.ncols();
    let n = n1 + n0;
    let label = |i: usize| if i < n1 { 1.0 } else { 0.0 };

    // Plain Newton IRLS with a vanishing ridge for numerical safety.
    let mut beta = ndarray::Array1::<f64>::zeros(d);
    for _ in 0..50 {
        let mut grad = ndarray::Array1::<f64>::zeros(d);
        let mut hess = Array2::<f64>::zeros((d, d));
        for i in 0..n {
            let eta: f64 = x.row(i).dot(&beta);
            let pr = 1.0 / (1.0 + (-eta.clamp(-35.0, 35.0)).exp());
            let resid = label(i) - pr;
            let w = (pr * (1.0 - pr)).max(1e-10);
            for a in 0..d {
                grad[a] += x[[i, a]] * resid;
                for b in a..d {
                    hess[[a, b]] += w * x[[i, a]] * x[[i, b]];
                }
            }
        }
        for a in 0..d {
            for b in 0..a {
                hess[[a, b]] = hess[[b, a]];
            }
            hess[[a, a]] += 1e-10 * n as f64;
        }
        let gnorm = grad.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if gnorm < 1e-9 * n as f64 {
            break;
        }
        let step = linalg::solve_spd(&hess, &grad, 1e-14).ok_or_else(|| {
            CalibraError::RankDeficiency("membership model design is degenerate".into())
        })?;
        beta = &beta + &step;
        // Complete separation: the fit classifies every unit perfectly and
        // the logits diverge, so the MLE does not exist and distances are
        // meaningless.
        let min_main = (0..n1)
            .map(|i| x.row(i).dot(&beta))
            .fold(f64::INFINITY, f64::min);
        let max_aux = (n1..n)
            .map(|i| x.row(i).dot(&beta))
            .fold(f64::NEG_INFINITY, f64::max);
        if min_main > max_aux && (min_main.abs().max(max_aux.abs()) > SEPARATION_LOGIT) {
            return Err(CalibraError::Separation(
                "membership model separates the samples perfectly; matching distances would be \
                 meaningless (the covariate distributions do not overlap)"
                    .into(),
            ));
        }
    }
    let logits = |rows: std::ops::Range<usize>| -> Vec<f64> {
        rows.map(|i| x.row(i).dot(&beta)).collect()
    };
    Ok((logits(0..n1), logits(n1..n1 + n0)))
}

/// Greedy 1:k nearest-neighbour matching without replacement on logit
/// scores. Each pass visits the main units in seeded random order and gives
/// every main unit its nearest still-unused auxiliary unit.
pub fn nn_match(
    main_scores: &[f64],
    aux_scores: &[f64],
    k: usize,
    seed: u64,
) -> (Vec<usize>, bool) {
    let n = main_scores.len();
    let n_aux = aux_scores.len();
    // Auxiliary units ordered by score; `used` indexes into this ordering.
    let mut order: Vec<usize> = (0..n_aux).collect();
    order.sort_by(|&a, &b| aux_scores[a].total_cmp(&aux_scores[b]).then(a.cmp(&b)));
    let sorted_scores: Vec<f64> = order.iter().map(|&i| aux_scores[i]).collect();
    let mut used = vec![false; n_aux];
    let mut kept = Vec::with_capacity(k * n.min(n_aux));

    let mut visit: Vec<usize> = (0..n).collect();
    let mut rng = rng::rng_from(rng::derive(seed, rng::tag::MATCH));
    let mut exhausted = false;
    for _pass in 0..k {
        rng::shuffle(&mut visit, &mut rng);
        for &i in &visit {
            let target = main_scores[i];
            let start = sorted_scores.partition_point(|s| *s < target);
            // Expand outward from the insertion point to the nearest unused.
            let mut lo = start as isize - 1;
            let mut hi = start;
            let mut best: Option<(f64, usize)> = None;
            loop {
                let lo_dist = if lo >= 0 && !used[lo as usize] {
                    Some((target - sorted_scores[lo as usize]).abs())
                } else {
                    None
                };
                let hi_dist = if hi < n_aux && !used[hi] {
                    Some((sorted_scores[hi] - target).abs())
                } else {
                    None
                };
                match (lo_dist, hi_dist) {
                    (Some(dl), Some(dh)) => {
                        best = Some(if dl <= dh { (dl, lo as usize) } else { (dh, hi) });
                        break;
                    }
                    (Some(dl), None) => {
                        if hi >= n_aux {
                            best = Some((dl, lo as usize));
                            break;
                        }
                        hi += 1;
                    }
                    (None, Some(dh)) => {
                        if lo < 0 {
                            best = Some((dh, hi));
                            break;
                        }
                        lo -= 1;
                    }
                    (None, None) => {
                        if lo < 0 && hi >= n_aux {
                            break;
                        }
                        if lo >= 0 {
                            lo -= 1;
                        }
                        if hi < n_aux {
                            hi += 1;
                        }
                    }
                }
            }
            match best {
                Some((_, slot)) => {
                    used[slot] = true;
                    kept.push(order[slot]);
                }
                None => {
                    exhausted = true;
                }
            }
        }
    }
    kept.sort_unstable();
    (kept, exhausted)
}

fn smd(main: &ArrayView2<f64>, aux: &ArrayView2<f64>, col: usize, aux_rows: Option<&[usize]>) -> f64 {
    let m_mean = main.column(col).sum() / main.nrows() as f64;
    let m_var = main
        .column(col)
        .iter()
        .map(|v| (v - m_mean) * (v - m_mean))
        .sum::<f64>()
        / main.nrows() as f64;
    let (a_mean, a_var, _count) = match aux_rows {
        Some(rows) => {
            let k = rows.len() as f64;
            let mean = rows.iter().map(|&i| aux[[i, col]]).sum::<f64>() / k;
            let var = rows
                .iter()
                .map(|&i| (aux[[i, col]] - mean) * (aux[[i, col]] - mean))
                .sum::<f64>()
                / k;
            (mean, var, k)
        }
        None => {
            let k = aux.nrows() as f64;
            let mean = aux.column(col).sum() / k;
            let var = aux
                .column(col)
                .iter()
                .map(|v| (v - mean) * (v - mean))
                .sum::<f64>()
                / k;
            (mean, var, k)
        }
    };
    let pooled = (0.5 * (m_var + a_var)).sqrt();
    if pooled > 0.0 {
        (m_mean - a_mean) / pooled
    } else {
        0.0
    }
}

/// Fit membership scores, match 1:k, and report balance.
pub fn match_datasets(
    main_shared: &ArrayView2<f64>,
    aux_shared: &ArrayView2<f64>,
    k: usize,
    seed: u64,
) -> Result<MatchResult> {
    if k < 1 {
        return Err(CalibraError::Validation("match ratio must be >= 1".into()));
    }
    let (main_logits, aux_logits) = fit_membership_scores(main_shared, aux_shared)?;
    let (kept, exhausted) = nn_match(&main_logits, &aux_logits, k, seed);
    let partial = exhausted || kept.len() < k * main_shared.nrows();
    let balance = (0..main_shared.ncols())
        .map(|col| CovariateBalance {
            column: col,
            smd_before: smd(main_shared, aux_shared, col, None),
            smd_after: smd(main_shared, aux_shared, col, Some(&kept)),
        })
        .collect();
    let expit = |l: &f64| 1.0 / (1.0 + (-l).exp());
    let membership_scores = main_logits
        .iter()
        .map(expit)
        .chain(aux_logits.iter().map(expit))
        .collect();
    Ok(MatchResult {
        kept_aux_indices: kept,
        membership_scores,
        ratio: k,
        balance,
        partial,
    })
}
