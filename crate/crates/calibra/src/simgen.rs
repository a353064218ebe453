//! Synthetic-study generators and the Monte Carlo evaluation harness.
//!
//! Covariates are equicorrelated standard normals (pairwise correlation 0.5
//! via a shared-factor construction). Three cases vary the mean structures:
//! both nuisances linear, a non-linear propensity with a linear outcome
//! mean, and both non-linear. Only the first five covariate columns carry
//! signal; the rest are noise. Truth values come from a seeded Monte Carlo
//! oracle over fresh covariate draws.

use std::collections::HashMap;

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::data::{AuxDataset, ExposureCoding, MainDataset, StudyConfig};
use crate::error::{CalibraError, Result};
use crate::estimators::{bootstrap_inference, cross_fit_collect, TuningPlan};
use crate::matching::match_datasets;
use crate::rng;
use crate::stats;

/// Mean-structure scenarios for the two nuisance functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum Case {
    /// Linear propensity and outcome mean.
    Case1,
    /// Non-linear propensity, linear outcome mean.
    Case2,
    /// Both non-linear.
    Case3,
}

impl std::str::FromStr for Case {
    type Err = CalibraError;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "1" | "case1" | "Case1" => Ok(Case::Case1),
            "2" | "case2" | "Case2" => Ok(Case::Case2),
            "3" | "case3" | "Case3" => Ok(Case::Case3),
            other => Err(CalibraError::Validation(format!(
                "unknown case '{other}' (expected 1, 2, or 3)"
            ))),
        }
    }
}

/// One simulation design point.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub case: Case,
    pub p: usize,
    pub n: usize,
    pub aux_multiplier: f64,
    /// 2 (canonical) or 3 (softmax extension).
    pub levels: usize,
    /// 0 for a homogeneous auxiliary sample. Nonzero values shift the first
    /// two signal covariates of the auxiliary units before their outcomes
    /// are generated, scaled so the auxiliary outcome mean moves by about
    /// this amount.
    pub heterogeneity_shift: f64,
    pub runs: usize,
    pub seed: u64,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if self.p < 5 {
            return Err(CalibraError::Validation(
                "scenarios need p >= 5 (five signal covariates)".into(),
            ));
        }
        if self.n < 100 {
            return Err(CalibraError::Validation("scenarios need n >= 100".into()));
        }
        if !(self.levels == 2 || self.levels == 3) {
            return Err(CalibraError::Validation(
                "levels must be 2 or 3".into(),
            ));
        }
        if self.aux_multiplier < 0.0 {
            return Err(CalibraError::Validation(
                "aux multiplier must be non-negative".into(),
            ));
        }
        if self.runs == 0 {
            return Err(CalibraError::Validation("runs must be >= 1".into()));
        }
        Ok(())
    }
}

/// Equicorrelated covariates: each entry is √0.5·F + √0.5·ε with F shared
/// per row, giving unit variance and exact pairwise correlation 0.5.
pub fn gen_covariates<R: Rng>(n: usize, p: usize, rng: &mut R) -> Array2<f64> {
    let w = 0.5f64.sqrt();
    let mut z = Array2::<f64>::zeros((n, p));
    for i in 0..n {
        let factor: f64 = rng.sample(StandardNormal);
        for j in 0..p {
            let eps: f64 = rng.sample(StandardNormal);
            z[[i, j]] = w * factor + w * eps;
        }
    }
    z
}

/// Logit-scale argument of the true propensity: the probability of exposure
/// level 1 is `1 / (1 + exp(arg))`.
fn ps_logit_arg(case: Case, z: &[f64]) -> f64 {
    match case {
        Case::Case1 => -0.5 * z[0] + 0.5 * z[1] - 0.5 * z[2] + 0.5 * z[3] - 0.5 * z[4],
        Case::Case2 | Case::Case3 => {
            1.0 - z[0] + 0.5 * z[1] * z[1] - z[2].abs() + 0.5 * z[3] * z[4]
        }
    }
}

/// True probability of exposure level 1 given covariates (binary design).
pub fn true_ps(case: Case, z_row: &[f64]) -> f64 {
    1.0 / (1.0 + ps_logit_arg(case, z_row).exp())
}

fn cm_base(case: Case, z: &[f64]) -> f64 {
    match case {
        Case::Case1 | Case::Case2 => z[0] + z[1] + z[2] + z[3] + z[4],
        // The leading 0.5 scales the entire braced sum.
        Case::Case3 => {
            0.5 * (z[0]
                + 0.5 * z[1] * z[1]
                + z[1] * z[2]
                + z[2]
                + if z[3] > 0.3 { 1.0 } else { 0.0 }
                + z[3] * if z[4] > 0.0 { 1.0 } else { 0.0 })
        }
    }
}

/// True conditional outcome mean at exposure level `x`.
pub fn true_cm(case: Case, x: usize, z_row: &[f64]) -> f64 {
    let xf = x as f64;
    0.5 * xf + cm_base(case, z_row) * (0.5 * xf + 1.0)
}

/// Class probabilities for the three-level softmax extension: level 0 is the
/// baseline, level 1 keeps the binary design's log-odds, level 2 takes half
/// of them.
pub fn true_ps_multi(case: Case, levels: usize, z_row: &[f64]) -> Vec<f64> {
    if levels == 2 {
        let p1 = true_ps(case, z_row);
        return vec![1.0 - p1, p1];
    }
    let t = ps_logit_arg(case, z_row);
    let etas = [0.0, -t, -0.5 * t];
    let max = etas.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = etas.iter().map(|e| (e - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// A generated study: the complete-case main data, the outcome/exposure-only
/// auxiliary data, and (for matching experiments) the first two covariate
/// columns of the auxiliary units, which are otherwise discarded.
#[derive(Debug, Clone)]
pub struct SimStudy {
    pub main: MainDataset,
    pub aux: AuxDataset,
    pub aux_shared: Array2<f64>,
}

fn sample_level<R: Rng>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (lvl, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return lvl;
        }
    }
    probs.len() - 1
}

/// Covariate shift applied to the first two signal covariates of auxiliary
/// units so the auxiliary outcome mean moves by about `delta` under the
/// linear designs: the outcome responds with factor E(0.5X+1)·2 ≈ 2.5.
fn covariate_shift(delta: f64) -> f64 {
    delta / 2.5
}

/// Generate one study. Auxiliary covariates are drawn from the same design
/// (shifted under heterogeneity), used to generate the auxiliary outcome and
/// exposure, and then dropped.
pub fn gen_study<R: Rng>(scenario: &Scenario, rng: &mut R) -> Result<SimStudy> {
    scenario.validate()?;
    let n = scenario.n;
    let n_aux = (scenario.aux_multiplier * n as f64).floor() as usize;
    let levels = scenario.levels;

    let z = gen_covariates(n, scenario.p, rng);
    let mut y = Array1::<f64>::zeros(n);
    let mut x = vec![0usize; n];
    for i in 0..n {
        let row: Vec<f64> = (0..scenario.p.min(5)).map(|j| z[[i, j]]).collect();
        let probs = true_ps_multi(scenario.case, levels, &row);
        x[i] = sample_level(&probs, rng);
        let noise: f64 = rng.sample(StandardNormal);
        y[i] = true_cm(scenario.case, x[i], &row) + noise;
    }

    let shift = covariate_shift(scenario.heterogeneity_shift);
    let mut ay = Array1::<f64>::zeros(n_aux);
    let mut ax = vec![0usize; n_aux];
    let mut aux_shared = Array2::<f64>::zeros((n_aux, 2));
    for i in 0..n_aux {
        let mut row: Vec<f64> = {
            let zr = gen_covariates(1, scenario.p.min(5), rng);
            (0..scenario.p.min(5)).map(|j| zr[[0, j]]).collect()
        };
        row[0] += shift;
        row[1] += shift;
        aux_shared[[i, 0]] = row[0];
        aux_shared[[i, 1]] = row[1];
        let probs = true_ps_multi(scenario.case, levels, &row);
        ax[i] = sample_level(&probs, rng);
        let noise: f64 = rng.sample(StandardNormal);
        ay[i] = true_cm(scenario.case, ax[i], &row) + noise;
    }

    // Rare small-sample patch: the constructors insist every level occurs.
    for level in 0..levels {
        if !x.contains(&level) {
            return Err(CalibraError::Validation(format!(
                "generated main sample lost exposure level {level}; increase n"
            )));
        }
    }

    let main = MainDataset::new(
        y,
        x,
        z,
        (0..scenario.p).map(|j| format!("z{}", j + 1)).collect(),
        ExposureCoding::identity(levels),
    )?;
    let aux = AuxDataset::new(ay, ax)?;
    Ok(SimStudy { main, aux, aux_shared })
}

/// Monte-Carlo truth: the mean of the true conditional mean over fresh
/// covariate draws, with its standard error. Only the five signal covariates
/// are drawn.
pub fn true_tau_oracle<R: Rng>(
    case: Case,
    x: usize,
    draws: usize,
    rng: &mut R,
) -> Result<(f64, f64)> {
    if draws < 1_000_000 {
        return Err(CalibraError::Validation(
            "the truth oracle needs at least 1e6 draws".into(),
        ));
    }
    let mut mean = 0.0f64;
    let mut m2 = 0.0f64;
    let w = 0.5f64.sqrt();
    let mut row = [0.0f64; 5];
    for k in 0..draws {
        let factor: f64 = rng.sample(StandardNormal);
        for slot in row.iter_mut() {
            let eps: f64 = rng.sample(StandardNormal);
            *slot = w * factor + w * eps;
        }
        let value = true_cm(case, x, &row);
        let delta = value - mean;
        mean += delta / (k + 1) as f64;
        m2 += delta * (value - mean);
    }
    let var = m2 / (draws as f64 - 1.0);
    Ok((mean, (var / draws as f64).sqrt()))
}

/// One (method, level) row of the evaluation table.
#[derive(Debug, Clone, serde::Serialize)]
pub struct MonteCarloRow {
    pub method: String,
    pub level: usize,
    pub bias: f64,
    pub mcsd: Option<f64>,
    pub mean_bsd: Option<f64>,
    /// Empirical coverage of the nominal 95% intervals, in percent.
    pub coverage: Option<f64>,
    pub failures: usize,
    pub replicates_used: usize,
}

/// Aggregated Monte Carlo results plus the oracle truth they were scored
/// against.
#[derive(Debug, Clone)]
pub struct MonteCarloTable {
    pub rows: Vec<MonteCarloRow>,
    /// (level, truth, oracle SE)
    pub truth: Vec<(usize, f64, f64)>,
    pub runs: usize,
    pub matched: bool,
}

impl MonteCarloTable {
    pub fn row(&self, method: &str, level: usize) -> Option<&MonteCarloRow> {
        self.rows
            .iter()
            .find(|r| r.method == method && r.level == level)
    }
}

/// Harness knobs beyond the study configuration itself.
#[derive(Debug, Clone, Copy)]
pub struct McOptions {
    /// Run the bootstrap on every replicate (using the study config's
    /// replicate count) and aggregate BSD and coverage.
    pub bootstrap: bool,
    pub oracle_draws: usize,
}

impl Default for McOptions {
    fn default() -> Self {
        McOptions {
            bootstrap: false,
            oracle_draws: 2_000_000,
        }
    }
}

type ReplicateRows = Vec<(String, usize, f64, Option<f64>, Option<(f64, f64)>)>;

/// Run the full Monte Carlo study: generate, (optionally) match, estimate,
/// (optionally) bootstrap, and aggregate bias / MCSD / BSD / coverage per
/// method and level. Replicates run in parallel on derived RNG streams and
/// are aggregated in replicate order.
pub fn run_monte_carlo(
    scenario: &Scenario,
    config: &StudyConfig,
    opts: &McOptions,
) -> Result<MonteCarloTable> {
    scenario.validate()?;
    config.validate()?;

    let mut truth = Vec::new();
    for level in 0..scenario.levels {
        let mut oracle_rng = rng::rng_from(rng::derive_indexed(
            scenario.seed,
            rng::tag::ORACLE,
            level as u64,
        ));
        let (tau, se) = true_tau_oracle(scenario.case, level, opts.oracle_draws, &mut oracle_rng)?;
        truth.push((level, tau, se));
    }

    let use_matching = config.match_ratio.is_some();
    let replicates: Vec<Result<ReplicateRows>> = (0..scenario.runs)
        .into_par_iter()
        .map(|r| {
            let rep_seed = rng::derive_indexed(scenario.seed, rng::tag::REPLICATE, r as u64);
            let mut gen_rng = rng::rng_from(rng::derive(rep_seed, rng::tag::GENERATE));
            let study = gen_study(scenario, &mut gen_rng)?;
            let (main, aux) = (&study.main, &study.aux);

            let aux = if let Some(k) = config.match_ratio {
                let main_shared = main.z.slice(ndarray::s![.., 0..2]).to_owned();
                let matched = match_datasets(
                    &main_shared.view(),
                    &study.aux_shared.view(),
                    k,
                    rep_seed,
                )?;
                let kept = &matched.kept_aux_indices;
                AuxDataset::new(
                    Array1::from_iter(kept.iter().map(|&i| aux.y[i])),
                    kept.iter().map(|&i| aux.x[i]).collect(),
                )?
            } else {
                aux.clone()
            };

            let mut cfg = config.clone();
            cfg.seed = rep_seed;
            let out = cross_fit_collect(main, &aux, &cfg, TuningPlan::Select)?;
            let estimates = if opts.bootstrap && cfg.bootstrap_reps >= 2 {
                let (augmented, _) = bootstrap_inference(main, &aux, &cfg, &out)?;
                augmented
            } else {
                out.estimates
            };
            Ok(estimates
                .into_iter()
                .map(|e| {
                    let ci = match (e.ci_low, e.ci_high) {
                        (Some(lo), Some(hi)) => Some((lo, hi)),
                        _ => None,
                    };
                    (e.method.label(), e.level, e.tau_hat, e.bsd, ci)
                })
                .collect())
        })
        .collect();

    // Aggregate in replicate order.
    let mut taus: HashMap<(String, usize), Vec<f64>> = HashMap::new();
    let mut bsds: HashMap<(String, usize), Vec<f64>> = HashMap::new();
    let mut covered: HashMap<(String, usize), (usize, usize)> = HashMap::new();
    let mut order: Vec<(String, usize)> = Vec::new();
    for rep in &replicates {
        match rep {
            Ok(rows) => {
                for (method, level, tau, bsd, ci) in rows {
                    let key = (method.clone(), *level);
                    if !order.contains(&key) {
                        order.push(key.clone());
                    }
                    taus.entry(key.clone()).or_default().push(*tau);
                    if let Some(b) = bsd {
                        bsds.entry(key.clone()).or_default().push(*b);
                    }
                    if let Some((lo, hi)) = ci {
                        let truth_val = truth[*level].1;
                        let hit = (covered.entry(key).or_default()).clone();
                        let contains = *lo <= truth_val && truth_val <= *hi;
                        covered.insert(
                            (method.clone(), *level),
                            (hit.0 + contains as usize, hit.1 + 1),
                        );
                    }
                }
            }
            Err(_) => {}
        }
    }
    order.sort_by(|a, b| a.1.cmp(&b.1).then(a.0.cmp(&b.0)));

    let mut rows = Vec::new();
    for (method, level) in order {
        let values = &taus[&(method.clone(), level)];
        let used = values.len();
        let bias = stats::mean(values) - truth[level].1;
        let mcsd = stats::sample_sd(values);
        let mean_bsd = bsds
            .get(&(method.clone(), level))
            .map(|b| stats::mean(b));
        let coverage = covered
            .get(&(method.clone(), level))
            .map(|(hits, total)| 100.0 * *hits as f64 / *total as f64);
        rows.push(MonteCarloRow {
            method: method.clone(),
            level,
            bias,
            mcsd,
            mean_bsd,
            coverage,
            failures: scenario.runs - used,
            replicates_used: used,
        });
    }
    Ok(MonteCarloTable {
        rows,
        truth,
        runs: scenario.runs,
        matched: use_matching,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scenario(case: Case, n: usize, runs: usize) -> Scenario {
        Scenario {
            case,
            p: 10,
            n,
            aux_multiplier: 2.0,
            levels: 2,
            heterogeneity_shift: 0.0,
            runs,
            seed: 7,
        }
    }

    #[test]
    fn covariates_have_unit_variance_and_half_correlation() {
        let n = 100_000;
        let mut rng = crate::rng::rng_from(3);
        let z = gen_covariates(n, 3, &mut rng);
        for j in 0..3 {
            let col = z.column(j);
            let mean = col.sum() / n as f64;
            let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
            assert!(mean.abs() < 4.0 / (n as f64).sqrt() * 2.0, "mean {mean}");
            assert!((var - 1.0).abs() < 0.02, "var {var}");
        }
        let (c0, c1) = (z.column(0), z.column(1));
        let m0 = c0.sum() / n as f64;
        let m1 = c1.sum() / n as f64;
        let mut cov = 0.0;
        for i in 0..n {
            cov += (c0[i] - m0) * (c1[i] - m1);
        }
        cov /= n as f64;
        assert!((cov - 0.5).abs() < 0.02, "corr {cov}");
    }

    #[test]
    fn single_column_is_standard_normal() {
        let n = 100_000;
        let mut rng = crate::rng::rng_from(5);
        let z = gen_covariates(n, 1, &mut rng);
        let mean = z.column(0).sum() / n as f64;
        let var = z.column(0).iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.02);
        assert!((var - 1.0).abs() < 0.02);
    }

    #[test]
    fn true_nuisances_at_origin() {
        let z = [0.0; 5];
        assert!((true_ps(Case::Case1, &z) - 0.5).abs() < 1e-15);
        // 1/(1+e) at the origin for the non-linear propensity.
        let p2 = true_ps(Case::Case2, &z);
        assert!((p2 - 0.268941421369995).abs() < 1e-12, "{p2}");
        assert!((true_cm(Case::Case1, 1, &z) - 0.5).abs() < 1e-15);
        assert!((true_cm(Case::Case1, 0, &z) - 0.0).abs() < 1e-15);
    }

    #[test]
    fn study_sizes_follow_scenario() {
        let sc = scenario(Case::Case1, 1000, 1);
        let mut rng = crate::rng::rng_from(11);
        let study = gen_study(&sc, &mut rng).unwrap();
        assert_eq!(study.main.n(), 1000);
        assert_eq!(study.aux.len(), 2000);
        assert_eq!(study.main.p(), 10);
        assert_eq!(study.aux_shared.nrows(), 2000);
    }

    #[test]
    fn exposure_frequency_matches_propensity() {
        let sc = scenario(Case::Case1, 20_000, 1);
        let mut rng = crate::rng::rng_from(13);
        let study = gen_study(&sc, &mut rng).unwrap();
        let mut pbar = 0.0;
        for i in 0..study.main.n() {
            let row: Vec<f64> = (0..5).map(|j| study.main.z[[i, j]]).collect();
            pbar += true_ps(Case::Case1, &row);
        }
        pbar /= study.main.n() as f64;
        let observed = study.main.x.iter().filter(|&&x| x == 1).count() as f64
            / study.main.n() as f64;
        let se = (pbar * (1.0 - pbar) / study.main.n() as f64).sqrt();
        assert!(
            (observed - pbar).abs() < 3.0 * se,
            "observed {observed} vs mean propensity {pbar}"
        );
    }

    #[test]
    fn homogeneous_aux_matches_main_outcome_mean() {
        // δ = 0: pooled auxiliary mean close to the main mean across
        // replicates (two-sample z-statistic within 3).
        let sc = scenario(Case::Case1, 2000, 1);
        let mut diff_sum = 0.0;
        let mut reps = 0.0;
        for s in 0..20 {
            let mut rng = crate::rng::rng_from(100 + s);
            let study = gen_study(&sc, &mut rng).unwrap();
            let m = study.main.y.sum() / study.main.n() as f64;
            let a = study.aux.y.sum() / study.aux.len() as f64;
            diff_sum += m - a;
            reps += 1.0;
        }
        let mean_diff = diff_sum / reps;
        assert!(mean_diff.abs() < 0.1, "mean main-aux gap {mean_diff}");
    }

    #[test]
    fn heterogeneity_shift_moves_aux_mean_by_delta() {
        let mut sc = scenario(Case::Case1, 4000, 1);
        sc.heterogeneity_shift = 1.0;
        let mut gap = 0.0;
        for s in 0..10 {
            let mut rng = crate::rng::rng_from(200 + s);
            let study = gen_study(&sc, &mut rng).unwrap();
            let m = study.main.y.sum() / study.main.n() as f64;
            let a = study.aux.y.sum() / study.aux.len() as f64;
            gap += a - m;
        }
        gap /= 10.0;
        assert!((gap - 1.0).abs() < 0.15, "aux-main outcome gap {gap} (wanted ~1)");
    }

    #[test]
    fn oracle_agrees_with_analytic_truth_for_linear_cases() {
        let mut rng = crate::rng::rng_from(17);
        let (tau1, se1) = true_tau_oracle(Case::Case1, 1, 1_000_000, &mut rng).unwrap();
        assert!((tau1 - 0.5).abs() < 3.0 * se1, "tau {tau1} se {se1}");
        let (tau0, se0) = true_tau_oracle(Case::Case1, 0, 1_000_000, &mut rng).unwrap();
        assert!(tau0.abs() < 3.0 * se0);
        assert!(true_tau_oracle(Case::Case1, 0, 1000, &mut rng).is_err());
    }

    #[test]
    fn oracle_case3_matches_frozen_fixture() {
        // Brute-force fixture from two independent 1e7-draw runs:
        // τ(1) ≈ 1.68617, τ(0) ≈ 0.79078 (moment algebra gives
        // 0.5 + 1.5·b and b with b = 0.5[0.5 + 0.5 + P(Z>0.3) + ρ·φ(0)]).
        let mut rng = crate::rng::rng_from(23);
        let (tau1, se1) = true_tau_oracle(Case::Case3, 1, 2_000_000, &mut rng).unwrap();
        assert!((tau1 - 1.686_17).abs() < 4.0 * se1 + 1e-3, "tau1 {tau1} se {se1}");
        let (tau0, se0) = true_tau_oracle(Case::Case3, 0, 2_000_000, &mut rng).unwrap();
        assert!((tau0 - 0.790_78).abs() < 4.0 * se0 + 1e-3, "tau0 {tau0} se {se0}");
    }

    #[test]
    fn oracle_is_stable_across_independent_runs() {
        let mut rng_a = crate::rng::rng_from(31);
        let mut rng_b = crate::rng::rng_from(37);
        let (a, se_a) = true_tau_oracle(Case::Case3, 1, 1_000_000, &mut rng_a).unwrap();
        let (b, se_b) = true_tau_oracle(Case::Case3, 1, 1_000_000, &mut rng_b).unwrap();
        let combined = (se_a * se_a + se_b * se_b).sqrt();
        assert!((a - b).abs() < 4.0 * combined);
    }

    #[test]
    fn three_level_probabilities_are_proper() {
        let mut rng = crate::rng::rng_from(41);
        let z = gen_covariates(200, 5, &mut rng);
        for i in 0..200 {
            let row: Vec<f64> = (0..5).map(|j| z[[i, j]]).collect();
            let probs = true_ps_multi(Case::Case2, 3, &row);
            assert_eq!(probs.len(), 3);
            let s: f64 = probs.iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
            assert!(probs.iter().all(|p| *p > 0.0));
        }
    }
}
