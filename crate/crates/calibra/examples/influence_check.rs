//! The influence-function oracle: with the true nuisances plugged in, the
//! calibrated estimator's sampling spread should match the influence
//! variance. A quick pass over a handful of replicates shows the two scales
//! agreeing.
//!
//! ```bash
//! cargo run --release --example influence_check
//! ```

use calibra::estimators::{cml_tau, influence_variance, ElSettings};
use calibra::learners::CandidatePredictions;
use calibra::simgen::{gen_study, true_cm, true_ps, Case, Scenario};
use ndarray::Array2;

fn main() {
    let scenario = Scenario {
        case: Case::Case1,
        p: 10,
        n: 1500,
        aux_multiplier: 0.0,
        levels: 2,
        heterogeneity_shift: 0.0,
        runs: 1,
        seed: 3,
    };
    let el = ElSettings { tol: 1e-10, max_iter: 200 };
    let reps = 40;
    let mut taus = Vec::with_capacity(reps);
    let mut sigma2_hat = 0.0;

    for rep in 0..reps {
        let mut rng = calibra::rng::rng_from(500 + rep as u64);
        let study = gen_study(&scenario, &mut rng).unwrap();
        let n = study.main.n();

        // Single oracle candidate: the true propensity and conditional mean.
        let mut ps1 = Array2::<f64>::zeros((n, 1));
        let mut cm0 = Array2::<f64>::zeros((n, 1));
        let mut cm1 = Array2::<f64>::zeros((n, 1));
        for i in 0..n {
            let row: Vec<f64> = (0..5).map(|j| study.main.z[[i, j]]).collect();
            ps1[[i, 0]] = true_ps(Case::Case1, &row);
            cm0[[i, 0]] = true_cm(Case::Case1, 0, &row);
            cm1[[i, 0]] = true_cm(Case::Case1, 1, &row);
        }
        let preds = CandidatePredictions {
            levels: 2,
            ps: vec![ps1.mapv(|v| 1.0 - v), ps1.clone()],
            cm: vec![cm0, cm1],
            ps_labels: vec!["oracle"],
            cm_labels: vec!["oracle"],
            clip_fraction: 0.0,
        };
        let y: Vec<f64> = study.main.y.to_vec();
        let (tau, _, _) = cml_tau(&y, &study.main.x, &preds, 1, &el).unwrap();
        taus.push(tau);

        let ps_vec: Vec<f64> = (0..n).map(|i| ps1[[i, 0]]).collect();
        let cm_vec: Vec<f64> = (0..n).map(|i| preds.cm[1][[i, 0]]).collect();
        let oracle = influence_variance(&y, &study.main.x, &ps_vec, &cm_vec, 1, 0.5);
        sigma2_hat += oracle.sigma2 / reps as f64;
    }

    let mean = taus.iter().sum::<f64>() / reps as f64;
    let var = taus.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>() / (reps - 1) as f64;
    let scaled = var * scenario.n as f64;
    println!("replicates                 : {reps}");
    println!("mean tau(1)                : {mean:.4}   (truth 0.5)");
    println!("n * var(tau)               : {scaled:.3}");
    println!("influence variance sigma^2 : {sigma2_hat:.3}");
    println!("ratio                      : {:.3}", scaled / sigma2_hat);
}
