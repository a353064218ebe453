//! Temporary diagnostic: three-candidate CML bias on the Case-3 design under
//! different member settings.

use calibra::data::{AuxDataset, StudyConfig};
use calibra::estimators::cross_fit_estimate;
use calibra::learners::LearnerSpec;
use calibra::simgen::{gen_study, Case, Scenario};
use calibra::Method;

fn main() {
    let scenario = Scenario {
        case: Case::Case3,
        p: 10,
        n: 500,
        aux_multiplier: 2.0,
        levels: 2,
        heterogeneity_shift: 0.0,
        runs: 1,
        seed: 0,
    };
    let truth = 1.686_17;
    let reps = 40u64;

    let boost = |depth: usize, shrinkage: f64, rounds: usize| LearnerSpec::GradientBoosting {
        depth,
        shrinkage,
        max_rounds: rounds,
        cv_folds: 10,
    };
    let forest = |min_leaf: usize| LearnerSpec::RandomForest {
        n_trees: 300,
        mtry: None,
        min_leaf,
    };
    let variants: Vec<(&str, Vec<LearnerSpec>, Vec<LearnerSpec>)> = vec![
        (
            "ridge+boost(d4,r250)",
            vec![LearnerSpec::ridge_multinomial_default(), boost(4, 0.1, 250)],
            vec![LearnerSpec::ridge_regression_default(), boost(4, 0.1, 250)],
        ),
        (
            "ridge+forest(ml25)+boost(d4,r250)",
            vec![LearnerSpec::ridge_multinomial_default(), forest(25), boost(4, 0.1, 250)],
            vec![LearnerSpec::ridge_regression_default(), forest(25), boost(4, 0.1, 250)],
        ),
        (
            "boost-only(d4,r250)",
            vec![boost(4, 0.1, 250)],
            vec![boost(4, 0.1, 250)],
        ),
        (
            "forest(ml25)+boost(d4,r250)",
            vec![forest(25), boost(4, 0.1, 250)],
            vec![forest(25), boost(4, 0.1, 250)],
        ),
        (
            "ridge+forest(ml40)+boost(d5,s0.05,r500)",
            vec![LearnerSpec::ridge_multinomial_default(), forest(40), boost(5, 0.05, 500)],
            vec![LearnerSpec::ridge_regression_default(), forest(40), boost(5, 0.05, 500)],
        ),
    ];
    for (label, ps_cands, cm_cands) in variants {
        let mut config = StudyConfig::default_for_levels(2);
        config.ps_candidates = ps_cands;
        config.cm_candidates = cm_cands;
        let mut cml = Vec::new();
        let mut boost = Vec::new();
        let mut forest = Vec::new();
        for rep in 0..reps {
            let mut rng = calibra::rng::rng_from(50_000 + rep);
            let study = gen_study(&scenario, &mut rng).unwrap();
            let mut cfg = config.clone();
            cfg.seed = 50_000 + rep;
            match cross_fit_estimate(&study.main, &AuxDataset::empty(), &cfg) {
                Ok(out) => {
                    let pick = |m: &Method| {
                        out.estimates
                            .iter()
                            .find(|e| e.level == 1 && &e.method == m)
                            .map(|e| e.tau_hat - truth)
                    };
                    if let Some(v) = pick(&Method::Cml) {
                        cml.push(v);
                    }
                    if let Some(v) = pick(&Method::Aiptw("boost".into())) {
                        boost.push(v);
                    }
                    if let Some(v) = pick(&Method::Aiptw("forest".into())) {
                        forest.push(v);
                    }
                }
                Err(_) => continue,
            }
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        println!(
            "{label}: CML {:+.4}, boost {:+.4}, forest {:+.4} ({} reps)",
            mean(&cml),
            mean(&boost),
            mean(&forest),
            cml.len()
        );
    }
}
