//! Robust estimation of mean potential outcomes under many confounders,
//! with empirical-likelihood ensemble calibration and information borrowing
//! from an auxiliary sample where confounders are unobserved.
//!
//! The pipeline: fit several candidate propensity-score and outcome-mean
//! learners under two-fold cross-fitting, calibrate per-group weights by
//! empirical likelihood against all candidate predictions at once, and—when
//! an auxiliary sample with outcome and exposure is available—sharpen the
//! estimate with integration scores computed from a shared working moment.
//! Inference is by nonparametric bootstrap with frozen tuning parameters.
//!
//! See the `examples/` directory for one runnable example per capability:
//!
//! ```bash
//! cargo run --release --example el_weights          # the dual EL solver
//! cargo run --release --example estimate_study      # CSV in, report out
//! cargo run --release --example borrow_information  # CML vs CMLIB
//! cargo run --release --example simulate_case1      # desk-scale Monte Carlo
//! cargo run --release --example bootstrap_ci        # bootstrap inference
//! cargo run --release --example match_balance       # membership matching
//! ```
//!
//! The same capabilities are exposed by the `calibra` binary through the
//! `estimate`, `simulate`, and `match` subcommands.

pub mod cli;
pub mod data;
pub mod learners;
pub mod el;
pub mod estimators;
pub mod error;
pub mod linalg;
pub mod matching;
pub mod report;
pub mod rng;
pub mod simgen;
pub mod stats;

pub use data::{
    load_aux_csv, load_main_csv, load_shared_columns, validate_study, AuxDataset, ExposureCoding,
    MainDataset, StudyConfig, ValidationReport, WorkingFunction,
};
pub use el::{drop_collinear_columns, solve_el, ConstraintMatrix, ELSolution};
pub use error::{CalibraError, Result};
pub use estimators::{
    bootstrap_inference, cross_fit_estimate, influence_variance, integration_scores,
    integration_theta, raw_mean, LevelEstimate, Method,
};
pub use learners::{assemble_candidates, CandidatePredictions, LearnerSpec};
pub use matching::{fit_membership_scores, match_datasets, nn_match, MatchResult};
pub use simgen::{gen_covariates, gen_study, run_monte_carlo, true_cm, true_ps, true_tau_oracle, Case, MonteCarloTable, Scenario};
