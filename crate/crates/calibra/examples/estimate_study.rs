//! End-to-end `estimate` workflow on generated CSV files: write a synthetic
//! study to disk, run the full pipeline (load, validate, cross-fit,
//! bootstrap), and print the text report.
//!
//! ```bash
//! cargo run --release --example estimate_study
//! ```

use calibra::cli::{run_estimate, EstimateArgs};
use calibra::simgen::{gen_study, Case, Scenario};
use std::fmt::Write as _;

fn main() {
    let scenario = Scenario {
        case: Case::Case1,
        p: 10,
        n: 400,
        aux_multiplier: 2.0,
        levels: 2,
        heterogeneity_shift: 0.0,
        runs: 1,
        seed: 2024,
    };
    let mut rng = calibra::rng::rng_from(2024);
    let study = gen_study(&scenario, &mut rng).unwrap();

    let dir = std::env::temp_dir().join("calibra_estimate_example");
    std::fs::create_dir_all(&dir).unwrap();
    let main_path = dir.join("main.csv");
    let aux_path = dir.join("aux.csv");
    study.main.write_csv(&main_path, "y", "x").unwrap();

    // Auxiliary file: outcome and exposure only.
    let mut aux_csv = String::from("y,x\n");
    for i in 0..study.aux.len() {
        let _ = writeln!(aux_csv, "{},{}", study.aux.y[i], study.aux.x[i]);
    }
    std::fs::write(&aux_path, aux_csv).unwrap();

    let args = EstimateArgs {
        main: Some(main_path),
        aux: Some(aux_path),
        outcome: Some("y".into()),
        exposure: Some("x".into()),
        seed: Some(7),
        bootstrap_reps: Some(40),
        format: Some("text".into()),
        ..Default::default()
    };
    let output = run_estimate(&args).unwrap();
    println!("{}", output.content);
    println!("(true values are 0.0 at level 0 and 0.5 at level 1)");
}
