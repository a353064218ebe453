//! The empirical-likelihood weight solver on small hand-checkable systems.
//!
//! ```bash
//! cargo run --release --example el_weights
//! ```

use calibra::{drop_collinear_columns, solve_el, ConstraintMatrix};
use ndarray::array;

fn main() {
    // Two units, one constraint: w1 + w2 = 1 and -w1 + 3*w2 = 0 have the
    // unique positive solution (3/4, 1/4).
    let g = ConstraintMatrix::new(array![[-1.0], [3.0]]).unwrap();
    let sol = solve_el(&g, 1.0, 1e-12, 200).unwrap();
    println!("two-point system:");
    println!("  weights    = {:?}", sol.weights.to_vec());
    println!("  dual       = {:?}", sol.dual.to_vec());
    println!("  iterations = {}", sol.iterations);

    // A bigger random-ish system: weights stay positive, sum to the total,
    // and zero out the weighted constraint columns.
    let g = ConstraintMatrix::new(array![
        [-1.2, 0.4],
        [0.5, -0.2],
        [0.3, -0.5],
        [0.2, 0.3],
        [-0.7, 0.1],
        [0.9, -0.1],
    ])
    .unwrap();
    let sol = solve_el(&g, 1.0, 1e-12, 200).unwrap();
    println!("\nsix-point system:");
    println!("  weights = {:?}", sol.weights.to_vec());
    let sum: f64 = sol.weights.iter().sum();
    println!("  sum(w)  = {sum}");
    for j in 0..2 {
        let moment: f64 = (0..6).map(|i| sol.weights[i] * g.values[[i, j]]).sum();
        println!("  sum(w * g{j}) = {moment:+.3e}");
    }

    // Single-signed constraint columns are infeasible: no positive weights
    // can average them to zero.
    let bad = ConstraintMatrix::new(array![[1.0], [2.0], [0.5]]).unwrap();
    println!("\ninfeasible system: {}", solve_el(&bad, 1.0, 1e-10, 200).unwrap_err());

    // Duplicate or nearly dependent columns are dropped before solving.
    let dup = ConstraintMatrix::new(array![
        [1.0, 2.0, 0.3],
        [-1.0, -2.0, -0.1],
        [0.5, 1.0, -0.2],
    ])
    .unwrap();
    let (filtered, kept) = drop_collinear_columns(&dup, 1e-10);
    println!("\ncollinearity filter kept columns {kept:?} of 3 (now {} wide)", filtered.q());
}
