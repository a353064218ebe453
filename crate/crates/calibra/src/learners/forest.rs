//! Random forests over the CART trees: bootstrap sampling per tree,
//! feature subsampling per node, hard-vote class proportions for
//! classification and tree-mean averaging for regression.
//!
//! Each tree draws from its own RNG stream derived from (seed, tree index),
//! and aggregation walks the tree vector in index order, so predictions are
//! bit-identical no matter how many worker threads fit the forest.

use ndarray::{Array1, Array2, ArrayView2};
use rand::Rng;
use rayon::prelude::*;

use crate::learners::tree::{ClassTree, RegTree, TreeParams};
use crate::rng;

const FOREST_DEPTH_CAP: usize = 40;

fn bootstrap_rows<R: Rng>(n: usize, rng: &mut R) -> Vec<usize> {
    (0..n).map(|_| rng.random_range(0..n)).collect()
}

#[derive(Debug, Clone)]
pub struct ClassForest {
    pub trees: Vec<ClassTree>,
    pub n_classes: usize,
}

pub fn fit_class_forest(
    z: &ArrayView2<f64>,
    labels: &[usize],
    n_classes: usize,
    n_trees: usize,
    mtry: Option<usize>,
    min_leaf: usize,
    seed: u64,
) -> ClassForest {
    let n = z.nrows();
    let p = z.ncols();
    let mtry = mtry.unwrap_or_else(|| (p as f64).sqrt().ceil() as usize).clamp(1, p);
    let params = TreeParams {
        max_depth: FOREST_DEPTH_CAP,
        min_leaf,
        mtry,
    };
    let trees: Vec<ClassTree> = (0..n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng::rng_from(rng::derive_indexed(seed, rng::tag::TREE, t as u64));
            let rows = bootstrap_rows(n, &mut rng);
            ClassTree::fit(z, labels, n_classes, &rows, &params, &mut rng)
        })
        .collect();
    ClassForest { trees, n_classes }
}

impl ClassForest {
    /// Per-class vote proportions over the ensemble, one row per unit.
    pub fn predict_proba(&self, z: &ArrayView2<f64>) -> Array2<f64> {
        let m = z.nrows();
        let mut votes = Array2::<f64>::zeros((m, self.n_classes));
        let mut row = vec![0.0f64; z.ncols()];
        for i in 0..m {
            for (j, v) in row.iter_mut().enumerate() {
                *v = z[[i, j]];
            }
            for tree in &self.trees {
                votes[[i, tree.predict_row(&row)]] += 1.0;
            }
        }
        let t = self.trees.len() as f64;
        votes.mapv_inplace(|v| v / t);
        votes
    }
}

#[derive(Debug, Clone)]
pub struct RegForest {
    pub trees: Vec<RegTree>,
}

pub fn fit_reg_forest(
    z: &ArrayView2<f64>,
    y: &[f64],
    n_trees: usize,
    mtry: Option<usize>,
    min_leaf: usize,
    seed: u64,
) -> RegForest {
    let n = z.nrows();
    let p = z.ncols();
    let mtry = mtry
        .unwrap_or_else(|| ((p as f64) / 3.0).ceil() as usize)
        .clamp(1, p);
    let params = TreeParams {
        max_depth: FOREST_DEPTH_CAP,
        min_leaf,
        mtry,
    };
    let trees: Vec<RegTree> = (0..n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng::rng_from(rng::derive_indexed(seed, rng::tag::TREE, t as u64));
            let rows = bootstrap_rows(n, &mut rng);
            RegTree::fit(z, y, &rows, &params, &mut rng).0
        })
        .collect();
    RegForest { trees }
}

impl RegForest {
    /// Mean of the per-tree predictions, summed in tree order.
    pub fn predict(&self, z: &ArrayView2<f64>) -> Array1<f64> {
        let m = z.nrows();
        let mut out = Array1::<f64>::zeros(m);
        let mut row = vec![0.0f64; z.ncols()];
        for i in 0..m {
            for (j, v) in row.iter_mut().enumerate() {
                *v = z[[i, j]];
            }
            let mut acc = 0.0;
            for tree in &self.trees {
                acc += tree.predict_row(&row);
            }
            out[i] = acc / self.trees.len() as f64;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use rand::Rng;

    #[test]
    fn noise_features_yield_calibrated_binary_votes() {
        // Balanced labels independent of Z: mean vote for class 1 near 1/2.
        let n = 200;
        let mut z = Array2::<f64>::zeros((n, 3));
        let mut labels = vec![0usize; n];
        let mut rng = crate::rng::rng_from(31);
        for i in 0..n {
            for j in 0..3 {
                z[[i, j]] = rng.random_range(-1.0..1.0);
            }
            labels[i] = i % 2;
        }
        let forest = fit_class_forest(&z.view(), &labels, 2, 1000, None, 5, 77);
        let probs = forest.predict_proba(&z.view());
        let mean_p1 = probs.column(1).sum() / n as f64;
        assert!(
            (0.45..=0.55).contains(&mean_p1),
            "mean vote {mean_p1} outside [0.45, 0.55]"
        );
    }

    #[test]
    fn ensemble_prediction_equals_mean_of_tree_predictions() {
        let n = 50;
        let mut z = Array2::<f64>::zeros((n, 2));
        let mut y = vec![0.0; n];
        let mut rng = crate::rng::rng_from(8);
        for i in 0..n {
            z[[i, 0]] = rng.random_range(-2.0..2.0);
            z[[i, 1]] = rng.random_range(-2.0..2.0);
            y[i] = z[[i, 0]] * 1.4 - z[[i, 1]] + rng.random_range(-0.1..0.1);
        }
        let forest = fit_reg_forest(&z.view(), &y, 1000, None, 5, 99);
        let ensemble = forest.predict(&z.view());
        for i in 0..n {
            let row: Vec<f64> = (0..2).map(|j| z[[i, j]]).collect();
            let mut manual = 0.0;
            for tree in &forest.trees {
                manual += tree.predict_row(&row);
            }
            manual /= forest.trees.len() as f64;
            assert_eq!(ensemble[i].to_bits(), manual.to_bits());
        }
    }

    #[test]
    fn forest_is_deterministic_across_thread_counts() {
        let n = 60;
        let mut z = Array2::<f64>::zeros((n, 4));
        let mut y = vec![0.0; n];
        let mut rng = crate::rng::rng_from(123);
        for i in 0..n {
            for j in 0..4 {
                z[[i, j]] = rng.random_range(-1.0..1.0);
            }
            y[i] = z[[i, 0]] - 2.0 * z[[i, 3]];
        }
        let run = |threads: usize| -> Vec<u64> {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            pool.install(|| {
                let forest = fit_reg_forest(&z.view(), &y, 64, None, 5, 2024);
                forest
                    .predict(&z.view())
                    .iter()
                    .map(|v| v.to_bits())
                    .collect()
            })
        };
        assert_eq!(run(1), run(4));
    }
}
