//! Binary CART trees: variance-reduction splits for regression, Gini splits
//! for classification. Split scans are deterministic: candidate features keep
//! their sampled order, value ties are broken by row index, and the first
//! best-scoring split wins.

use ndarray::ArrayView2;
use rand::Rng;

#[derive(Debug, Clone, Copy)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Number of candidate features sampled at each node.
    pub mtry: usize,
}

#[derive(Debug, Clone)]
pub enum RegNode {
    Leaf { value: f64 },
    Split { feature: usize, threshold: f64, left: u32, right: u32 },
}

/// Regression tree; leaves predict the training mean of their region (or a
/// caller-supplied value, see [`RegTree::set_leaf_values`]).
#[derive(Debug, Clone)]
pub struct RegTree {
    pub nodes: Vec<RegNode>,
}

#[derive(Debug, Clone)]
pub enum ClassNode {
    Leaf { class: usize },
    Split { feature: usize, threshold: f64, left: u32, right: u32 },
}

/// Classification tree; leaves predict the majority class of their region,
/// ties broken toward the smallest class index.
#[derive(Debug, Clone)]
pub struct ClassTree {
    pub nodes: Vec<ClassNode>,
}

/// Sample `mtry` distinct feature indices (partial Fisher–Yates).
fn sample_features<R: Rng>(p: usize, mtry: usize, rng: &mut R) -> Vec<usize> {
    let m = mtry.min(p);
    if m == p {
        return (0..p).collect();
    }
    let mut pool: Vec<usize> = (0..p).collect();
    for i in 0..m {
        let j = rng.random_range(i..p);
        pool.swap(i, j);
    }
    pool.truncate(m);
    pool
}

/// Sort node rows by a feature value, index as tie-breaker.
fn order_by_feature(z: &ArrayView2<f64>, idx: &[usize], feature: usize) -> Vec<usize> {
    let mut order = idx.to_vec();
    order.sort_unstable_by(|&a, &b| {
        z[[a, feature]]
            .total_cmp(&z[[b, feature]])
            .then(a.cmp(&b))
    });
    order
}

struct SplitChoice {
    feature: usize,
    threshold: f64,
    score: f64,
    left: Vec<usize>,
    right: Vec<usize>,
}

fn best_split_reg(
    z: &ArrayView2<f64>,
    y: &[f64],
    idx: &[usize],
    features: &[usize],
    min_leaf: usize,
) -> Option<SplitChoice> {
    let n = idx.len();
    if n < 2 * min_leaf {
        return None;
    }
    let total_sum: f64 = idx.iter().map(|&i| y[i]).sum();
    let mut best: Option<SplitChoice> = None;
    for &f in features {
        let order = order_by_feature(z, idx, f);
        let mut left_sum = 0.0;
        for cut in 1..n {
            let i = order[cut - 1];
            left_sum += y[i];
            if cut < min_leaf || n - cut < min_leaf {
                continue;
            }
            let v_lo = z[[i, f]];
            let v_hi = z[[order[cut], f]];
            if v_lo == v_hi {
                continue;
            }
            // Minimizing within-node SSE is maximizing sum²/count on both sides.
            let nl = cut as f64;
            let nr = (n - cut) as f64;
            let right_sum = total_sum - left_sum;
            let score = left_sum * left_sum / nl + right_sum * right_sum / nr;
            if best.as_ref().map_or(true, |b| score > b.score) {
                best = Some(SplitChoice {
                    feature: f,
                    threshold: 0.5 * (v_lo + v_hi),
                    score,
                    left: order[..cut].to_vec(),
                    right: order[cut..].to_vec(),
                });
            }
        }
    }
    best
}

fn best_split_class(
    z: &ArrayView2<f64>,
    labels: &[usize],
    n_classes: usize,
    idx: &[usize],
    features: &[usize],
    min_leaf: usize,
) -> Option<SplitChoice> {
    let n = idx.len();
    if n < 2 * min_leaf {
        return None;
    }
    let mut total = vec![0usize; n_classes];
    for &i in idx {
        total[labels[i]] += 1;
    }
    let gini_complement = |counts: &[usize], m: f64| -> f64 {
        // 1 - Gini, scaled by m: Σ c² / m. Larger is purer.
        counts.iter().map(|&c| (c * c) as f64).sum::<f64>() / m
    };
    let mut best: Option<SplitChoice> = None;
    for &f in features {
        let order = order_by_feature(z, idx, f);
        let mut left = vec![0usize; n_classes];
        for cut in 1..n {
            let i = order[cut - 1];
            left[labels[i]] += 1;
            if cut < min_leaf || n - cut < min_leaf {
                continue;
            }
            let v_lo = z[[i, f]];
            let v_hi = z[[order[cut], f]];
            if v_lo == v_hi {
                continue;
            }
            let right: Vec<usize> = total.iter().zip(&left).map(|(t, l)| t - l).collect();
            let score =
                gini_complement(&left, cut as f64) + gini_complement(&right, (n - cut) as f64);
            if best.as_ref().map_or(true, |b| score > b.score) {
                best = Some(SplitChoice {
                    feature: f,
                    threshold: 0.5 * (v_lo + v_hi),
                    score,
                    left: order[..cut].to_vec(),
                    right: order[cut..].to_vec(),
                });
            }
        }
    }
    best
}

impl RegTree {
    /// Fit on the rows in `idx`. Returns the tree and, for each training row
    /// (aligned with `idx`), the node index of the leaf it landed in.
    pub fn fit<R: Rng>(
        z: &ArrayView2<f64>,
        y: &[f64],
        idx: &[usize],
        params: &TreeParams,
        rng: &mut R,
    ) -> (Self, Vec<(usize, Vec<usize>)>) {
        let p = z.ncols();
        let mut nodes: Vec<RegNode> = Vec::new();
        let mut leaves: Vec<(usize, Vec<usize>)> = Vec::new();
        // (node slot, rows, depth) work stack; children are appended in a
        // fixed order so node numbering is deterministic.
        nodes.push(RegNode::Leaf { value: 0.0 });
        let mut stack: Vec<(usize, Vec<usize>, usize)> = vec![(0, idx.to_vec(), 0)];
        while let Some((slot, rows, depth)) = stack.pop() {
            let mean = rows.iter().map(|&i| y[i]).sum::<f64>() / rows.len() as f64;
            let split = if depth >= params.max_depth {
                None
            } else {
                let feats = sample_features(p, params.mtry, rng);
                best_split_reg(z, y, &rows, &feats, params.min_leaf)
            };
            match split {
                Some(s) => {
                    let left_slot = nodes.len();
                    nodes.push(RegNode::Leaf { value: 0.0 });
                    let right_slot = nodes.len();
                    nodes.push(RegNode::Leaf { value: 0.0 });
                    nodes[slot] = RegNode::Split {
                        feature: s.feature,
                        threshold: s.threshold,
                        left: left_slot as u32,
                        right: right_slot as u32,
                    };
                    stack.push((right_slot, s.right, depth + 1));
                    stack.push((left_slot, s.left, depth + 1));
                }
                None => {
                    nodes[slot] = RegNode::Leaf { value: mean };
                    leaves.push((slot, rows));
                }
            }
        }
        (RegTree { nodes }, leaves)
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut node = 0usize;
        loop {
            match &self.nodes[node] {
                RegNode::Leaf { value } => return *value,
                RegNode::Split { feature, threshold, left, right } => {
                    node = if row[*feature] <= *threshold {
                        *left as usize
                    } else {
                        *right as usize
                    };
                }
            }
        }
    }

    /// Replace leaf predictions; used by boosting to install Newton-step
    /// values computed from the gradient statistics of each region.
    pub fn set_leaf_values(&mut self, values: &[(usize, f64)]) {
        for &(slot, v) in values {
            if let RegNode::Leaf { value } = &mut self.nodes[slot] {
                *value = v;
            }
        }
    }
}

impl ClassTree {
    pub fn fit<R: Rng>(
        z: &ArrayView2<f64>,
        labels: &[usize],
        n_classes: usize,
        idx: &[usize],
        params: &TreeParams,
        rng: &mut R,
    ) -> Self {
        let p = z.ncols();
        let mut nodes: Vec<ClassNode> = Vec::new();
        nodes.push(ClassNode::Leaf { class: 0 });
        let mut stack: Vec<(usize, Vec<usize>, usize)> = vec![(0, idx.to_vec(), 0)];
        while let Some((slot, rows, depth)) = stack.pop() {
            let mut counts = vec![0usize; n_classes];
            for &i in &rows {
                counts[labels[i]] += 1;
            }
            let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
            let split = if pure || depth >= params.max_depth {
                None
            } else {
                let feats = sample_features(p, params.mtry, rng);
                best_split_class(z, labels, n_classes, &rows, &feats, params.min_leaf)
            };
            match split {
                Some(s) => {
                    let left_slot = nodes.len();
                    nodes.push(ClassNode::Leaf { class: 0 });
                    let right_slot = nodes.len();
                    nodes.push(ClassNode::Leaf { class: 0 });
                    nodes[slot] = ClassNode::Split {
                        feature: s.feature,
                        threshold: s.threshold,
                        left: left_slot as u32,
                        right: right_slot as u32,
                    };
                    stack.push((right_slot, s.right, depth + 1));
                    stack.push((left_slot, s.left, depth + 1));
                }
                None => {
                    let majority = counts
                        .iter()
                        .enumerate()
                        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
                        .map(|(c, _)| c)
                        .unwrap_or(0);
                    nodes[slot] = ClassNode::Leaf { class: majority };
                }
            }
        }
        ClassTree { nodes }
    }

    pub fn predict_row(&self, row: &[f64]) -> usize {
        let mut node = 0usize;
        loop {
            match &self.nodes[node] {
                ClassNode::Leaf { class } => return *class,
                ClassNode::Split { feature, threshold, left, right } => {
                    node = if row[*feature] <= *threshold {
                        *left as usize
                    } else {
                        *right as usize
                    };
                }
            }
        }
    }
}
