//! Influence-function oracle for simulation checks: with the true propensity
//! and conditional mean supplied, the per-unit influence value
//! `I(X=x)/π·Y − (I(X=x)−π)/π·μ − τ(x)` has mean zero, and the mean of its
//! square is the asymptotic variance the calibrated estimator should attain.

/// Per-unit influence values and their second moment.
#[derive(Debug, Clone)]
pub struct InfluenceOracle {
    pub f_values: Vec<f64>,
    pub sigma2: f64,
}

/// Evaluate the influence function at known nuisances. `true_ps[i]` is the
/// probability of level `x` for unit `i`; `true_cm[i]` the conditional mean
/// at that level.
pub fn influence_variance(
    y: &[f64],
    x: &[usize],
    true_ps: &[f64],
    true_cm: &[f64],
    level: usize,
    tau_true: f64,
) -> InfluenceOracle {
    let f_values: Vec<f64> = (0..y.len())
        .map(|i| {
            let ind = if x[i] == level { 1.0 } else { 0.0 };
            let pi = true_ps[i];
            ind / pi * y[i] - (ind - pi) / pi * true_cm[i] - tau_true
        })
        .collect();
    let sigma2 = f_values.iter().map(|f| f * f).sum::<f64>() / f_values.len() as f64;
    InfluenceOracle { f_values, sigma2 }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_world_has_zero_influence() {
        // Y ≡ c, π constant, μ ≡ c, τ = c: the influence collapses to
        // c·I/π − c(I−π)/π − c = 0 for every unit.
        let c = 4.0;
        let y = vec![c; 6];
        let x = vec![1usize, 0, 1, 0, 1, 0];
        let ps = vec![0.35; 6];
        let cm = vec![c; 6];
        let oracle = influence_variance(&y, &x, &ps, &cm, 1, c);
        for f in &oracle.f_values {
            assert!(f.abs() < 1e-12, "{f}");
        }
        assert!(oracle.sigma2 < 1e-24);
    }

    #[test]
    fn influence_mean_vanishes_at_true_nuisances() {
        use rand::Rng;
        let mut rng = crate::rng::rng_from(88);
        let n = 20_000;
        let mut y = vec![0.0; n];
        let mut x = vec![0usize; n];
        let mut ps = vec![0.0; n];
        let mut cm = vec![0.0; n];
        let mut truth = 0.0;
        for i in 0..n {
            let z: f64 = rng.random_range(-1.0..1.0);
            let pi = 1.0 / (1.0 + (-z).exp());
            let mu1 = 0.5 + z;
            x[i] = (rng.random::<f64>() < pi) as usize;
            let noise: f64 = rng.random_range(-1.0..1.0);
            y[i] = if x[i] == 1 { mu1 + noise } else { z + noise };
            ps[i] = pi;
            cm[i] = mu1;
            truth += mu1;
        }
        truth /= n as f64;
        let oracle = influence_variance(&y, &x, &ps, &cm, 1, truth);
        let mean = oracle.f_values.iter().sum::<f64>() / n as f64;
        let sd = oracle.sigma2.sqrt();
        assert!(
            mean.abs() < 3.0 * sd / (n as f64).sqrt(),
            "influence mean {mean} too far from zero (sd {sd})"
        );
    }
}
