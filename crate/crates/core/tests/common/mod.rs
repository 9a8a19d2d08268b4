#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use shrinkfit::estimators::Dataset;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal(r: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(r)
}

pub fn sigmoid(t: f64) -> f64 {
    1.0 / (1.0 + (-t).exp())
}

/// Group-ATE data: `X ~ U(0,1)^3`, `A ~ Bern(logit⁻¹(x1 + α_g - α_g x2))`,
/// `Y = 2 x1 - 2 x2 + 0.5 x3² + β_g A + σ ε`.
pub struct AteDgp {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub sigma: f64,
}

impl AteDgp {
    pub fn propensity(&self, g: usize, x: &[f64]) -> f64 {
        let a = self.alpha[g - 1];
        sigmoid(x[0] + a - a * x[1])
    }

    pub fn outcome(&self, g: usize, a: f64, x: &[f64]) -> f64 {
        2.0 * x[0] - 2.0 * x[1] + 0.5 * x[2] * x[2] + self.beta[g - 1] * a
    }

    pub fn draw(&self, n: usize, seed: u64) -> Dataset {
        let mut r = rng(seed);
        let groups = self.alpha.len();
        let x = DMatrix::from_fn(n, 3, |_, _| r.random::<f64>());
        let mut y = Vec::with_capacity(n);
        let mut a = Vec::with_capacity(n);
        let mut g = Vec::with_capacity(n);
        for i in 0..n {
            let row = [x[(i, 0)], x[(i, 1)], x[(i, 2)]];
            let gi = r.random_range(1..=groups);
            let ai = f64::from(r.random::<f64>() < self.propensity(gi, &row));
            y.push(self.outcome(gi, ai, &row) + self.sigma * normal(&mut r));
            a.push(ai);
            g.push(gi as f64);
        }
        Dataset::from_parts(&x, y, Some(a), Some(g)).unwrap()
    }
}

/// Provider data: `X ~ U(0,1)^2`, provider `A ∈ 1..=3` with
/// `P(A = d | X) ∝ exp(c_d x1)`, `Y = 1 + 2 x1 - x2 + ε`.
pub struct ProviderDgp {
    pub slopes: Vec<f64>,
}

impl ProviderDgp {
    pub fn probs(&self, x: &[f64]) -> Vec<f64> {
        let w: Vec<f64> = self.slopes.iter().map(|c| (c * x[0]).exp()).collect();
        let s: f64 = w.iter().sum();
        w.iter().map(|v| v / s).collect()
    }

    pub fn mu(&self, x: &[f64]) -> f64 {
        1.0 + 2.0 * x[0] - x[1]
    }

    pub fn draw(&self, n: usize, seed: u64) -> Dataset {
        let mut r = rng(seed);
        let x = DMatrix::from_fn(n, 2, |_, _| r.random::<f64>());
        let mut y = Vec::with_capacity(n);
        let mut a = Vec::with_capacity(n);
        for i in 0..n {
            let row = [x[(i, 0)], x[(i, 1)]];
            let probs = self.probs(&row);
            let u: f64 = r.random();
            let mut acc = 0.0;
            let mut d = probs.len();
            for (j, p) in probs.iter().enumerate() {
                acc += p;
                if u < acc {
                    d = j + 1;
                    break;
                }
            }
            a.push(d as f64);
            y.push(self.mu(&row) + normal(&mut r));
        }
        Dataset::from_parts(&x, y, Some(a), None).unwrap()
    }
}

pub fn within(est: f64, truth: f64, se: f64, k: f64) -> bool {
    (est - truth).abs() <= k * se
}
