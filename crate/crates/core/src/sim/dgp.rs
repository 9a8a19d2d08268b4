//! Data-generating processes of the two simulation studies.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::rng::{stream_rng, streams, STUDY_LEVEL};
use super::{Sim1Config, Sim2Config};
use crate::error::{Error, Result};
use crate::estimators::Dataset;

/// Coefficients `β_k ~ Bernoulli(θ)` shared by every replication of a study.
pub fn sim1_coefficients(cfg: &Sim1Config) -> Vec<f64> {
    let mut rng = stream_rng(cfg.seed, STUDY_LEVEL, streams::PARAMETERS);
    (0..cfg.n_covariates)
        .map(|_| f64::from(rng.random::<f64>() < cfg.sparsity_theta))
        .collect()
}

/// Sparse linear model: `X_k ~ Bernoulli(0.5)`, `Y = βX + ε`. The truth is `β`.
pub fn dgp_sim1(cfg: &Sim1Config, rep: u64) -> Result<(Dataset, Vec<f64>)> {
    let beta = sim1_coefficients(cfg);
    let mut rng = stream_rng(cfg.seed, rep, streams::DATA);
    let noise = Normal::new(0.0, cfg.noise_sd).map_err(|e| Error::Config(e.to_string()))?;
    let p = cfg.n_covariates;
    let x = DMatrix::from_fn(cfg.n, p, |_, _| f64::from(rng.random::<bool>()));
    let y = (0..cfg.n)
        .map(|i| {
            let signal: f64 = (0..p).map(|k| beta[k] * x[(i, k)]).sum();
            signal + noise.sample(&mut rng)
        })
        .collect();
    Ok((Dataset::from_parts(&x, y, None, None)?, beta))
}

/// Group parameters `(α_d, β_d = δ_d α_d)` shared by every replication.
pub fn sim2_parameters(cfg: &Sim2Config) -> (Vec<f64>, Vec<f64>) {
    let mut rng = stream_rng(cfg.seed, STUDY_LEVEL, streams::PARAMETERS);
    let mut alpha = Vec::with_capacity(cfg.n_groups);
    let mut beta = Vec::with_capacity(cfg.n_groups);
    for _ in 0..cfg.n_groups {
        let active = rng.random::<f64>() < cfg.theta;
        let a = rng.random_range(-1.0..1.0);
        alpha.push(a);
        beta.push(if active { a } else { 0.0 });
    }
    (alpha, beta)
}

/// `P(A = 1 | G, X)` of the group-effect design.
pub fn sim2_propensity(alpha_g: f64, x1: f64, x2: f64) -> f64 {
    1.0 / (1.0 + (-(x1 + alpha_g - alpha_g * x2)).exp())
}

const MAX_REDRAWS: u64 = 10;

/// Group-specific treatment effects with 5 uniform covariates. The
/// observation-level data are redrawn (up to 10 times) when a
/// (group, treatment) cell is empty.
pub fn dgp_sim2(cfg: &Sim2Config, rep: u64) -> Result<(Dataset, Vec<f64>)> {
    let (alpha, beta) = sim2_parameters(cfg);
    let noise = Normal::new(0.0, cfg.noise_sd).map_err(|e| Error::Config(e.to_string()))?;
    for attempt in 0..MAX_REDRAWS {
        let mut rng = stream_rng(cfg.seed, rep, streams::DATA + 16 * attempt);
        let n = cfg.n;
        let x = DMatrix::from_fn(n, 5, |_, _| rng.random::<f64>());
        let mut g = Vec::with_capacity(n);
        let mut a = Vec::with_capacity(n);
        let mut y = Vec::with_capacity(n);
        let mut cells = vec![[0usize; 2]; cfg.n_groups];
        for i in 0..n {
            let gi = rng.random_range(0..cfg.n_groups);
            let p = sim2_propensity(alpha[gi], x[(i, 0)], x[(i, 1)]);
            let ai = rng.random::<f64>() < p;
            let mean = 2.0 * x[(i, 0)] - 2.0 * x[(i, 1)]
                + 0.5 * x[(i, 4)] * x[(i, 4)]
                + beta[gi] * f64::from(ai);
            cells[gi][usize::from(ai)] += 1;
            g.push((gi + 1) as f64);
            a.push(f64::from(ai));
            y.push(mean + noise.sample(&mut rng));
        }
        if cells.iter().all(|c| c[0] > 0 && c[1] > 0) {
            return Ok((Dataset::from_parts(&x, y, Some(a), Some(g))?, beta));
        }
        log::debug!("rep {rep}: empty (group, treatment) cell on attempt {attempt}; redrawing");
    }
    Err(Error::Positivity(format!(
        "replication {rep}: a (group, treatment) cell stayed empty after {MAX_REDRAWS} draws"
    )))
}
