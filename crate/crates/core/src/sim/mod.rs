//! Monte Carlo replication of the two simulation studies.
//!
//! A study runs `reps` independent replications of one scenario. Each
//! replication draws data from its own random stream, computes the one-step
//! estimate, applies every requested penalty and records errors against the
//! truth. Replications run on a rayon pool and are collected in replication
//! order, so reports do not depend on the number of threads.

mod dgp;
mod metrics;
pub mod rng;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

pub use dgp::{dgp_sim1, dgp_sim2, sim1_coefficients, sim2_parameters, sim2_propensity};
pub use metrics::{metrics, pairwise_sum, CoordinateMetrics, Metrics};

use crate::error::{Error, Result};
use crate::estimators::{onestep_group_ate, onestep_linear_assoc, OneStepOptions};
use crate::learners::{LearnerConfig, LearnerKind};
use crate::penalty::{penalize, Interval, Method};
use rng::{derived_seed, streams};

/// Replications may fail for at most this fraction before the study fails.
pub const MAX_SKIP_FRACTION: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Study {
    Sim1,
    Sim2,
}

impl Study {
    pub fn as_str(&self) -> &'static str {
        match self {
            Study::Sim1 => "sim1",
            Study::Sim2 => "sim2",
        }
    }
}

impl fmt::Display for Study {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Study {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sim1" | "linear-assoc" => Ok(Study::Sim1),
            "sim2" | "group-ate" => Ok(Study::Sim2),
            other => Err(Error::Config(format!("unknown study '{other}' (expected sim1 or sim2)"))),
        }
    }
}

/// Sparse linear-association study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sim1Config {
    pub n: usize,
    pub n_covariates: usize,
    pub sparsity_theta: f64,
    pub noise_sd: f64,
    pub reps: usize,
    pub seed: u64,
    pub folds: usize,
    pub learner: LearnerConfig,
    /// Also report lasso and ridge regressions of `Y` on `X`.
    pub benchmarks: bool,
}

impl Sim1Config {
    pub fn new(n: usize, noise_sd: f64, reps: usize, seed: u64) -> Self {
        Sim1Config {
            n,
            n_covariates: 100,
            sparsity_theta: 0.3,
            noise_sd,
            reps,
            seed,
            folds: 5,
            learner: LearnerConfig::new(LearnerKind::Lasso),
            benchmarks: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.reps < 1 {
            return Err(Error::Config("reps must be at least 1".into()));
        }
        if !(self.noise_sd > 0.0 && self.noise_sd.is_finite()) {
            return Err(Error::Config(format!("noise_sd must be positive, got {}", self.noise_sd)));
        }
        if !(0.0..=1.0).contains(&self.sparsity_theta) {
            return Err(Error::Config(format!("theta must lie in [0, 1], got {}", self.sparsity_theta)));
        }
        if self.n_covariates < 1 {
            return Err(Error::Config("n_covariates must be at least 1".into()));
        }
        if self.n < 5 * self.folds {
            return Err(Error::Config(format!(
                "n = {} is too small for {} folds",
                self.n, self.folds
            )));
        }
        self.learner.validate().map_err(|e| Error::Config(e.to_string()))
    }
}

/// Group-specific treatment-effect study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sim2Config {
    pub n: usize,
    pub n_groups: usize,
    pub theta: f64,
    pub noise_sd: f64,
    pub reps: usize,
    pub seed: u64,
    pub folds: usize,
    pub outcome_learner: LearnerConfig,
    pub propensity_learner: LearnerConfig,
    pub truncation: f64,
}

impl Sim2Config {
    pub fn new(n: usize, theta: f64, noise_sd: f64, reps: usize, seed: u64) -> Self {
        Sim2Config {
            n,
            n_groups: 25,
            theta,
            noise_sd,
            reps,
            seed,
            folds: 5,
            outcome_learner: LearnerConfig::new(LearnerKind::Ols).with_squares(true),
            propensity_learner: LearnerConfig::new(LearnerKind::Logistic),
            truncation: 0.01,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.reps < 1 {
            return Err(Error::Config("reps must be at least 1".into()));
        }
        if !(self.noise_sd > 0.0 && self.noise_sd.is_finite()) {
            return Err(Error::Config(format!("noise_sd must be positive, got {}", self.noise_sd)));
        }
        if !(0.0..=1.0).contains(&self.theta) {
            return Err(Error::Config(format!("theta must lie in [0, 1], got {}", self.theta)));
        }
        if self.n_groups < 1 {
            return Err(Error::Config("n_groups must be at least 1".into()));
        }
        if self.n < 20 * self.n_groups {
            return Err(Error::Config(format!(
                "n = {} must be at least 20 per group ({} groups)",
                self.n, self.n_groups
            )));
        }
        self.outcome_learner.validate().map_err(|e| Error::Config(e.to_string()))?;
        self.propensity_learner.validate().map_err(|e| Error::Config(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum StudyConfig {
    Sim1(Sim1Config),
    Sim2(Sim2Config),
}

impl StudyConfig {
    pub fn study(&self) -> Study {
        match self {
            StudyConfig::Sim1(_) => Study::Sim1,
            StudyConfig::Sim2(_) => Study::Sim2,
        }
    }

    pub fn reps(&self) -> usize {
        match self {
            StudyConfig::Sim1(c) => c.reps,
            StudyConfig::Sim2(c) => c.reps,
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            StudyConfig::Sim1(c) => c.seed,
            StudyConfig::Sim2(c) => c.seed,
        }
    }

    pub fn n(&self) -> usize {
        match self {
            StudyConfig::Sim1(c) => c.n,
            StudyConfig::Sim2(c) => c.n,
        }
    }

    pub fn noise_sd(&self) -> f64 {
        match self {
            StudyConfig::Sim1(c) => c.noise_sd,
            StudyConfig::Sim2(c) => c.noise_sd,
        }
    }

    pub fn theta(&self) -> f64 {
        match self {
            StudyConfig::Sim1(c) => c.sparsity_theta,
            StudyConfig::Sim2(c) => c.theta,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            StudyConfig::Sim1(c) => c.validate(),
            StudyConfig::Sim2(c) => c.validate(),
        }
    }

    fn options(&self, rep: u64) -> OneStepOptions {
        let seed = self.seed();
        let learner_seed = derived_seed(seed, rep, streams::FOLDS + 1);
        let mut opts = OneStepOptions {
            seed: derived_seed(seed, rep, streams::FOLDS),
            ..OneStepOptions::default()
        };
        match self {
            StudyConfig::Sim1(c) => {
                opts.folds = c.folds;
                opts.outcome_learner = c.learner.clone().with_seed(learner_seed);
                opts.scaled = true;
            }
            StudyConfig::Sim2(c) => {
                opts.folds = c.folds;
                opts.outcome_learner = c.outcome_learner.clone().with_seed(learner_seed);
                opts.propensity_learner = c.propensity_learner.clone().with_seed(learner_seed);
                opts.truncation = c.truncation;
            }
        }
        opts
    }
}

/// One method's result in one replication.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodRecord {
    pub method: String,
    pub estimates: Vec<f64>,
    pub intervals: Option<Vec<Interval>>,
    pub lambda: f64,
    /// `max_d |ψ̃_d - ψ̂_d|`.
    pub max_shift: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RepOutcome {
    Completed(Vec<MethodRecord>),
    Skipped(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepRecord {
    pub rep: u64,
    pub outcome: RepOutcome,
}

/// Aggregates for one method; error columns are multiplied by 100.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodSummary {
    pub method: String,
    pub mse_x100: f64,
    pub me_x100: f64,
    pub var_x100: f64,
    /// Fraction of intervals covering the truth; `None` for benchmarks.
    pub coverage95: Option<f64>,
    pub mean_lambda: f64,
    pub mean_max_shift: f64,
    pub reps_completed: usize,
    pub metrics: Metrics,
}

#[derive(Debug, Clone)]
pub struct SimulationReport {
    pub config: StudyConfig,
    pub methods: Vec<Method>,
    pub alpha: f64,
    pub truth: Vec<f64>,
    pub summaries: Vec<MethodSummary>,
    pub reps_completed: usize,
    pub skipped: Vec<(u64, String)>,
    pub wall_time_secs: f64,
    pub records: Vec<RepRecord>,
}

impl SimulationReport {
    pub fn summary(&self, method: &str) -> Option<&MethodSummary> {
        self.summaries.iter().find(|s| s.method == method)
    }
}

const BENCHMARKS: [(&str, LearnerKind); 2] = [
    ("lasso_regression", LearnerKind::Lasso),
    ("ridge_regression", LearnerKind::Ridge),
];

fn run_rep(cfg: &StudyConfig, methods: &[Method], alpha: f64, rep: u64) -> Result<(Vec<MethodRecord>, Vec<f64>)> {
    let opts = cfg.options(rep);
    let (data, truth, est) = match cfg {
        StudyConfig::Sim1(c) => {
            let (data, truth) = dgp_sim1(c, rep)?;
            let est = onestep_linear_assoc(&data, &opts)?.estimate;
            (data, truth, est)
        }
        StudyConfig::Sim2(c) => {
            let (data, truth) = dgp_sim2(c, rep)?;
            let est = onestep_group_ate(&data, &opts)?.estimate;
            (data, truth, est)
        }
    };
    let mut out = Vec::with_capacity(methods.len() + 2);
    for &m in methods {
        let pe = penalize(&est, m, alpha)?;
        let max_shift = pe
            .psi_tilde
            .iter()
            .zip(&est.psi)
            .fold(0.0_f64, |acc, (a, b)| acc.max((a - b).abs()));
        out.push(MethodRecord {
            method: m.as_str().to_string(),
            estimates: pe.psi_tilde,
            intervals: Some(pe.ci_shrunk),
            lambda: pe.lambda,
            max_shift,
        });
    }
    if let StudyConfig::Sim1(c) = cfg {
        if c.benchmarks {
            let x = data.covariates();
            for (name, kind) in BENCHMARKS {
                let fit = LearnerConfig::new(kind)
                    .with_seed(opts.outcome_learner.seed)
                    .fit(&x, data.outcome())?;
                out.push(MethodRecord {
                    method: name.to_string(),
                    estimates: fit.coefficients,
                    intervals: None,
                    lambda: fit.lambda.unwrap_or(0.0),
                    max_shift: 0.0,
                });
            }
        }
    }
    Ok((out, truth))
}

/// Runs every replication of one scenario and aggregates the results.
///
/// Replications whose estimator fails are skipped and counted; more than 5%
/// skipped is a study failure.
pub fn run_study(cfg: &StudyConfig, methods: &[Method], alpha: f64, parallelism: usize) -> Result<SimulationReport> {
    cfg.validate()?;
    crate::penalty::check_alpha(alpha)?;
    if methods.is_empty() {
        return Err(Error::Config("no methods requested".into()));
    }
    let start = Instant::now();
    let reps = cfg.reps();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let results: Vec<(u64, Result<(Vec<MethodRecord>, Vec<f64>)>)> = pool.install(|| {
        (0..reps as u64)
            .into_par_iter()
            .map(|rep| (rep, run_rep(cfg, methods, alpha, rep)))
            .collect()
    });

    let truth = match cfg {
        StudyConfig::Sim1(c) => sim1_coefficients(c),
        StudyConfig::Sim2(c) => sim2_parameters(c).1,
    };
    let mut records = Vec::with_capacity(reps);
    let mut skipped = Vec::new();
    for (rep, r) in results {
        match r {
            Ok((recs, _)) => records.push(RepRecord {
                rep,
                outcome: RepOutcome::Completed(recs),
            }),
            Err(e) => {
                log::warn!("replication {rep} skipped: {e}");
                skipped.push((rep, e.to_string()));
                records.push(RepRecord {
                    rep,
                    outcome: RepOutcome::Skipped(e.to_string()),
                });
            }
        }
    }
    if skipped.len() as f64 > MAX_SKIP_FRACTION * reps as f64 {
        return Err(Error::StudyFailed {
            skipped: skipped.len(),
            reps,
        });
    }
    let completed: Vec<&Vec<MethodRecord>> = records
        .iter()
        .filter_map(|r| match &r.outcome {
            RepOutcome::Completed(m) => Some(m),
            RepOutcome::Skipped(_) => None,
        })
        .collect();
    let names: Vec<String> = completed
        .first()
        .map(|m| m.iter().map(|r| r.method.clone()).collect())
        .unwrap_or_default();
    let summaries = names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let est: Vec<Vec<f64>> = completed.iter().map(|m| m[j].estimates.clone()).collect();
            let cis: Option<Vec<Vec<Interval>>> = completed.iter().map(|m| m[j].intervals.clone()).collect();
            let m = metrics(&est, cis.as_deref(), &truth);
            let lambdas: Vec<f64> = completed.iter().map(|m| m[j].lambda).collect();
            let shifts: Vec<f64> = completed.iter().map(|m| m[j].max_shift).collect();
            let k = completed.len() as f64;
            MethodSummary {
                method: name.clone(),
                mse_x100: 100.0 * m.mse,
                me_x100: 100.0 * m.me,
                var_x100: 100.0 * m.var,
                coverage95: m.coverage,
                mean_lambda: pairwise_sum(&lambdas) / k,
                mean_max_shift: pairwise_sum(&shifts) / k,
                reps_completed: completed.len(),
                metrics: m,
            }
        })
        .collect();
    Ok(SimulationReport {
        config: cfg.clone(),
        methods: methods.to_vec(),
        alpha,
        truth,
        summaries,
        reps_completed: completed.len(),
        skipped,
        wall_time_secs: start.elapsed().as_secs_f64(),
        records,
    })
}
