use std::collections::BTreeMap;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::learners::{LearnerConfig, LearnerKind};
use crate::penalty::Method;
use crate::sim::{Sim1Config, Sim2Config, Study, StudyConfig};

/// A parsed simulation config: one study config per scenario of the
/// `n × noise_sd × theta` grid, plus run-level settings.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationPlan {
    pub study: Study,
    pub scenarios: Vec<StudyConfig>,
    pub methods: Vec<Method>,
    pub alpha: f64,
    pub parallelism: Option<usize>,
    /// Keys and values as written, for the manifest.
    pub echo: BTreeMap<String, String>,
}

const KEYS: [&str; 21] = [
    "study",
    "n",
    "reps",
    "seed",
    "noise_sd",
    "theta",
    "k",
    "folds",
    "methods",
    "alpha",
    "parallelism",
    "n_covariates",
    "n_groups",
    "learner",
    "outcome_learner",
    "propensity_learner",
    "squared_terms",
    "truncation",
    "cv_folds",
    "n_lambda",
    "benchmarks",
];

fn config_err(key: &str, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("{key}: {msg}"))
}

fn scalar<T: FromStr>(map: &BTreeMap<String, String>, key: &str) -> Result<Option<T>>
where
    T::Err: std::fmt::Display,
{
    map.get(key)
        .map(|v| v.parse::<T>().map_err(|e| config_err(key, format!("'{v}': {e}"))))
        .transpose()
}

fn list<T: FromStr>(map: &BTreeMap<String, String>, key: &str) -> Result<Option<Vec<T>>>
where
    T::Err: std::fmt::Display,
{
    map.get(key)
        .map(|v| {
            v.split(',')
                .map(|s| s.trim())
                .filter(|s| !s.is_empty())
                .map(|s| s.parse::<T>().map_err(|e| config_err(key, format!("'{s}': {e}"))))
                .collect::<Result<Vec<T>>>()
        })
        .transpose()
}

fn learner(map: &BTreeMap<String, String>, key: &str, default: LearnerConfig) -> Result<LearnerConfig> {
    let mut cfg = match map.get(key) {
        Some(v) => {
            let mut c = LearnerConfig::new(LearnerKind::from_str(v).map_err(|e| config_err(key, e))?);
            c.squared_terms = default.squared_terms;
            c
        }
        None => default,
    };
    if let Some(k) = scalar(map, "cv_folds")? {
        cfg.cv_folds = k;
    }
    if let Some(n) = scalar(map, "n_lambda")? {
        cfg.n_lambda = n;
    }
    Ok(cfg)
}

/// Parses a flat `key = value` config. Lines starting with `#` are comments;
/// `n`, `noise_sd` and `theta` accept comma-separated lists.
pub fn parse_sim_config(text: &str) -> Result<SimulationPlan> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
            line: i + 1,
            message: format!("expected key = value, got '{line}'"),
        })?;
        let key = key.trim().to_ascii_lowercase();
        if !KEYS.contains(&key.as_str()) {
            return Err(Error::Parse {
                line: i + 1,
                message: format!("unknown key '{key}'"),
            });
        }
        if map.insert(key.clone(), value.trim().to_string()).is_some() {
            return Err(Error::Parse {
                line: i + 1,
                message: format!("duplicate key '{key}'"),
            });
        }
    }
    let study: Study = map
        .get("study")
        .ok_or_else(|| Error::Config("missing required key 'study'".into()))?
        .parse()?;
    let ns: Vec<usize> = list(&map, "n")?.ok_or_else(|| Error::Config("missing required key 'n'".into()))?;
    let sds: Vec<f64> =
        list(&map, "noise_sd")?.ok_or_else(|| Error::Config("missing required key 'noise_sd'".into()))?;
    let thetas: Vec<f64> = list(&map, "theta")?.unwrap_or_else(|| vec![0.3]);
    if ns.is_empty() || sds.is_empty() || thetas.is_empty() {
        return Err(Error::Config("n, noise_sd and theta must not be empty".into()));
    }
    let reps: usize = scalar(&map, "reps")?.unwrap_or(100);
    let seed: u64 = scalar(&map, "seed")?.unwrap_or(0);
    let folds: Option<usize> = match (scalar(&map, "k")?, scalar(&map, "folds")?) {
        (Some(_), Some(_)) => return Err(Error::Config("give only one of K and folds".into())),
        (a, b) => a.or(b),
    };
    let methods: Vec<Method> = list(&map, "methods")?.unwrap_or_else(|| Method::ALL.to_vec());
    if methods.is_empty() {
        return Err(Error::Config("methods: no methods listed".into()));
    }
    let alpha: f64 = scalar(&map, "alpha")?.unwrap_or(0.05);
    let parallelism: Option<usize> = scalar(&map, "parallelism")?;
    let squares: Option<bool> = scalar(&map, "squared_terms")?;

    let mut scenarios = Vec::new();
    for &n in &ns {
        for &sd in &sds {
            for &theta in &thetas {
                let cfg = match study {
                    Study::Sim1 => {
                        let mut c = Sim1Config::new(n, sd, reps, seed);
                        c.sparsity_theta = theta;
                        if let Some(p) = scalar(&map, "n_covariates")? {
                            c.n_covariates = p;
                        }
                        if let Some(k) = folds {
                            c.folds = k;
                        }
                        let mut default = c.learner.clone();
                        if let Some(s) = squares {
                            default.squared_terms = s;
                        }
                        c.learner = learner(&map, "learner", default)?;
                        c.benchmarks = scalar(&map, "benchmarks")?.unwrap_or(false);
                        StudyConfig::Sim1(c)
                    }
                    Study::Sim2 => {
                        let mut c = Sim2Config::new(n, theta, sd, reps, seed);
                        if let Some(g) = scalar(&map, "n_groups")? {
                            c.n_groups = g;
                        }
                        if let Some(k) = folds {
                            c.folds = k;
                        }
                        let mut default = c.outcome_learner.clone();
                        if let Some(s) = squares {
                            default.squared_terms = s;
                        }
                        c.outcome_learner = learner(&map, "outcome_learner", default)?;
                        c.propensity_learner = learner(&map, "propensity_learner", c.propensity_learner.clone())?;
                        if let Some(t) = scalar(&map, "truncation")? {
                            c.truncation = t;
                        }
                        StudyConfig::Sim2(c)
                    }
                };
                cfg.validate()?;
                scenarios.push(cfg);
            }
        }
    }
    for key in ["n_covariates", "benchmarks", "learner"] {
        if study == Study::Sim2 && map.contains_key(key) {
            return Err(Error::Config(format!("{key} applies to sim1 only")));
        }
    }
    for key in ["n_groups", "outcome_learner", "propensity_learner", "truncation"] {
        if study == Study::Sim1 && map.contains_key(key) {
            return Err(Error::Config(format!("{key} applies to sim2 only")));
        }
    }
    crate::penalty::check_alpha(alpha).map_err(|e| config_err("alpha", e))?;
    if parallelism == Some(0) {
        return Err(config_err("parallelism", "must be at least 1"));
    }
    Ok(SimulationPlan {
        study,
        scenarios,
        methods,
        alpha,
        parallelism,
        echo: map,
    })
}
