//! Python bindings: estimate sets, penalization, one-step estimators and
//! simulation studies.

use std::collections::HashMap;

use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use shrinkfit::estimators::{onestep_group_ate, onestep_indirect_std, onestep_linear_assoc, srr as srr_core, Roles};
use shrinkfit::learners::{LearnerConfig, LearnerKind};
use shrinkfit::penalty::{self, Method, SearchConfig};
use shrinkfit::sim::{run_study, Sim1Config, Sim2Config, Study, StudyConfig};
use shrinkfit::{Dataset, OneStepOptions};

create_exception!(shrinkfit_py, ShrinkfitError, PyValueError);

fn err(e: shrinkfit::Error) -> PyErr {
    ShrinkfitError::new_err(e.to_string())
}

/// Point estimates with influence-function variances and sample size.
#[pyclass(name = "EstimateSet", module = "shrinkfit_py", skip_from_py_object)]
#[derive(Clone)]
struct PyEstimateSet {
    inner: penalty::EstimateSet,
}

#[pymethods]
impl PyEstimateSet {
    #[new]
    #[pyo3(signature = (psi, eif_var, n, labels=None))]
    fn new(psi: Vec<f64>, eif_var: Vec<f64>, n: usize, labels: Option<Vec<String>>) -> PyResult<Self> {
        let mut inner = penalty::EstimateSet::new(psi, eif_var, n).map_err(err)?;
        if let Some(l) = labels {
            inner = inner.with_labels(l).map_err(err)?;
        }
        Ok(PyEstimateSet { inner })
    }

    /// Builds a set from standard errors, `eif_var = se² n`.
    #[staticmethod]
    #[pyo3(signature = (psi, se, n, labels=None))]
    fn from_standard_errors(psi: Vec<f64>, se: Vec<f64>, n: usize, labels: Option<Vec<String>>) -> PyResult<Self> {
        let mut inner = penalty::EstimateSet::from_standard_errors(psi, &se, n).map_err(err)?;
        if let Some(l) = labels {
            inner = inner.with_labels(l).map_err(err)?;
        }
        Ok(PyEstimateSet { inner })
    }

    #[getter]
    fn psi(&self) -> Vec<f64> {
        self.inner.psi.clone()
    }

    #[getter]
    fn eif_var(&self) -> Vec<f64> {
        self.inner.eif_var.clone()
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n
    }

    #[getter]
    fn labels(&self) -> Vec<String> {
        (0..self.inner.dim()).map(|d| self.inner.label(d)).collect()
    }

    fn standard_errors(&self) -> Vec<f64> {
        self.inner.standard_errors()
    }

    fn __len__(&self) -> usize {
        self.inner.dim()
    }

    fn __repr__(&self) -> String {
        format!("EstimateSet(dim={}, n={})", self.inner.dim(), self.inner.n)
    }
}

/// Result of applying a penalty to an estimate set.
#[pyclass(name = "PenalizedEstimate", module = "shrinkfit_py", frozen)]
struct PyPenalized {
    inner: penalty::PenalizedEstimate,
}

fn bounds(ci: &[penalty::Interval]) -> Vec<(f64, f64)> {
    ci.iter().map(|i| (i.lower, i.upper)).collect()
}

#[pymethods]
impl PyPenalized {
    #[getter]
    fn method(&self) -> &'static str {
        self.inner.method.as_str()
    }

    #[getter]
    fn psi(&self) -> Vec<f64> {
        self.inner.psi.clone()
    }

    #[getter]
    fn psi_tilde(&self) -> Vec<f64> {
        self.inner.psi_tilde.clone()
    }

    #[getter]
    fn lambda_(&self) -> f64 {
        self.inner.lambda
    }

    #[getter]
    fn shrink_factor(&self) -> Vec<f64> {
        self.inner.shrink_factor.clone()
    }

    #[getter]
    fn ci_basic(&self) -> Vec<(f64, f64)> {
        bounds(&self.inner.ci_basic)
    }

    #[getter]
    fn ci_shrunk(&self) -> Vec<(f64, f64)> {
        bounds(&self.inner.ci_shrunk)
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.inner.alpha
    }

    fn __repr__(&self) -> String {
        format!(
            "PenalizedEstimate(method={}, lambda={})",
            self.inner.method, self.inner.lambda
        )
    }
}

fn method(name: &str) -> PyResult<Method> {
    name.parse().map_err(err)
}

/// Chooses the tuning parameter and applies `method` (none, l1, l2 or eb).
#[pyfunction]
#[pyo3(signature = (est, method="none", alpha=0.05))]
fn penalize(est: PyRef<'_, PyEstimateSet>, method: &str, alpha: f64) -> PyResult<PyPenalized> {
    let m = self::method(method)?;
    let inner = penalty::penalize(&est.inner, m, alpha).map_err(err)?;
    Ok(PyPenalized { inner })
}

/// Mean and variance of the soft-thresholded normal `S_λ(Z)`, `Z ~ N(mu, var)`.
#[pyfunction]
fn st_normal_moments(mu: f64, var: f64, lambda_: f64) -> PyResult<(f64, f64)> {
    penalty::st_normal_moments(mu, var, lambda_).map_err(err)
}

#[pyfunction]
fn soft_threshold(x: f64, lambda_: f64) -> PyResult<f64> {
    penalty::soft_threshold(x, lambda_).map_err(err)
}

#[pyfunction]
fn l1_crit(lambda_: f64, est: PyRef<'_, PyEstimateSet>) -> PyResult<f64> {
    penalty::l1_crit(lambda_, &est.inner).map_err(err)
}

#[pyfunction]
fn l2_crit(lambda_: f64, est: PyRef<'_, PyEstimateSet>) -> PyResult<f64> {
    penalty::l2_crit(lambda_, &est.inner).map_err(err)
}

#[pyfunction]
fn l1_lambda_star(est: PyRef<'_, PyEstimateSet>) -> PyResult<f64> {
    penalty::l1_lambda_star(&est.inner, &SearchConfig::default()).map_err(err)
}

#[pyfunction]
fn l2_lambda_star(est: PyRef<'_, PyEstimateSet>) -> PyResult<f64> {
    penalty::l2_lambda_star(&est.inner).map_err(err)
}

/// Centered standardized ratio `psi / observed_mean - 1`.
#[pyfunction]
fn srr(est: PyRef<'_, PyEstimateSet>, observed_mean: Vec<f64>) -> PyResult<PyEstimateSet> {
    Ok(PyEstimateSet {
        inner: srr_core(&est.inner, &observed_mean).map_err(err)?,
    })
}

fn learner(name: &str) -> PyResult<LearnerKind> {
    name.parse().map_err(err)
}

/// Cross-fitted one-step estimate from named columns.
///
/// `parameter` is one of `linear-assoc`, `group-ate` or `indirect-std`.
#[pyfunction]
#[pyo3(signature = (
    columns, parameter, outcome, covariates, treatment=None, group=None, folds=5, seed=0,
    outcome_learner="ols", propensity_learner="logistic", squared_terms=false, truncation=0.01, scaled=true
))]
#[allow(clippy::too_many_arguments)]
fn estimate(
    py: Python<'_>,
    columns: HashMap<String, Vec<f64>>,
    parameter: &str,
    outcome: String,
    covariates: Vec<String>,
    treatment: Option<String>,
    group: Option<String>,
    folds: usize,
    seed: u64,
    outcome_learner: &str,
    propensity_learner: &str,
    squared_terms: bool,
    truncation: f64,
    scaled: bool,
) -> PyResult<PyEstimateSet> {
    let mut names: Vec<String> = columns.keys().cloned().collect();
    names.sort();
    let values = names.iter().map(|n| columns[n].clone()).collect();
    let roles = Roles {
        outcome,
        treatment,
        group,
        covariates,
    };
    let data = Dataset::new(names, values, roles).map_err(err)?;
    let opts = OneStepOptions {
        folds,
        seed,
        outcome_learner: LearnerConfig::new(learner(outcome_learner)?)
            .with_squares(squared_terms)
            .with_seed(seed),
        propensity_learner: LearnerConfig::new(learner(propensity_learner)?).with_seed(seed),
        truncation,
        scaled,
    };
    let run = match parameter {
        "linear-assoc" => onestep_linear_assoc,
        "group-ate" => onestep_group_ate,
        "indirect-std" => onestep_indirect_std,
        other => {
            return Err(PyValueError::new_err(format!(
                "unknown parameter '{other}' (expected linear-assoc, group-ate or indirect-std)"
            )))
        }
    };
    let fit = py.detach(|| run(&data, &opts)).map_err(err)?;
    Ok(PyEstimateSet { inner: fit.estimate })
}

/// Runs one simulation scenario; returns one dict per method.
#[pyfunction]
#[pyo3(signature = (
    study, n, noise_sd, reps, seed=0, theta=0.3, methods=None, alpha=0.05, parallelism=1,
    n_covariates=None, n_groups=None
))]
#[allow(clippy::too_many_arguments)]
fn simulate(
    py: Python<'_>,
    study: &str,
    n: usize,
    noise_sd: f64,
    reps: usize,
    seed: u64,
    theta: f64,
    methods: Option<Vec<String>>,
    alpha: f64,
    parallelism: usize,
    n_covariates: Option<usize>,
    n_groups: Option<usize>,
) -> PyResult<Vec<HashMap<String, Py<PyAny>>>> {
    let cfg = match study.parse::<Study>().map_err(err)? {
        Study::Sim1 => {
            let mut c = Sim1Config::new(n, noise_sd, reps, seed);
            c.sparsity_theta = theta;
            if let Some(p) = n_covariates {
                c.n_covariates = p;
            }
            StudyConfig::Sim1(c)
        }
        Study::Sim2 => {
            let mut c = Sim2Config::new(n, theta, noise_sd, reps, seed);
            if let Some(g) = n_groups {
                c.n_groups = g;
            }
            StudyConfig::Sim2(c)
        }
    };
    let methods: Vec<Method> = match methods {
        Some(list) => list.iter().map(|m| method(m)).collect::<PyResult<_>>()?,
        None => Method::ALL.to_vec(),
    };
    let report = py
        .detach(|| run_study(&cfg, &methods, alpha, parallelism))
        .map_err(err)?;
    let mut out = Vec::with_capacity(report.summaries.len());
    for s in &report.summaries {
        let mut row: HashMap<String, Py<PyAny>> = HashMap::new();
        row.insert("method".into(), s.method.clone().into_pyobject(py)?.into_any().unbind());
        for (key, v) in [
            ("mse_x100", s.mse_x100),
            ("me_x100", s.me_x100),
            ("var_x100", s.var_x100),
            ("mean_lambda", s.mean_lambda),
            ("mean_max_shift", s.mean_max_shift),
        ] {
            row.insert(key.into(), v.into_pyobject(py)?.into_any().unbind());
        }
        row.insert("coverage95".into(), s.coverage95.into_pyobject(py)?.into_any().unbind());
        row.insert("reps_completed".into(), s.reps_completed.into_pyobject(py)?.into_any().unbind());
        out.push(row);
    }
    Ok(out)
}

#[pymodule]
fn shrinkfit_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("ShrinkfitError", m.py().get_type::<ShrinkfitError>())?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyEstimateSet>()?;
    m.add_class::<PyPenalized>()?;
    m.add_function(wrap_pyfunction!(penalize, m)?)?;
    m.add_function(wrap_pyfunction!(st_normal_moments, m)?)?;
    m.add_function(wrap_pyfunction!(soft_threshold, m)?)?;
    m.add_function(wrap_pyfunction!(l1_crit, m)?)?;
    m.add_function(wrap_pyfunction!(l2_crit, m)?)?;
    m.add_function(wrap_pyfunction!(l1_lambda_star, m)?)?;
    m.add_function(wrap_pyfunction!(l2_lambda_star, m)?)?;
    m.add_function(wrap_pyfunction!(srr, m)?)?;
    m.add_function(wrap_pyfunction!(estimate, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    Ok(())
}
