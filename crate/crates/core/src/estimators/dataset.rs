use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which columns play which part in an estimand.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Roles {
    pub outcome: String,
    pub treatment: Option<String>,
    pub group: Option<String>,
    pub covariates: Vec<String>,
}

/// Named numeric columns with role annotations.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
    roles: Roles,
    n_rows: usize,
}

impl Dataset {
    /// Validates that every role column exists, all columns share a length
    /// and role columns hold finite values.
    pub fn new(names: Vec<String>, columns: Vec<Vec<f64>>, roles: Roles) -> Result<Self> {
        if names.len() != columns.len() {
            return Err(Error::invalid(format!(
                "{} names for {} columns",
                names.len(),
                columns.len()
            )));
        }
        let n_rows = columns.first().map_or(0, Vec::len);
        if n_rows == 0 {
            return Err(Error::InsufficientData("dataset has no rows".to_string()));
        }
        for (name, col) in names.iter().zip(&columns) {
            if col.len() != n_rows {
                return Err(Error::invalid(format!(
                    "column '{name}' has {} rows, expected {n_rows}",
                    col.len()
                )));
            }
        }
        for (i, a) in names.iter().enumerate() {
            if names[..i].contains(a) {
                return Err(Error::invalid(format!("duplicate column '{a}'")));
            }
        }
        let ds = Dataset {
            names,
            columns,
            roles,
            n_rows,
        };
        let mut role_cols = vec![("outcome", ds.roles.outcome.as_str())];
        if let Some(t) = &ds.roles.treatment {
            role_cols.push(("treatment", t));
        }
        if let Some(g) = &ds.roles.group {
            role_cols.push(("group", g));
        }
        for c in &ds.roles.covariates {
            role_cols.push(("covariate", c));
        }
        for (role, name) in role_cols {
            let col = ds.column(name).map_err(|_| {
                Error::invalid(format!("{role} column '{name}' not found in data"))
            })?;
            if let Some(i) = col.iter().position(|v| !v.is_finite()) {
                return Err(Error::invalid(format!(
                    "{role} column '{name}' has a non-finite value at row {}",
                    i + 1
                )));
            }
        }
        Ok(ds)
    }

    /// Builds a dataset from a covariate matrix and role vectors using the
    /// column names `y`, `a`, `g`, `x1..xp`.
    pub fn from_parts(
        x: &DMatrix<f64>,
        y: Vec<f64>,
        treatment: Option<Vec<f64>>,
        group: Option<Vec<f64>>,
    ) -> Result<Self> {
        let mut names = vec!["y".to_string()];
        let mut columns = vec![y];
        let mut roles = Roles {
            outcome: "y".to_string(),
            ..Roles::default()
        };
        if let Some(a) = treatment {
            names.push("a".to_string());
            columns.push(a);
            roles.treatment = Some("a".to_string());
        }
        if let Some(g) = group {
            names.push("g".to_string());
            columns.push(g);
            roles.group = Some("g".to_string());
        }
        for j in 0..x.ncols() {
            let name = format!("x{}", j + 1);
            names.push(name.clone());
            columns.push(x.column(j).iter().copied().collect());
            roles.covariates.push(name);
        }
        Dataset::new(names, columns, roles)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn roles(&self) -> &Roles {
        &self.roles
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn column(&self, name: &str) -> Result<&[f64]> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.columns[i].as_slice())
            .ok_or_else(|| Error::invalid(format!("column '{name}' not found")))
    }

    pub fn outcome(&self) -> &[f64] {
        self.column(&self.roles.outcome).expect("validated")
    }

    /// Covariates as an `n × p` matrix in role order.
    pub fn covariates(&self) -> DMatrix<f64> {
        let cols: Vec<&[f64]> = self
            .roles
            .covariates
            .iter()
            .map(|c| self.column(c).expect("validated"))
            .collect();
        DMatrix::from_fn(self.n_rows, cols.len(), |i, j| cols[j][i])
    }

    /// Treatment column checked to be binary.
    pub fn binary_treatment(&self) -> Result<&[f64]> {
        let name = self
            .roles
            .treatment
            .as_deref()
            .ok_or_else(|| Error::invalid("a treatment column is required"))?;
        let a = self.column(name)?;
        if let Some(i) = a.iter().position(|v| *v != 0.0 && *v != 1.0) {
            return Err(Error::invalid(format!(
                "treatment column '{name}' must be 0/1, found {} at row {}",
                a[i],
                i + 1
            )));
        }
        Ok(a)
    }

    /// Group column as labels `1..=D`, together with `D`.
    pub fn groups(&self) -> Result<(Vec<usize>, usize)> {
        let name = self
            .roles
            .group
            .as_deref()
            .ok_or_else(|| Error::invalid("a group column is required"))?;
        categorical(name, self.column(name)?)
    }

    /// Treatment column read as categorical labels `1..=D`.
    pub fn categorical_treatment(&self) -> Result<(Vec<usize>, usize)> {
        let name = self
            .roles
            .treatment
            .as_deref()
            .ok_or_else(|| Error::invalid("a treatment column is required"))?;
        categorical(name, self.column(name)?)
    }
}

fn categorical(name: &str, col: &[f64]) -> Result<(Vec<usize>, usize)> {
    let mut out = Vec::with_capacity(col.len());
    for (i, v) in col.iter().enumerate() {
        if v.fract() != 0.0 || *v < 1.0 || *v > u32::MAX as f64 {
            return Err(Error::invalid(format!(
                "column '{name}' must hold integer labels 1..D, found {v} at row {}",
                i + 1
            )));
        }
        out.push(*v as usize);
    }
    let d = out.iter().copied().max().unwrap_or(0);
    Ok((out, d))
}
