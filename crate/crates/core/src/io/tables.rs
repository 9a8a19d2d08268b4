use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::estimators::{Dataset, Roles};
use crate::penalty::{EstimateSet, PenalizedEstimate};
use crate::sim::{RepOutcome, SimulationReport};

/// Shortest decimal that parses back to the same `f64`.
pub fn format_f64(x: f64) -> String {
    let a = x.abs();
    if x != 0.0 && x.is_finite() && !(1e-5..1e16).contains(&a) {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

/// One row of the `label,psi,se` interchange format.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateRow {
    pub label: String,
    pub psi: f64,
    pub se: f64,
    pub group_size: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateTable {
    pub rows: Vec<EstimateRow>,
}

impl EstimateTable {
    pub fn labels(&self) -> Vec<String> {
        self.rows.iter().map(|r| r.label.clone()).collect()
    }

    /// Estimate set with `eif_var = se² n`.
    pub fn to_estimate_set(&self, n: usize) -> Result<EstimateSet> {
        let psi = self.rows.iter().map(|r| r.psi).collect();
        let se: Vec<f64> = self.rows.iter().map(|r| r.se).collect();
        EstimateSet::from_standard_errors(psi, &se, n)?.with_labels(self.labels())
    }

    pub fn from_estimate_set(est: &EstimateSet) -> Self {
        EstimateTable {
            rows: (0..est.dim())
                .map(|d| EstimateRow {
                    label: est.label(d),
                    psi: est.psi[d],
                    se: est.se(d),
                    group_size: None,
                })
                .collect(),
        }
    }
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    parse_err(line, e.to_string())
}

fn parse_number(field: &str, column: &str, line: usize) -> Result<f64> {
    let t = field.trim();
    if t.is_empty() {
        return Err(parse_err(line, format!("missing value in column '{column}'")));
    }
    t.parse::<f64>()
        .map_err(|_| parse_err(line, format!("column '{column}': '{t}' is not a number")))
}

fn header_index(headers: &csv::StringRecord, name: &str) -> Option<usize> {
    headers.iter().position(|h| h.trim() == name)
}

/// Reads `label,psi,se[,group_size]`.
pub fn read_estimates<R: Read>(reader: R) -> Result<EstimateTable> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers().map_err(csv_err)?.clone();
    let col = |name: &str| {
        header_index(&headers, name)
            .ok_or_else(|| parse_err(1, format!("header must contain '{name}' (expected label,psi,se)")))
    };
    let (il, ip, is) = (col("label")?, col("psi")?, col("se")?);
    let ig = header_index(&headers, "group_size");
    let mut rows: Vec<EstimateRow> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let label = rec.get(il).unwrap_or("").trim().to_string();
        if label.is_empty() {
            return Err(parse_err(line, "empty label"));
        }
        if rows.iter().any(|r| r.label == label) {
            return Err(parse_err(line, format!("duplicate label '{label}'")));
        }
        let psi = parse_number(rec.get(ip).unwrap_or(""), "psi", line)?;
        let se = parse_number(rec.get(is).unwrap_or(""), "se", line)?;
        if !psi.is_finite() {
            return Err(parse_err(line, "psi must be finite"));
        }
        if !(se >= 0.0 && se.is_finite()) {
            return Err(parse_err(line, format!("se must be finite and non-negative, got {se}")));
        }
        let group_size = match ig.and_then(|i| rec.get(i)) {
            Some(s) if !s.trim().is_empty() => Some(
                s.trim()
                    .parse::<usize>()
                    .map_err(|_| parse_err(line, format!("group_size '{s}' is not a count")))?,
            ),
            _ => None,
        };
        rows.push(EstimateRow {
            label,
            psi,
            se,
            group_size,
        });
    }
    if rows.is_empty() {
        return Err(parse_err(1, "no estimate rows"));
    }
    Ok(EstimateTable { rows })
}

/// Writes `label,psi,se[,group_size]`.
pub fn write_estimates<W: Write>(writer: W, table: &EstimateTable) -> Result<()> {
    let with_size = table.rows.iter().any(|r| r.group_size.is_some());
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["label", "psi", "se"];
    if with_size {
        header.push("group_size");
    }
    w.write_record(&header)?;
    for r in &table.rows {
        let mut rec = vec![r.label.clone(), format_f64(r.psi), format_f64(r.se)];
        if with_size {
            rec.push(r.group_size.map(|g| g.to_string()).unwrap_or_default());
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub const PENALIZED_HEADER: [&str; 9] = [
    "label",
    "psi",
    "psi_tilde",
    "lambda",
    "shrink_factor",
    "ci_basic_lo",
    "ci_basic_hi",
    "ci_shrunk_lo",
    "ci_shrunk_hi",
];

fn penalized_fields(pe: &PenalizedEstimate, d: usize) -> Vec<String> {
    vec![
        format_f64(pe.psi_tilde[d]),
        format_f64(pe.lambda),
        format_f64(pe.shrink_factor[d]),
        format_f64(pe.ci_basic[d].lower),
        format_f64(pe.ci_basic[d].upper),
        format_f64(pe.ci_shrunk[d].lower),
        format_f64(pe.ci_shrunk[d].upper),
    ]
}

/// Writes the penalized table of the `penalize` command.
pub fn write_penalized<W: Write>(writer: W, labels: &[String], pe: &PenalizedEstimate) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(PENALIZED_HEADER)?;
    for (d, label) in labels.iter().enumerate() {
        let mut rec = vec![label.clone(), format_f64(pe.psi[d])];
        rec.extend(penalized_fields(pe, d));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Optional column groups appended to an estimate table by `estimate`.
#[derive(Debug, Clone, Default)]
pub struct ExtraColumns<'a> {
    pub penalized: Option<&'a PenalizedEstimate>,
    /// `(observed means, srr, srr standard errors)`.
    pub srr: Option<(&'a [f64], &'a [f64], &'a [f64])>,
}

/// Writes `label,psi,se[,group_size]` followed by any extra column groups.
pub fn write_estimate_report<W: Write>(writer: W, table: &EstimateTable, extra: &ExtraColumns) -> Result<()> {
    let with_size = table.rows.iter().any(|r| r.group_size.is_some());
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = vec!["label", "psi", "se"];
    if with_size {
        header.push("group_size");
    }
    if extra.penalized.is_some() {
        header.extend(&PENALIZED_HEADER[2..]);
    }
    if extra.srr.is_some() {
        header.extend(["observed_mean", "srr", "srr_se"]);
        if extra.penalized.is_some() {
            header.push("srr_tilde");
        }
    }
    w.write_record(&header)?;
    for (d, r) in table.rows.iter().enumerate() {
        let mut rec = vec![r.label.clone(), format_f64(r.psi), format_f64(r.se)];
        if with_size {
            rec.push(r.group_size.map(|g| g.to_string()).unwrap_or_default());
        }
        if let Some(pe) = extra.penalized {
            rec.extend(penalized_fields(pe, d));
        }
        if let Some((obs, srr, srr_se)) = extra.srr {
            rec.extend([format_f64(obs[d]), format_f64(srr[d]), format_f64(srr_se[d])]);
            if let Some(pe) = extra.penalized {
                rec.push(format_f64(pe.psi_tilde[d] / obs[d] - 1.0));
            }
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a numeric data file, keeping only the columns named in `roles`.
pub fn read_dataset<R: Read>(reader: R, roles: &Roles) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers().map_err(csv_err)?.clone();
    let mut wanted: Vec<(&str, &str)> = vec![("outcome", roles.outcome.as_str())];
    if let Some(t) = &roles.treatment {
        wanted.push(("treatment", t));
    }
    if let Some(g) = &roles.group {
        wanted.push(("group", g));
    }
    for c in &roles.covariates {
        wanted.push(("covariate", c));
    }
    let mut names: Vec<String> = Vec::new();
    let mut index = Vec::new();
    for (role, name) in &wanted {
        let i = header_index(&headers, name).ok_or_else(|| {
            parse_err(1, format!("{role} column '{name}' not found in header"))
        })?;
        if !names.iter().any(|n| n == name) {
            names.push(name.to_string());
            index.push(i);
        }
    }
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); names.len()];
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        for ((col, &i), name) in columns.iter_mut().zip(&index).zip(&names) {
            col.push(parse_number(rec.get(i).unwrap_or(""), name, line)?);
        }
    }
    if columns[0].is_empty() {
        return Err(parse_err(2, "data file has no rows"));
    }
    Dataset::new(names, columns, roles.clone())
}

fn scenario_fields(report: &SimulationReport) -> Vec<String> {
    let c = &report.config;
    vec![
        c.study().to_string(),
        c.n().to_string(),
        format_f64(c.noise_sd()),
        format_f64(c.theta()),
    ]
}

/// One row per scenario × method.
pub fn write_report<W: Write>(writer: W, reports: &[SimulationReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "study",
        "n",
        "noise_sd",
        "theta",
        "method",
        "mse_x100",
        "me_x100",
        "var_x100",
        "coverage95",
        "reps_completed",
        "mean_lambda",
        "mean_max_shift",
    ])?;
    for r in reports {
        for s in &r.summaries {
            let mut rec = scenario_fields(r);
            rec.extend([
                s.method.clone(),
                format_f64(s.mse_x100),
                format_f64(s.me_x100),
                format_f64(s.var_x100),
                s.coverage95.map(format_f64).unwrap_or_default(),
                s.reps_completed.to_string(),
                format_f64(s.mean_lambda),
                format_f64(s.mean_max_shift),
            ]);
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Per-replication, per-coordinate records (skipped replications get one
/// row carrying the error).
pub fn write_raw_records<W: Write>(writer: W, reports: &[SimulationReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "study", "n", "noise_sd", "theta", "rep", "method", "coordinate", "estimate", "truth", "ci_lo",
        "ci_hi", "lambda", "status",
    ])?;
    for r in reports {
        for rec in &r.records {
            match &rec.outcome {
                RepOutcome::Skipped(msg) => {
                    let mut row = scenario_fields(r);
                    row.extend([rec.rep.to_string()]);
                    row.extend(std::iter::repeat_n(String::new(), 7));
                    row.push(format!("skipped: {msg}"));
                    w.write_record(&row)?;
                }
                RepOutcome::Completed(methods) => {
                    for m in methods {
                        for (d, est) in m.estimates.iter().enumerate() {
                            let (lo, hi) = match &m.intervals {
                                Some(ci) => (format_f64(ci[d].lower), format_f64(ci[d].upper)),
                                None => (String::new(), String::new()),
                            };
                            let mut row = scenario_fields(r);
                            row.extend([
                                rec.rep.to_string(),
                                m.method.clone(),
                                (d + 1).to_string(),
                                format_f64(*est),
                                format_f64(r.truth[d]),
                                lo,
                                hi,
                                format_f64(m.lambda),
                                "ok".to_string(),
                            ]);
                            w.write_record(&row)?;
                        }
                    }
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}
