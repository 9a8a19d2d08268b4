//! Replication-level error metrics.

use crate::penalty::Interval;

/// Aggregates for one method over replications and coordinates, in raw
/// (unscaled) units.
#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    pub mse: f64,
    pub me: f64,
    /// `mse - mean_d(bias_d²)`.
    pub var: f64,
    pub coverage: Option<f64>,
    pub per_coordinate: Vec<CoordinateMetrics>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoordinateMetrics {
    pub bias: f64,
    pub mse: f64,
    pub var: f64,
}

/// Pairwise summation, for accuracy and a fixed evaluation order.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 8 {
        return v.iter().sum();
    }
    let mid = v.len() / 2;
    pairwise_sum(&v[..mid]) + pairwise_sum(&v[mid..])
}

fn mean(v: &[f64]) -> f64 {
    pairwise_sum(v) / v.len() as f64
}

/// Error metrics from per-replication estimates (`reps × D`), optional
/// intervals and the truth. Per coordinate: bias, MSE and `Var = MSE - bias²`
/// across replications; the reported values average over coordinates.
pub fn metrics(estimates: &[Vec<f64>], cis: Option<&[Vec<Interval>]>, truth: &[f64]) -> Metrics {
    let d = truth.len();
    let per_coordinate: Vec<CoordinateMetrics> = (0..d)
        .map(|j| {
            let errs: Vec<f64> = estimates.iter().map(|e| e[j] - truth[j]).collect();
            let sq: Vec<f64> = errs.iter().map(|e| e * e).collect();
            let bias = mean(&errs);
            let mse = mean(&sq);
            CoordinateMetrics {
                bias,
                mse,
                var: mse - bias * bias,
            }
        })
        .collect();
    let coverage = cis.map(|cis| {
        let hits: Vec<f64> = cis
            .iter()
            .flat_map(|rep| rep.iter().zip(truth).map(|(ci, t)| f64::from(ci.contains(*t))))
            .collect();
        mean(&hits)
    });
    let col = |f: fn(&CoordinateMetrics) -> f64| mean(&per_coordinate.iter().map(f).collect::<Vec<_>>());
    Metrics {
        mse: col(|c| c.mse),
        me: col(|c| c.bias),
        var: col(|c| c.var),
        coverage,
        per_coordinate,
    }
}
