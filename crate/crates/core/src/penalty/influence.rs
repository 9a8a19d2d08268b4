//! Influence functions of penalized parameters.
//!
//! For a penalized parameter `argmin_y U(x, y)` evaluated at `x = psi`, the
//! implicit function theorem gives the influence function
//! `M⁻¹ [∇U̇(psi, psi~) D(O) + U̇(psi, psi~)]` with `M = -Ü(psi, psi~)`, where
//! `U̇`/`Ü` are the gradient/Hessian in the second argument and `∇U̇` is the
//! derivative of the gradient with respect to the first argument.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

use super::EstimateSet;

/// Derivatives of a penalized objective `U(x, y)`.
pub trait PenaltyObjective {
    /// `∂U/∂y` at `(x, y)`.
    fn gradient(&self, x: &DVector<f64>, y: &DVector<f64>) -> DVector<f64>;
    /// `∂²U/∂y²` at `(x, y)`.
    fn hessian(&self, x: &DVector<f64>, y: &DVector<f64>) -> DMatrix<f64>;
    /// `∂²U/∂x∂y`: derivative of the gradient with respect to `x`.
    fn cross_derivative(&self, x: &DVector<f64>, y: &DVector<f64>) -> DMatrix<f64>;
}

/// `U(x, y) = |x - y|² + λ |y|²`.
#[derive(Debug, Clone, Copy)]
pub struct SquaredErrorL2 {
    pub lambda: f64,
}

impl SquaredErrorL2 {
    pub fn solution(&self, x: &[f64]) -> Vec<f64> {
        x.iter().map(|v| v / (1.0 + self.lambda)).collect()
    }
}

impl PenaltyObjective for SquaredErrorL2 {
    fn gradient(&self, x: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
        (y - x) * 2.0 + y * (2.0 * self.lambda)
    }

    fn hessian(&self, x: &DVector<f64>, _y: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::identity(x.len(), x.len()) * (2.0 * (1.0 + self.lambda))
    }

    fn cross_derivative(&self, x: &DVector<f64>, _y: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::identity(x.len(), x.len()) * -2.0
    }
}

/// `U(x, y) = Σ w_d (x_d - y_d)² + λ |y|²`.
#[derive(Debug, Clone)]
pub struct WeightedSquaredErrorL2 {
    pub weights: Vec<f64>,
    pub lambda: f64,
}

impl WeightedSquaredErrorL2 {
    pub fn solution(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.weights)
            .map(|(v, w)| w * v / (w + self.lambda))
            .collect()
    }
}

impl PenaltyObjective for WeightedSquaredErrorL2 {
    fn gradient(&self, x: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            x.len(),
            (0..x.len()).map(|d| 2.0 * self.weights[d] * (y[d] - x[d]) + 2.0 * self.lambda * y[d]),
        )
    }

    fn hessian(&self, _x: &DVector<f64>, _y: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_iterator(
            self.weights.len(),
            self.weights.iter().map(|w| 2.0 * (w + self.lambda)),
        ))
    }

    fn cross_derivative(&self, _x: &DVector<f64>, _y: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_iterator(
            self.weights.len(),
            self.weights.iter().map(|w| -2.0 * w),
        ))
    }
}

/// Per-observation influence function of the penalized parameter defined by
/// `obj`, given the `n × D` influence matrix of the unpenalized parameter.
pub fn general_penalized_eif<O: PenaltyObjective + ?Sized>(
    eif_psi: &DMatrix<f64>,
    psi: &[f64],
    psi_tilde: &[f64],
    obj: &O,
) -> Result<DMatrix<f64>> {
    let dim = psi.len();
    if psi_tilde.len() != dim || eif_psi.ncols() != dim {
        return Err(Error::invalid(format!(
            "dimension mismatch: psi {}, psi_tilde {}, eif columns {}",
            dim,
            psi_tilde.len(),
            eif_psi.ncols()
        )));
    }
    let x = DVector::from_column_slice(psi);
    let y = DVector::from_column_slice(psi_tilde);
    let normalizer = -obj.hessian(&x, &y);
    let inv = normalizer.try_inverse().ok_or(Error::SingularNormalizer)?;
    let cross = obj.cross_derivative(&x, &y);
    let grad = obj.gradient(&x, &y);

    // Row i of the result is (M⁻¹ (C dᵢ + g))ᵀ = dᵢᵀ Cᵀ M⁻ᵀ + gᵀ M⁻ᵀ.
    let inv_t = inv.transpose();
    let mut out = eif_psi * cross.transpose() * &inv_t;
    let offset = (grad.transpose() * &inv_t).transpose();
    for mut row in out.row_iter_mut() {
        for d in 0..dim {
            row[d] += offset[d];
        }
    }
    Ok(out)
}

/// Plug-in influence function of the per-coordinate variances,
/// `eif_psi[i, d]² - eif_var[d]`.
pub fn default_sigma2_eif(eif_psi: &DMatrix<f64>, est: &EstimateSet) -> DMatrix<f64> {
    DMatrix::from_fn(eif_psi.nrows(), eif_psi.ncols(), |i, d| {
        eif_psi[(i, d)] * eif_psi[(i, d)] - est.eif_var[d]
    })
}

/// Influence function of `gamma = sum(eif_var) / |psi|²` by the delta method:
/// `-2 T / |psi|⁴ · Σ_d psi_d D_d + Σ_d S_d / |psi|²`, with `D` the influence
/// matrix of `psi` and `S` that of the variances. `eif_sigma2 = None` uses
/// [`default_sigma2_eif`].
pub fn gamma_eif(
    eif_psi: &DMatrix<f64>,
    eif_sigma2: Option<&DMatrix<f64>>,
    est: &EstimateSet,
) -> Result<DVector<f64>> {
    let dim = est.dim();
    if eif_psi.ncols() != dim {
        return Err(Error::invalid("eif matrix columns do not match estimate dimension"));
    }
    let norm_sq = est.norm_sq();
    if norm_sq == 0.0 {
        return Err(Error::DegenerateParameter(
            "all estimates are zero; gamma has no influence function".into(),
        ));
    }
    let owned;
    let sigma2 = match eif_sigma2 {
        Some(m) => {
            if m.shape() != eif_psi.shape() {
                return Err(Error::invalid("variance influence matrix has the wrong shape"));
            }
            m
        }
        None => {
            owned = default_sigma2_eif(eif_psi, est);
            &owned
        }
    };
    let trace = est.trace();
    let psi = DVector::from_column_slice(&est.psi);
    let along_psi = eif_psi * &psi;
    let var_sum = sigma2.column_sum();
    Ok(along_psi * (-2.0 * trace / (norm_sq * norm_sq)) + var_sum / norm_sq)
}

/// Influence function of `psi / (1 + λ*)` with `λ* = gamma / n` estimated:
/// `D / (1 + λ*) - (1/n) psi / (1 + λ*)² · D_gamma`.
pub fn lambda_star_eif(
    eif_psi: &DMatrix<f64>,
    eif_gamma: &DVector<f64>,
    est: &EstimateSet,
    lambda_star: f64,
) -> Result<DMatrix<f64>> {
    super::check_lambda(lambda_star)?;
    if eif_gamma.len() != eif_psi.nrows() || eif_psi.ncols() != est.dim() {
        return Err(Error::invalid("influence inputs have inconsistent shapes"));
    }
    let s = 1.0 + lambda_star;
    let n = est.n as f64;
    Ok(DMatrix::from_fn(eif_psi.nrows(), eif_psi.ncols(), |i, d| {
        eif_psi[(i, d)] / s - est.psi[d] / (n * s * s) * eif_gamma[i]
    }))
}
