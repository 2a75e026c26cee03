use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{DcmaError, Result};
use crate::numcore::{linalg::least_squares, Matrix};

/// Outcome model `y = β₀ + β_A a + β_Mᵀ m + β_Zᵀ z + σ ε`, ε ~ N(0, 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearGaussianModel {
    pub intercept: f64,
    /// Coefficients on `(a, m.., z..)`, in that order.
    pub coefficients: Vec<f64>,
    pub sigma: f64,
    pub n_mediators: usize,
    pub n_covariates: usize,
}

/// Ordinary least squares on the design `(1, A, M, Z)`; σ̂ uses divisor `n − p`.
pub fn fit_linear_gaussian(data: &Dataset) -> Result<LinearGaussianModel> {
    let (n, s, d_z) = (data.len(), data.n_mediators(), data.n_covariates());
    let p = 2 + s + d_z;
    if n <= p {
        return Err(DcmaError::Fit(format!(
            "{n} observations are too few for {p} coefficients"
        )));
    }
    let mut x = Matrix::zeros(n, p);
    for i in 0..n {
        let row = x.row_mut(i);
        row[0] = 1.0;
        row[1] = f64::from(data.treatment()[i]);
        row[2..2 + s].copy_from_slice(data.mediators().row(i));
        row[2 + s..].copy_from_slice(data.covariates().row(i));
    }
    let (beta, rss) = least_squares(&x, data.outcome())?;
    let sigma = (rss / (n - p) as f64).sqrt();
    Ok(LinearGaussianModel {
        intercept: beta[0],
        coefficients: beta[1..].to_vec(),
        sigma,
        n_mediators: s,
        n_covariates: d_z,
    })
}

impl LinearGaussianModel {
    /// Conditional mean at `(a, m, z)`.
    pub fn mean(&self, a: u8, m: &[f64], z: &[f64]) -> f64 {
        let c = &self.coefficients;
        let mut y = self.intercept + c[0] * f64::from(a);
        y += m.iter().zip(&c[1..]).map(|(v, b)| v * b).sum::<f64>();
        y += z.iter().zip(&c[1 + self.n_mediators..]).map(|(v, b)| v * b).sum::<f64>();
        y
    }
}
