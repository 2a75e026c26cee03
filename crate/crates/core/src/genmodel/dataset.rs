use serde::{Deserialize, Serialize};

use crate::error::{DcmaError, Result};
use crate::numcore::Matrix;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnNames {
    pub treatment: String,
    pub covariates: Vec<String>,
    pub mediators: Vec<String>,
    pub outcome: String,
}

impl ColumnNames {
    /// `A`, `Z1..`, `M1..`, `Y`.
    pub fn default_for(d_z: usize, n_mediators: usize) -> Self {
        ColumnNames {
            treatment: "A".into(),
            covariates: (1..=d_z).map(|j| format!("Z{j}")).collect(),
            mediators: (1..=n_mediators).map(|j| format!("M{j}")).collect(),
            outcome: "Y".into(),
        }
    }
}

/// Observed sample `(A, Z, M, Y)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    a: Vec<u8>,
    z: Matrix,
    m: Matrix,
    y: Vec<f64>,
    names: ColumnNames,
}

impl Dataset {
    pub fn new(a: Vec<u8>, z: Matrix, m: Matrix, y: Vec<f64>, names: ColumnNames) -> Result<Self> {
        let n = a.len();
        if n == 0 {
            return Err(DcmaError::arg("empty dataset"));
        }
        if z.rows() != n || m.rows() != n || y.len() != n {
            return Err(DcmaError::shape(format!(
                "column lengths differ: a {n}, z {}, m {}, y {}",
                z.rows(),
                m.rows(),
                y.len()
            )));
        }
        if m.cols() == 0 {
            return Err(DcmaError::arg("dataset needs at least one mediator"));
        }
        if names.covariates.len() != z.cols() || names.mediators.len() != m.cols() {
            return Err(DcmaError::shape("column names do not match column counts"));
        }
        if let Some(i) = a.iter().position(|&v| v > 1) {
            return Err(DcmaError::arg(format!(
                "treatment must be 0 or 1, row {i} has {}",
                a[i]
            )));
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(DcmaError::arg(format!("non-finite outcome at row {i}")));
        }
        if !z.is_finite() || !m.is_finite() {
            return Err(DcmaError::arg("non-finite covariate or mediator value"));
        }
        Ok(Dataset { a, z, m, y, names })
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    pub fn n_covariates(&self) -> usize {
        self.z.cols()
    }

    pub fn n_mediators(&self) -> usize {
        self.m.cols()
    }

    pub fn treatment(&self) -> &[u8] {
        &self.a
    }

    pub fn covariates(&self) -> &Matrix {
        &self.z
    }

    pub fn mediators(&self) -> &Matrix {
        &self.m
    }

    pub fn outcome(&self) -> &[f64] {
        &self.y
    }

    pub fn names(&self) -> &ColumnNames {
        &self.names
    }

    /// Rows by index (repeats allowed, as in a bootstrap resample).
    pub fn select_rows(&self, idx: &[usize]) -> Result<Dataset> {
        if idx.is_empty() {
            return Err(DcmaError::arg("empty dataset"));
        }
        Ok(Dataset {
            a: idx.iter().map(|&i| self.a[i]).collect(),
            z: self.z.select_rows(idx),
            m: self.m.select_rows(idx),
            y: idx.iter().map(|&i| self.y[i]).collect(),
            names: self.names.clone(),
        })
    }
}

/// Location and scale of one column.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColumnScale {
    pub mean: f64,
    pub sd: f64,
}

impl ColumnScale {
    #[inline]
    pub fn standardize(&self, x: f64) -> f64 {
        (x - self.mean) / self.sd
    }

    #[inline]
    pub fn destandardize(&self, x: f64) -> f64 {
        x * self.sd + self.mean
    }
}

/// What to do with a zero-variance column when fitting standardization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstantColumnPolicy {
    /// Configuration error naming the column.
    #[default]
    Error,
    /// Center the column and leave its scale at 1.
    UnitScale,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizationParams {
    pub z: Vec<ColumnScale>,
    pub m: Vec<ColumnScale>,
    pub y: ColumnScale,
}

fn column_scale(values: impl Iterator<Item = f64> + Clone, name: &str, policy: ConstantColumnPolicy) -> Result<ColumnScale> {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let sd = var.sqrt();
    if sd > 1e-12 * (1.0 + mean.abs()) {
        return Ok(ColumnScale { mean, sd });
    }
    match policy {
        ConstantColumnPolicy::Error => Err(DcmaError::config(format!(
            "column '{name}' has zero variance and cannot be standardized"
        ))),
        ConstantColumnPolicy::UnitScale => Ok(ColumnScale { mean, sd: 1.0 }),
    }
}

/// Column means and population standard deviations (divisor n) of Z, M, Y.
/// The treatment is never standardized.
pub fn fit_standardization(data: &Dataset) -> Result<StandardizationParams> {
    fit_standardization_with(data, ConstantColumnPolicy::Error)
}

pub fn fit_standardization_with(data: &Dataset, policy: ConstantColumnPolicy) -> Result<StandardizationParams> {
    if data.len() < 2 {
        return Err(DcmaError::config("standardization needs at least 2 rows"));
    }
    let names = data.names();
    let z = (0..data.n_covariates())
        .map(|j| column_scale(data.z.column(j).into_iter(), &names.covariates[j], policy))
        .collect::<Result<Vec<_>>>()?;
    let m = (0..data.n_mediators())
        .map(|j| column_scale(data.m.column(j).into_iter(), &names.mediators[j], policy))
        .collect::<Result<Vec<_>>>()?;
    let y = column_scale(data.y.iter().copied(), &names.outcome, policy)?;
    Ok(StandardizationParams { z, m, y })
}

impl StandardizationParams {
    pub fn standardize_z(&self, z: &[f64]) -> Vec<f64> {
        z.iter().zip(&self.z).map(|(v, s)| s.standardize(*v)).collect()
    }

    pub fn standardize_m(&self, m: &[f64]) -> Vec<f64> {
        m.iter().zip(&self.m).map(|(v, s)| s.standardize(*v)).collect()
    }

    pub fn destandardize_m(&self, m: &[f64]) -> Vec<f64> {
        m.iter().zip(&self.m).map(|(v, s)| s.destandardize(*v)).collect()
    }
}
