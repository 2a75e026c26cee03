//! Synthetic data-generating processes and their known mechanisms.
//!
//! S1 has one mediator and an outcome that turns bimodal under treatment,
//! where the mode is picked by the sign of the covariate. S2 has five
//! correlated mediators and a `sin(M₁M₂)` interaction in the outcome.

mod oracle;
mod study;

use serde::{Deserialize, Serialize};

use crate::error::{DcmaError, Result};
use crate::genmodel::{ColumnNames, Dataset};
use crate::numcore::{linalg::cholesky, sample_standard_normal, Matrix, RngStream};
use crate::simulate::{MediatorSampler, OutcomeSampler};

pub use oracle::{oracle_regime_samples, oracle_truth, OracleMeta, OracleTruth, TruthEntry};
pub use study::{
    replication_seeds, run_replication_study, Method, RegimeEdRow, RepOutcome, StudyConfig,
    StudyResult, StudyRow,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct S1Params {
    pub mediator_intercept: f64,
    pub mediator_treatment: f64,
    pub mediator_covariate: f64,
    pub mediator_sd: f64,
    /// Outcome intercept for the untreated arm.
    pub intercept_control: f64,
    /// Treated-arm intercept when the covariate is positive.
    pub intercept_low: f64,
    /// Treated-arm intercept when the covariate is non-positive.
    pub intercept_high: f64,
    pub outcome_treatment: f64,
    pub outcome_mediator: f64,
    pub outcome_covariate: f64,
    pub outcome_sd: f64,
}

impl Default for S1Params {
    fn default() -> Self {
        S1Params {
            mediator_intercept: 0.5,
            mediator_treatment: 1.0,
            mediator_covariate: 0.3,
            mediator_sd: 0.5,
            intercept_control: 4.3,
            intercept_low: 2.0,
            intercept_high: 6.0,
            outcome_treatment: 0.3,
            outcome_mediator: 0.5,
            outcome_covariate: 0.2,
            outcome_sd: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct S2Params {
    pub mediator_intercept: Vec<f64>,
    pub mediator_treatment: Vec<f64>,
    pub mediator_covariate: Vec<f64>,
    /// Mediator noise covariance is `rho^|i-j|`.
    pub mediator_rho: f64,
    pub outcome_intercept: f64,
    pub outcome_treatment: f64,
    /// Common coefficient on every mediator.
    pub outcome_mediator: f64,
    /// Coefficient on `sin(M₁ M₂)`.
    pub outcome_interaction: f64,
    pub outcome_covariate: f64,
    pub outcome_sd: f64,
}

impl Default for S2Params {
    fn default() -> Self {
        S2Params {
            mediator_intercept: vec![0.5; 5],
            mediator_treatment: vec![1.0, 0.8, 0.6, 0.4, 0.2],
            mediator_covariate: vec![0.3, 0.3, 0.2, 0.2, 0.1],
            mediator_rho: 0.6,
            outcome_intercept: 1.0,
            outcome_treatment: 0.6,
            outcome_mediator: 0.2,
            outcome_interaction: 1.0,
            outcome_covariate: 0.2,
            outcome_sd: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "id")]
pub enum ScenarioParams {
    S1(S1Params),
    S2(S2Params),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub n: usize,
    pub seed: u64,
    pub params: ScenarioParams,
}

impl ScenarioSpec {
    pub fn s1(n: usize, seed: u64) -> Self {
        ScenarioSpec {
            n,
            seed,
            params: ScenarioParams::S1(S1Params::default()),
        }
    }

    pub fn s2(n: usize, seed: u64) -> Self {
        ScenarioSpec {
            n,
            seed,
            params: ScenarioParams::S2(S2Params::default()),
        }
    }

    pub fn id(&self) -> &'static str {
        match self.params {
            ScenarioParams::S1(_) => "S1",
            ScenarioParams::S2(_) => "S2",
        }
    }

    pub fn n_mediators(&self) -> usize {
        match &self.params {
            ScenarioParams::S1(_) => 1,
            ScenarioParams::S2(p) => p.mediator_intercept.len(),
        }
    }

    /// Same scenario with every path from the treatment removed.
    pub fn without_treatment_effects(&self) -> Self {
        let params = match &self.params {
            ScenarioParams::S1(p) => ScenarioParams::S1(S1Params {
                mediator_treatment: 0.0,
                intercept_low: p.intercept_control,
                intercept_high: p.intercept_control,
                outcome_treatment: 0.0,
                ..p.clone()
            }),
            ScenarioParams::S2(p) => ScenarioParams::S2(S2Params {
                mediator_treatment: vec![0.0; p.mediator_treatment.len()],
                outcome_treatment: 0.0,
                ..p.clone()
            }),
        };
        ScenarioSpec {
            params,
            ..self.clone()
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        ScenarioSpec { seed, ..self.clone() }
    }

    pub fn with_n(&self, n: usize) -> Self {
        ScenarioSpec { n, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(DcmaError::config("scenario n must be >= 1"));
        }
        self.mechanism().map(|_| ())
    }

    /// The true conditional samplers of this scenario.
    pub fn mechanism(&self) -> Result<Mechanism> {
        match &self.params {
            ScenarioParams::S1(p) => {
                if !(p.mediator_sd >= 0.0 && p.outcome_sd >= 0.0) {
                    return Err(DcmaError::config("standard deviations must be non-negative"));
                }
                Ok(Mechanism::S1(p.clone()))
            }
            ScenarioParams::S2(p) => {
                let s = p.mediator_intercept.len();
                if s < 2 || p.mediator_treatment.len() != s || p.mediator_covariate.len() != s {
                    return Err(DcmaError::config(
                        "S2 mediator coefficient vectors must share a length of at least 2",
                    ));
                }
                let mut sigma = Matrix::zeros(s, s);
                for i in 0..s {
                    for j in 0..s {
                        sigma[(i, j)] = p.mediator_rho.powi((i as i32 - j as i32).abs());
                    }
                }
                let chol = cholesky(&sigma)
                    .map_err(|e| DcmaError::config(format!("S2 mediator covariance: {e}")))?;
                Ok(Mechanism::S2 {
                    params: p.clone(),
                    chol,
                })
            }
        }
    }
}

/// Known conditional mediator and outcome laws.
#[derive(Debug, Clone)]
pub enum Mechanism {
    S1(S1Params),
    S2 { params: S2Params, chol: Matrix },
}

impl Mechanism {
    pub fn noise_covariance_factor(&self) -> Option<&Matrix> {
        match self {
            Mechanism::S1(_) => None,
            Mechanism::S2 { chol, .. } => Some(chol),
        }
    }
}

impl MediatorSampler for Mechanism {
    fn n_mediators(&self) -> usize {
        match self {
            Mechanism::S1(_) => 1,
            Mechanism::S2 { params, .. } => params.mediator_intercept.len(),
        }
    }

    fn mediator_noise_dim(&self) -> usize {
        self.n_mediators()
    }

    fn sample_mediators(&self, a: u8, z: &[f64], noise: &Matrix) -> Result<Matrix> {
        if z.len() != 1 || noise.cols() != self.n_mediators() {
            return Err(DcmaError::shape("scenario mechanisms take one covariate"));
        }
        let a = f64::from(a);
        let z = z[0];
        match self {
            Mechanism::S1(p) => {
                let mean = p.mediator_intercept + p.mediator_treatment * a + p.mediator_covariate * z;
                let v = noise.as_slice().iter().map(|e| mean + p.mediator_sd * e).collect();
                Matrix::from_vec(noise.rows(), 1, v)
            }
            Mechanism::S2 { params: p, chol } => {
                let s = p.mediator_intercept.len();
                let mut out = Matrix::zeros(noise.rows(), s);
                for r in 0..noise.rows() {
                    let e = noise.row(r);
                    let row = out.row_mut(r);
                    for i in 0..s {
                        let mut corr = 0.0;
                        for k in 0..=i {
                            corr += chol[(i, k)] * e[k];
                        }
                        row[i] = p.mediator_intercept[i]
                            + p.mediator_treatment[i] * a
                            + p.mediator_covariate[i] * z
                            + corr;
                    }
                }
                Ok(out)
            }
        }
    }
}

impl OutcomeSampler for Mechanism {
    fn outcome_noise_dim(&self) -> usize {
        1
    }

    fn sample_outcomes(&self, a: u8, z: &[f64], m: &Matrix, noise: &Matrix) -> Result<Vec<f64>> {
        if z.len() != 1 || noise.cols() != 1 || m.cols() != self.n_mediators() || m.rows() != noise.rows() {
            return Err(DcmaError::shape("scenario outcome input layout mismatch"));
        }
        let z = z[0];
        let af = f64::from(a);
        let e = noise.as_slice();
        Ok(match self {
            Mechanism::S1(p) => {
                let intercept = if a == 0 {
                    p.intercept_control
                } else if z <= 0.0 {
                    p.intercept_high
                } else {
                    p.intercept_low
                };
                let base = intercept + p.outcome_treatment * af + p.outcome_covariate * z;
                (0..m.rows())
                    .map(|r| base + p.outcome_mediator * m[(r, 0)] + p.outcome_sd * e[r])
                    .collect()
            }
            Mechanism::S2 { params: p, .. } => {
                let base = p.outcome_intercept + p.outcome_treatment * af + p.outcome_covariate * z;
                (0..m.rows())
                    .map(|r| {
                        let row = m.row(r);
                        let sum: f64 = row.iter().sum();
                        base + p.outcome_mediator * sum
                            + p.outcome_interaction * (row[0] * row[1]).sin()
                            + p.outcome_sd * e[r]
                    })
                    .collect()
            }
        })
    }
}

const DATA_STREAM: u64 = 0xda7a;

/// Covariate draws `Z ~ N(0, 1)` for `n` units.
pub fn draw_covariates(n: usize, stream: &mut RngStream) -> Matrix {
    sample_standard_normal(stream, n, 1)
}

/// `generate_scenario`: `A ~ Bernoulli(0.5)`, `Z ~ N(0, 1)`, then `M` and `Y`
/// from the scenario mechanism. A pure function of the spec.
pub fn generate_scenario(spec: &ScenarioSpec) -> Result<Dataset> {
    spec.validate()?;
    let mech = spec.mechanism()?;
    let root = RngStream::new(spec.seed, DATA_STREAM);
    let n = spec.n;
    let s = mech.n_mediators();
    let mut treat = root.split(0);
    let a: Vec<u8> = (0..n).map(|_| u8::from(treat.bernoulli(0.5))).collect();
    let z = draw_covariates(n, &mut root.split(1));
    let em = sample_standard_normal(&mut root.split(2), n, s);
    let ey = sample_standard_normal(&mut root.split(3), n, 1);
    let mut m = Matrix::zeros(n, s);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let e = Matrix::from_vec(1, s, em.row(i).to_vec())?;
        let mi = mech.sample_mediators(a[i], z.row(i), &e)?;
        m.row_mut(i).copy_from_slice(mi.row(0));
        let ey_i = Matrix::from_vec(1, 1, vec![ey[(i, 0)]])?;
        y.push(mech.sample_outcomes(a[i], z.row(i), &mi, &ey_i)?[0]);
    }
    Dataset::new(a, z, m, y, ColumnNames::default_for(1, s))
}
