use serde::{Deserialize, Serialize};

use super::{Dataset, StandardizationParams};
use crate::error::{DcmaError, Result};
use crate::metrics::SampleSet;
use crate::numcore::{
    mlp_backward_cached, mlp_forward, mlp_forward_cached, sample_standard_normal, Matrix, MlpGrads,
    MlpParams, RngStream,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Mediator,
    Outcome,
}

/// Column layout of the network input: `[a, z.., m.. (outcome only), ε..]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputLayout {
    pub n_covariates: usize,
    pub n_mediators: usize,
    pub noise_dim: usize,
}

impl InputLayout {
    pub fn conditioning_width(&self, role: Role) -> usize {
        match role {
            Role::Mediator => 1 + self.n_covariates,
            Role::Outcome => 1 + self.n_covariates + self.n_mediators,
        }
    }

    pub fn input_width(&self, role: Role) -> usize {
        self.conditioning_width(role) + self.noise_dim
    }

    pub fn output_width(&self, role: Role) -> usize {
        match role {
            Role::Mediator => self.n_mediators,
            Role::Outcome => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub best_validation_loss: f64,
    pub seed: u64,
}

/// A trained noise-driven conditional sampler `f(a, z[, m], ε)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorModel {
    pub role: Role,
    pub params: MlpParams,
    pub layout: InputLayout,
    pub standardization: StandardizationParams,
    pub meta: TrainingMeta,
}

impl GeneratorModel {
    pub fn new(
        role: Role,
        params: MlpParams,
        layout: InputLayout,
        standardization: StandardizationParams,
        meta: TrainingMeta,
    ) -> Result<Self> {
        if params.in_dim() != layout.input_width(role) {
            return Err(DcmaError::shape(format!(
                "{role:?} network expects {} inputs but layout needs {}",
                params.in_dim(),
                layout.input_width(role)
            )));
        }
        if params.out_dim() != layout.output_width(role) {
            return Err(DcmaError::shape(format!(
                "{role:?} network emits {} outputs but layout needs {}",
                params.out_dim(),
                layout.output_width(role)
            )));
        }
        if standardization.z.len() != layout.n_covariates || standardization.m.len() != layout.n_mediators {
            return Err(DcmaError::shape("standardization does not match layout"));
        }
        Ok(GeneratorModel {
            role,
            params,
            layout,
            standardization,
            meta,
        })
    }

    pub fn noise_dim(&self) -> usize {
        self.layout.noise_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layout.output_width(self.role)
    }

    /// Standardized conditioning row for `(a, z[, m])` in original units.
    fn conditioning_row(&self, a: u8, z: &[f64], m: Option<&[f64]>, out: &mut Vec<f64>) {
        out.clear();
        out.push(f64::from(a));
        out.extend(self.standardization.standardize_z(z));
        if let Some(m) = m {
            out.extend(self.standardization.standardize_m(m));
        }
    }

    fn check_call(&self, z: &[f64], m_cols: Option<usize>, noise: &Matrix) -> Result<()> {
        if z.len() != self.layout.n_covariates {
            return Err(DcmaError::shape(format!(
                "expected {} covariates, got {}",
                self.layout.n_covariates,
                z.len()
            )));
        }
        match (self.role, m_cols) {
            (Role::Mediator, Some(_)) => {
                return Err(DcmaError::shape("mediator generator takes no mediator input"))
            }
            (Role::Outcome, None) => return Err(DcmaError::shape("outcome generator needs mediators")),
            (Role::Outcome, Some(c)) if c != self.layout.n_mediators => {
                return Err(DcmaError::shape(format!(
                    "expected {} mediators, got {c}",
                    self.layout.n_mediators
                )))
            }
            _ => {}
        }
        if noise.cols() != self.layout.noise_dim {
            return Err(DcmaError::shape(format!(
                "noise has {} columns, model uses {}",
                noise.cols(),
                self.layout.noise_dim
            )));
        }
        Ok(())
    }

    /// Evaluates the generator on explicit noise rows. For the outcome role,
    /// `m` supplies one mediator row per noise row. Output is in original units.
    pub fn sample_with_noise(&self, a: u8, z: &[f64], m: Option<&Matrix>, noise: &Matrix) -> Result<Matrix> {
        self.check_call(z, m.map(Matrix::cols), noise)?;
        let rows = noise.rows();
        if let Some(m) = m {
            if m.rows() != rows {
                return Err(DcmaError::shape(format!(
                    "{} mediator rows for {rows} noise rows",
                    m.rows()
                )));
            }
        }
        let width = self.layout.input_width(self.role);
        let mut input = Matrix::zeros(rows, width);
        let mut cond = Vec::with_capacity(width);
        if m.is_none() {
            self.conditioning_row(a, z, None, &mut cond);
        }
        for r in 0..rows {
            if let Some(m) = m {
                self.conditioning_row(a, z, Some(m.row(r)), &mut cond);
            }
            let row = input.row_mut(r);
            row[..cond.len()].copy_from_slice(&cond);
            row[cond.len()..].copy_from_slice(noise.row(r));
        }
        let mut out = mlp_forward(&self.params, &input)?;
        match self.role {
            Role::Mediator => {
                let scales = &self.standardization.m;
                for r in 0..rows {
                    for (v, s) in out.row_mut(r).iter_mut().zip(scales) {
                        *v = s.destandardize(*v);
                    }
                }
            }
            Role::Outcome => {
                let s = self.standardization.y;
                out.map_inplace(|v| s.destandardize(v));
            }
        }
        Ok(out)
    }
}

/// `generate`: `n_draws` conditional samples in original units.
pub fn generate(
    model: &GeneratorModel,
    a: u8,
    z: &[f64],
    m: Option<&[f64]>,
    n_draws: usize,
    stream: &mut RngStream,
) -> Result<SampleSet> {
    if n_draws == 0 {
        model.check_call(z, m.map(<[f64]>::len), &Matrix::zeros(0, model.noise_dim()))?;
        return Ok(SampleSet::empty(model.output_dim()));
    }
    let noise = sample_standard_normal(stream, n_draws, model.noise_dim());
    let m_rows = match m {
        Some(m) => {
            let mut rows = Matrix::zeros(n_draws, m.len());
            for r in 0..n_draws {
                rows.row_mut(r).copy_from_slice(m);
            }
            Some(rows)
        }
        None => None,
    };
    Ok(SampleSet::new(model.sample_with_noise(a, z, m_rows.as_ref(), &noise)?))
}

/// Standardized conditioning features and targets for a set of observations.
#[derive(Debug, Clone)]
pub struct TrainBatch {
    pub conditioning: Matrix,
    pub target: Matrix,
}

impl TrainBatch {
    /// Standardizes the rows `idx` of `data` for a generator of the given role.
    pub fn from_dataset(
        data: &Dataset,
        idx: &[usize],
        role: Role,
        standardization: &StandardizationParams,
    ) -> TrainBatch {
        let d_z = data.n_covariates();
        let s = data.n_mediators();
        let cond_w = match role {
            Role::Mediator => 1 + d_z,
            Role::Outcome => 1 + d_z + s,
        };
        let out_w = match role {
            Role::Mediator => s,
            Role::Outcome => 1,
        };
        let mut conditioning = Matrix::zeros(idx.len(), cond_w);
        let mut target = Matrix::zeros(idx.len(), out_w);
        for (r, &i) in idx.iter().enumerate() {
            let row = conditioning.row_mut(r);
            row[0] = f64::from(data.treatment()[i]);
            let zs = standardization.standardize_z(data.covariates().row(i));
            row[1..1 + d_z].copy_from_slice(&zs);
            let ms = standardization.standardize_m(data.mediators().row(i));
            match role {
                Role::Mediator => target.row_mut(r).copy_from_slice(&ms),
                Role::Outcome => {
                    row[1 + d_z..].copy_from_slice(&ms);
                    target[(r, 0)] = standardization.y.standardize(data.outcome()[i]);
                }
            }
        }
        TrainBatch { conditioning, target }
    }

    pub fn len(&self) -> usize {
        self.target.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.target.rows() == 0
    }

    pub fn select(&self, idx: &[usize]) -> TrainBatch {
        TrainBatch {
            conditioning: self.conditioning.select_rows(idx),
            target: self.target.select_rows(idx),
        }
    }
}

/// Network input with `k` copies of each conditioning row, each paired with
/// its own noise row: row `i·k + j` holds observation `i`, draw `j`.
pub fn expand_with_noise(batch: &TrainBatch, k: usize, noise: &Matrix) -> Result<Matrix> {
    let n = batch.len();
    if noise.rows() != n * k {
        return Err(DcmaError::shape(format!(
            "need {} noise rows for {n} observations x {k} draws, got {}",
            n * k,
            noise.rows()
        )));
    }
    let c = batch.conditioning.cols();
    let mut input = Matrix::zeros(n * k, c + noise.cols());
    for i in 0..n {
        let cond = batch.conditioning.row(i);
        for j in 0..k {
            let r = i * k + j;
            let row = input.row_mut(r);
            row[..c].copy_from_slice(cond);
            row[c..].copy_from_slice(noise.row(r));
        }
    }
    Ok(input)
}

#[inline]
fn unit_diff(a: &[f64], b: &[f64], out: &mut [f64]) -> f64 {
    let mut norm2 = 0.0;
    for ((o, x), y) in out.iter_mut().zip(a).zip(b) {
        *o = x - y;
        norm2 += *o * *o;
    }
    let norm = norm2.sqrt();
    if norm > 0.0 {
        for o in out.iter_mut() {
            *o /= norm;
        }
    } else {
        out.fill(0.0);
    }
    norm
}

/// Negative mean energy score of the generated draws `u` (row `i·k + j`)
/// against `target` rows, and optionally its gradient with respect to `u`.
fn es_objective(u: &Matrix, target: &Matrix, k: usize, want_grad: bool) -> (f64, Option<Matrix>) {
    let n = target.rows();
    let d = target.cols();
    let kf = k as f64;
    let nf = n as f64;
    let pair_w = 1.0 / (2.0 * kf * (kf - 1.0));
    let data_w = 1.0 / kf;
    let mut grad = want_grad.then(|| Matrix::zeros(u.rows(), d));
    let mut unit = vec![0.0; d];
    let mut total = 0.0;
    for i in 0..n {
        let y = target.row(i);
        let mut pair = 0.0;
        let mut data = 0.0;
        for j in 0..k {
            let uj = u.row(i * k + j);
            data += unit_diff(uj, y, &mut unit);
            if let Some(g) = grad.as_mut() {
                // d/dU_j of (data_w Σ‖U_j − y‖) / n
                for (gv, e) in g.row_mut(i * k + j).iter_mut().zip(&unit) {
                    *gv += data_w * e / nf;
                }
            }
            for l in (j + 1)..k {
                let ul = u.row(i * k + l);
                let dist = unit_diff(uj, ul, &mut unit);
                pair += 2.0 * dist;
                if let Some(g) = grad.as_mut() {
                    // each unordered pair appears twice in the ordered sum
                    let w = 2.0 * pair_w / nf;
                    for (gv, e) in g.row_mut(i * k + j).iter_mut().zip(&unit) {
                        *gv -= w * e;
                    }
                    for (gv, e) in g.row_mut(i * k + l).iter_mut().zip(&unit) {
                        *gv += w * e;
                    }
                }
            }
        }
        total += data * data_w - pair * pair_w;
    }
    (total / nf, grad)
}

fn check_k(k: usize) -> Result<()> {
    if k < 2 {
        return Err(DcmaError::arg(format!("energy-score loss needs K >= 2, got {k}")));
    }
    Ok(())
}

/// Loss and parameter gradients on explicit noise (`batch.len()·k` rows).
pub fn es_loss_with_noise(
    params: &MlpParams,
    batch: &TrainBatch,
    k: usize,
    noise: &Matrix,
) -> Result<(f64, MlpGrads)> {
    check_k(k)?;
    let input = expand_with_noise(batch, k, noise)?;
    let cache = mlp_forward_cached(params, &input)?;
    let (loss, grad_u) = es_objective(cache.output(), &batch.target, k, true);
    let grads = mlp_backward_cached(params, &cache, &grad_u.expect("requested"))?;
    Ok((loss, grads))
}

/// Loss only (no backward pass).
pub fn es_loss_value_with_noise(params: &MlpParams, batch: &TrainBatch, k: usize, noise: &Matrix) -> Result<f64> {
    check_k(k)?;
    let input = expand_with_noise(batch, k, noise)?;
    let u = mlp_forward(params, &input)?;
    Ok(es_objective(&u, &batch.target, k, false).0)
}

/// `es_loss_batch`: draws `K` noise vectors per observation from `stream`
/// and returns `−(1/n) Σ ÊS` with its gradient.
pub fn es_loss_batch(
    model: &GeneratorModel,
    batch: &TrainBatch,
    k: usize,
    stream: &mut RngStream,
) -> Result<(f64, MlpGrads)> {
    check_k(k)?;
    let noise = sample_standard_normal(stream, batch.len() * k, model.noise_dim());
    es_loss_with_noise(&model.params, batch, k, &noise)
}
