use serde::{Deserialize, Serialize};

use super::{
    es_loss_value_with_noise, es_loss_with_noise, fit_standardization_with, ConstantColumnPolicy,
    Dataset, GeneratorModel, InputLayout, Role, TrainBatch, TrainingMeta,
};
use crate::error::{DcmaError, Result};
use crate::numcore::{adam_step, sample_standard_normal, Activation, MlpParams, OptState, RngStream};

const SPLIT_STREAM: u64 = 0x5_0117;
const MEDIATOR_STREAM: u64 = 0x3ed;
const OUTCOME_STREAM: u64 = 0x0c0e;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Noise draws per observation per loss evaluation.
    pub k: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub validation_fraction: f64,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    pub mediator_hidden: Vec<usize>,
    pub outcome_hidden: Vec<usize>,
    /// Extra noise dimensions beyond the output width.
    pub extra_noise_dims: usize,
    pub seed: u64,
    pub constant_columns: ConstantColumnPolicy,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            k: 10,
            epochs: 500,
            batch_size: 256,
            learning_rate: 1e-3,
            validation_fraction: 0.2,
            patience: 20,
            mediator_hidden: vec![64, 64],
            outcome_hidden: vec![64, 64],
            extra_noise_dims: 2,
            seed: 0,
            constant_columns: ConstantColumnPolicy::Error,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(DcmaError::config(format!("k must be >= 2, got {}", self.k)));
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction <= 0.5) {
            return Err(DcmaError::config(format!(
                "validation_fraction must lie in (0, 0.5], got {}",
                self.validation_fraction
            )));
        }
        if self.batch_size < 2 {
            return Err(DcmaError::config(format!(
                "batch_size must be >= 2, got {}",
                self.batch_size
            )));
        }
        if self.epochs == 0 {
            return Err(DcmaError::config("epochs must be >= 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(DcmaError::config("learning_rate must be positive"));
        }
        if self.mediator_hidden.contains(&0) || self.outcome_hidden.contains(&0) {
            return Err(DcmaError::config("hidden layer widths must be positive"));
        }
        Ok(())
    }

    fn hidden(&self, role: Role) -> &[usize] {
        match role {
            Role::Mediator => &self.mediator_hidden,
            Role::Outcome => &self.outcome_hidden,
        }
    }
}

/// Deterministic train/validation split shared by both generator roles.
pub fn train_validation_split(n: usize, cfg: &TrainConfig) -> Result<(Vec<usize>, Vec<usize>)> {
    let n_val = ((n as f64) * cfg.validation_fraction).round() as usize;
    let n_val = n_val.max(1);
    if n < 4 || n_val >= n || n - n_val < 2 {
        return Err(DcmaError::config(format!(
            "{n} observations are too few for a training/validation split"
        )));
    }
    let mut perm = RngStream::new(cfg.seed, SPLIT_STREAM).permutation(n);
    let mut val: Vec<usize> = perm.drain(..n_val).collect();
    let mut train = perm;
    val.sort_unstable();
    train.sort_unstable();
    Ok((train, val))
}

/// Minibatch Adam on the energy-score loss with early stopping on the
/// validation loss. Returns the parameters of the best validation epoch.
pub fn train_generator(data: &Dataset, role: Role, cfg: &TrainConfig) -> Result<GeneratorModel> {
    cfg.validate()?;
    let (train_idx, val_idx) = train_validation_split(data.len(), cfg)?;
    let standardization = fit_standardization_with(&data.select_rows(&train_idx)?, cfg.constant_columns)?;

    let layout = InputLayout {
        n_covariates: data.n_covariates(),
        n_mediators: data.n_mediators(),
        noise_dim: match role {
            Role::Mediator => data.n_mediators(),
            Role::Outcome => 1,
        } + cfg.extra_noise_dims,
    };
    let root = RngStream::new(
        cfg.seed,
        match role {
            Role::Mediator => MEDIATOR_STREAM,
            Role::Outcome => OUTCOME_STREAM,
        },
    );

    let mut sizes = vec![layout.input_width(role)];
    sizes.extend_from_slice(cfg.hidden(role));
    sizes.push(layout.output_width(role));
    let mut params = MlpParams::init(&sizes, Activation::Relu, None, &mut root.split(0))?;
    let mut opt = OptState::new(&params, cfg.learning_rate);

    let train = TrainBatch::from_dataset(data, &train_idx, role, &standardization);
    let val = TrainBatch::from_dataset(data, &val_idx, role, &standardization);
    // fixed validation noise so epoch losses are comparable
    let val_noise = sample_standard_normal(&mut root.split(1), val.len() * cfg.k, layout.noise_dim);

    let mut best = (f64::INFINITY, params.clone(), 0usize);
    let mut epochs_run = 0;
    let mut order: Vec<usize> = (0..train.len()).collect();
    for epoch in 0..cfg.epochs {
        let epoch_stream = root.split(2).split(epoch as u64);
        let mut shuffle = epoch_stream.split(0);
        for i in (1..order.len()).rev() {
            let j = shuffle.index(i + 1);
            order.swap(i, j);
        }
        for (b, chunk) in batches(&order, cfg.batch_size).enumerate() {
            let batch = train.select(chunk);
            let noise = sample_standard_normal(
                &mut epoch_stream.split(b as u64 + 1),
                batch.len() * cfg.k,
                layout.noise_dim,
            );
            let (loss, grads) = es_loss_with_noise(&params, &batch, cfg.k, &noise)?;
            if !loss.is_finite() {
                return Err(DcmaError::Training(format!(
                    "non-finite loss in epoch {epoch}, batch {b}"
                )));
            }
            adam_step(&mut params, &grads, &mut opt)
                .map_err(|e| DcmaError::Training(format!("epoch {epoch}, batch {b}: {e}")))?;
        }
        epochs_run = epoch + 1;

        let val_loss = es_loss_value_with_noise(&params, &val, cfg.k, &val_noise)?;
        if !val_loss.is_finite() {
            return Err(DcmaError::Training(format!(
                "non-finite validation loss in epoch {epoch}"
            )));
        }
        if val_loss < best.0 {
            best = (val_loss, params.clone(), epoch);
        } else if epoch - best.2 >= cfg.patience {
            break;
        }
    }

    let (best_loss, best_params, best_epoch) = best;
    GeneratorModel::new(
        role,
        best_params,
        layout,
        standardization,
        TrainingMeta {
            epochs_run,
            best_epoch,
            best_validation_loss: best_loss,
            seed: cfg.seed,
        },
    )
}

/// Consecutive chunks of at most `size`; a trailing singleton is folded into
/// the previous chunk.
fn batches(order: &[usize], size: usize) -> impl Iterator<Item = &[usize]> {
    let n = order.len();
    let mut bounds = Vec::new();
    let mut start = 0;
    while start < n {
        let mut end = (start + size).min(n);
        if n - end == 1 {
            end = n;
        }
        bounds.push((start, end));
        start = end;
    }
    bounds.into_iter().map(move |(s, e)| &order[s..e])
}
