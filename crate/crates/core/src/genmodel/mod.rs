//! Conditional generators `f_M(a, z, ε)` and `f_Y(a, z, m, ε)` trained on the
//! energy-score loss, plus the linear-Gaussian outcome baseline.

mod checkpoint;
mod dataset;
mod generator;
mod linear;
mod train;

pub use checkpoint::{
    checkpoint_from_str, checkpoint_to_string, load_checkpoint, save_checkpoint, CHECKPOINT_FORMAT,
    CHECKPOINT_VERSION,
};
pub use dataset::{
    fit_standardization, fit_standardization_with, ColumnNames, ColumnScale, ConstantColumnPolicy,
    Dataset, StandardizationParams,
};
pub use generator::{
    es_loss_batch, es_loss_value_with_noise, es_loss_with_noise, expand_with_noise, generate,
    GeneratorModel, InputLayout, Role, TrainBatch, TrainingMeta,
};
pub use linear::{fit_linear_gaussian, LinearGaussianModel};
pub use train::{train_generator, train_validation_split, TrainConfig};
