//! Dense matrices, a small differentiable MLP, Adam, and splittable RNG streams.

mod adam;
pub mod linalg;
mod matrix;
mod mlp;
mod rng;

pub use adam::{adam_step, OptState};
pub use matrix::{gemm, Matrix};
pub use mlp::{
    mlp_backward, mlp_backward_cached, mlp_forward, mlp_forward_cached, Activation, ForwardCache,
    Layer, MlpGrads, MlpParams,
};
pub use rng::{rng_split, sample_standard_normal, RngStream};
