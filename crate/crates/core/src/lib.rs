pub mod error;
pub mod estimands;
pub mod genmodel;
pub mod metrics;
pub mod numcore;
pub mod par;
pub mod scenarios;
pub mod simulate;

pub use error::{DcmaError, Result};
