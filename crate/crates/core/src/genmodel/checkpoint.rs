//! Self-describing JSON checkpoints for trained generators.
//!
//! Floats are written with shortest round-trip formatting and parsed with
//! correct rounding, so a save/load cycle reproduces every parameter bit.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::GeneratorModel;
use crate::error::{DcmaError, Result};

pub const CHECKPOINT_FORMAT: &str = "dcma-generator";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Envelope {
    format: String,
    version: u32,
    model: GeneratorModel,
}

pub fn checkpoint_to_string(model: &GeneratorModel) -> Result<String> {
    let env = Envelope {
        format: CHECKPOINT_FORMAT.into(),
        version: CHECKPOINT_VERSION,
        model: model.clone(),
    };
    Ok(serde_json::to_string_pretty(&env)?)
}

pub fn checkpoint_from_str(text: &str) -> Result<GeneratorModel> {
    let env: Envelope = serde_json::from_str(text)?;
    if env.format != CHECKPOINT_FORMAT || env.version != CHECKPOINT_VERSION {
        return Err(DcmaError::config(format!(
            "unsupported checkpoint {} v{}",
            env.format, env.version
        )));
    }
    let m = env.model;
    // re-run the constructor checks on the loaded pieces
    GeneratorModel::new(m.role, m.params, m.layout, m.standardization, m.meta)
}

pub fn save_checkpoint(model: &GeneratorModel, path: &Path) -> Result<()> {
    fs::write(path, checkpoint_to_string(model)?)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<GeneratorModel> {
    checkpoint_from_str(&fs::read_to_string(path)?)
}
