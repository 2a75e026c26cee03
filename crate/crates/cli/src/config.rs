//! Run configuration: a TOML file, resolved against command-line overrides
//! and written back out so every run records the settings it used.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use dcma_core::estimands::{BootstrapConfig, OutcomeModelKind, PipelineConfig};
use dcma_core::genmodel::TrainConfig;
use dcma_core::metrics::FunctionalSpec;
use dcma_core::numcore::RngStream;
use dcma_core::scenarios::{S1Params, S2Params, ScenarioParams, ScenarioSpec};
use dcma_core::simulate::SimConfig;
use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScenarioId {
    S1,
    S2,
}

/// Column roles of a CSV data source.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColumnRoles {
    pub treatment: String,
    pub mediators: Vec<String>,
    pub outcome: String,
    #[serde(default)]
    pub covariates: Vec<String>,
}

impl ColumnRoles {
    pub fn validate(&self) -> Result<(), CliError> {
        if self.mediators.is_empty() {
            return Err(CliError::config("columns.mediators must name at least one column"));
        }
        let mut seen = HashSet::new();
        let all = std::iter::once(&self.treatment)
            .chain(&self.mediators)
            .chain(std::iter::once(&self.outcome))
            .chain(&self.covariates);
        for name in all {
            if !seen.insert(name.as_str()) {
                return Err(CliError::config(format!(
                    "column '{name}' is assigned more than one role"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Source {
    Scenario {
        id: ScenarioId,
        n: usize,
        /// Drop every treatment path (test variant with all effects zero).
        #[serde(default)]
        null: bool,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        s1: Option<S1Params>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        s2: Option<S2Params>,
    },
    Csv {
        path: PathBuf,
        columns: ColumnRoles,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleSettings {
    pub n: usize,
    pub b: usize,
}

impl Default for OracleSettings {
    fn default() -> Self {
        OracleSettings { n: 100_000, b: 200 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudySettings {
    pub reps: usize,
    /// Oracle draws `(n, B)` used as the reference for per-regime energy
    /// distances in the ablation.
    pub reference_n: usize,
    pub reference_b: usize,
}

impl Default for StudySettings {
    fn default() -> Self {
        StudySettings {
            reps: 1,
            reference_n: 20_000,
            reference_b: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Master seed; every component seed is derived from it.
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    /// Write per-draw regime samples to `regimes.csv`.
    #[serde(default = "yes")]
    pub write_regimes: bool,
    #[serde(default = "default_functionals")]
    pub functionals: Vec<FunctionalSpec>,
    #[serde(default)]
    pub outcome_model: OutcomeModelKind,
    pub source: Source,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub sim: SimConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bootstrap: Option<BootstrapConfig>,
    #[serde(default)]
    pub oracle: OracleSettings,
    #[serde(default)]
    pub study: StudySettings,
}

fn yes() -> bool {
    true
}

fn default_functionals() -> Vec<FunctionalSpec> {
    PipelineConfig::default().functionals
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Profile {
    /// n = 2000, 5 replications.
    Quick,
    /// n = 5000, B = 200, 20 replications.
    Table1,
}

/// Command-line overrides applied on top of the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub reps: Option<usize>,
    pub profile: Option<Profile>,
}

const SEED_STREAM: u64 = 0x5eed;
/// Seeds stay within the signed 64-bit integers TOML can hold.
pub const MAX_SEED: u64 = i64::MAX as u64;

/// Component seed `k` of a master seed.
pub fn derive_seed(master: u64, k: u64) -> u64 {
    RngStream::new(master, SEED_STREAM).split(k).next_u64() >> 1
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::config(format!("invalid config: {e}")))
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string_pretty(self).map_err(|e| CliError::runtime(format!("cannot serialize config: {e}")))
    }

    /// Applies overrides, derives component seeds from the master seed and
    /// validates the result.
    pub fn resolve(mut self, o: &Overrides) -> Result<Self, CliError> {
        if let Some(seed) = o.seed {
            self.seed = seed;
        }
        if let Some(out) = &o.out {
            self.out = Some(out.clone());
        }
        match o.profile {
            Some(Profile::Quick) => {
                self.set_n(2000);
                self.study.reps = 5;
            }
            Some(Profile::Table1) => {
                self.set_n(5000);
                self.sim.b = 200;
                self.study.reps = 20;
            }
            None => {}
        }
        if let Some(reps) = o.reps {
            self.study.reps = reps;
        }
        if self.seed > MAX_SEED {
            return Err(CliError::config(format!("seed must be at most {MAX_SEED}")));
        }
        self.train.seed = derive_seed(self.seed, 0);
        self.sim.seed = derive_seed(self.seed, 1);
        if let Some(b) = &mut self.bootstrap {
            b.seed = derive_seed(self.seed, 2);
        }
        self.validate()?;
        Ok(self)
    }

    fn set_n(&mut self, n_new: usize) {
        if let Source::Scenario { n, .. } = &mut self.source {
            *n = n_new;
        }
    }

    /// Seed of the scenario data generator.
    pub fn data_seed(&self) -> u64 {
        derive_seed(self.seed, 3)
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("dcma-out"))
    }

    pub fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            train: self.train.clone(),
            sim: self.sim.clone(),
            functionals: self.functionals.clone(),
            outcome_model: self.outcome_model,
        }
    }

    /// Scenario described by the source, or `None` for CSV data.
    pub fn scenario(&self) -> Result<Option<ScenarioSpec>, CliError> {
        let Source::Scenario { id, n, null, s1, s2 } = &self.source else {
            return Ok(None);
        };
        let params = match id {
            ScenarioId::S1 => {
                if s2.is_some() {
                    return Err(CliError::config("source.s2 parameters given for scenario S1"));
                }
                ScenarioParams::S1(s1.clone().unwrap_or_default())
            }
            ScenarioId::S2 => {
                if s1.is_some() {
                    return Err(CliError::config("source.s1 parameters given for scenario S2"));
                }
                ScenarioParams::S2(s2.clone().unwrap_or_default())
            }
        };
        let spec = ScenarioSpec {
            n: *n,
            seed: self.data_seed(),
            params,
        };
        let spec = if *null { spec.without_treatment_effects() } else { spec };
        spec.validate().map_err(|e| CliError::config(format!("source: {e}")))?;
        Ok(Some(spec))
    }

    fn validate(&self) -> Result<(), CliError> {
        for (i, f) in self.functionals.iter().enumerate() {
            f.validate().map_err(|e| {
                let field = match f {
                    FunctionalSpec::Quantile { .. } => "tau",
                    FunctionalSpec::QteCurve { .. } => "taus",
                    FunctionalSpec::Exceedance { .. } | FunctionalSpec::DtePoint { .. } => "threshold",
                    _ => "kind",
                };
                CliError::config(format!("functionals[{i}].{field}: {e}"))
            })?;
        }
        if self.functionals.is_empty() {
            return Err(CliError::config("functionals must not be empty"));
        }
        self.train.validate().map_err(|e| CliError::config(format!("train: {e}")))?;
        if self.sim.b < 2 {
            return Err(CliError::config(format!("sim.b must be >= 2, got {}", self.sim.b)));
        }
        if let Some(b) = &self.bootstrap {
            b.validate().map_err(|e| CliError::config(format!("bootstrap: {e}")))?;
        }
        if self.oracle.n == 0 || self.oracle.b < 2 {
            return Err(CliError::config("oracle.n must be >= 1 and oracle.b >= 2"));
        }
        if self.study.reps == 0 {
            return Err(CliError::config("study.reps must be >= 1"));
        }
        match &self.source {
            Source::Csv { columns, .. } => columns.validate()?,
            Source::Scenario { n, .. } if *n == 0 => {
                return Err(CliError::config("source.n must be >= 1"))
            }
            Source::Scenario { .. } => {}
        }
        if let Some(spec) = self.scenario()? {
            self.sim
                .validate(spec.n_mediators())
                .map_err(|e| CliError::config(format!("sim: {e}")))?;
        }
        Ok(())
    }
}
