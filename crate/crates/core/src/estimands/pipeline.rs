use serde::{Deserialize, Serialize};

use super::{compute_effect, EffectEstimate, EffectKind};
use crate::error::Result;
use crate::genmodel::{
    fit_linear_gaussian, train_generator, Dataset, GeneratorModel, LinearGaussianModel, Role,
    TrainConfig,
};
use crate::metrics::FunctionalSpec;
use crate::numcore::Matrix;
use crate::simulate::{
    forward_simulate_regimes, MediatorSampler, OutcomeSampler, Provenance, SimConfig,
    SimulationOutput,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeModelKind {
    #[default]
    Generator,
    LinearGaussian,
}

/// Training, simulation and reporting settings for one pass over a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub train: TrainConfig,
    pub sim: SimConfig,
    pub functionals: Vec<FunctionalSpec>,
    pub outcome_model: OutcomeModelKind,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            train: TrainConfig::default(),
            sim: SimConfig::default(),
            functionals: vec![FunctionalSpec::Mean, FunctionalSpec::Ed],
            outcome_model: OutcomeModelKind::Generator,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self, n_mediators: usize) -> Result<()> {
        self.train.validate()?;
        self.sim.validate(n_mediators)?;
        for f in &self.functionals {
            f.validate()?;
        }
        Ok(())
    }

    pub fn effects(&self, n_mediators: usize) -> Vec<EffectKind> {
        EffectKind::all(&self.sim.ipse_list(n_mediators))
    }
}

/// Fitted outcome law: a trained generator or the linear-Gaussian baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OutcomeModel {
    Generator(GeneratorModel),
    LinearGaussian(LinearGaussianModel),
}

impl OutcomeModel {
    pub fn label(&self) -> &'static str {
        match self {
            OutcomeModel::Generator(_) => "generator",
            OutcomeModel::LinearGaussian(_) => "linear_gaussian",
        }
    }
}

impl OutcomeSampler for OutcomeModel {
    fn outcome_noise_dim(&self) -> usize {
        match self {
            OutcomeModel::Generator(g) => g.outcome_noise_dim(),
            OutcomeModel::LinearGaussian(l) => l.outcome_noise_dim(),
        }
    }

    fn sample_outcomes(&self, a: u8, z: &[f64], m: &Matrix, noise: &Matrix) -> Result<Vec<f64>> {
        match self {
            OutcomeModel::Generator(g) => g.sample_outcomes(a, z, m, noise),
            OutcomeModel::LinearGaussian(l) => l.sample_outcomes(a, z, m, noise),
        }
    }
}

pub struct PipelineOutput {
    pub fm: GeneratorModel,
    pub fy: OutcomeModel,
    pub samples: SimulationOutput,
    pub effects: Vec<EffectEstimate>,
}

pub fn fit_models(data: &Dataset, cfg: &PipelineConfig) -> Result<(GeneratorModel, OutcomeModel)> {
    let fm = train_generator(data, Role::Mediator, &cfg.train)?;
    let fy = match cfg.outcome_model {
        OutcomeModelKind::Generator => OutcomeModel::Generator(train_generator(data, Role::Outcome, &cfg.train)?),
        OutcomeModelKind::LinearGaussian => OutcomeModel::LinearGaussian(fit_linear_gaussian(data)?),
    };
    Ok((fm, fy))
}

/// Every `(effect, functional)` pair, effects outermost.
pub fn estimate_effects(
    samples: &SimulationOutput,
    effects: &[EffectKind],
    functionals: &[FunctionalSpec],
) -> Result<Vec<EffectEstimate>> {
    let mut out = Vec::with_capacity(effects.len() * functionals.len());
    for &k in effects {
        for f in functionals {
            out.push(compute_effect(samples, k, f)?);
        }
    }
    Ok(out)
}

/// Fits both generators, forward-simulates every regime over the observed
/// covariates and evaluates all configured effects.
pub fn run_pipeline(data: &Dataset, cfg: &PipelineConfig) -> Result<PipelineOutput> {
    cfg.validate(data.n_mediators())?;
    let (fm, fy) = fit_models(data, cfg)?;
    let samples = simulate_fitted(&fm, &fy, data.covariates(), cfg)?;
    let effects = estimate_effects(&samples, &cfg.effects(data.n_mediators()), &cfg.functionals)?;
    Ok(PipelineOutput {
        fm,
        fy,
        samples,
        effects,
    })
}

/// Forward-simulates all configured regimes with already fitted models.
pub fn simulate_fitted(
    fm: &GeneratorModel,
    fy: &OutcomeModel,
    z: &Matrix,
    cfg: &PipelineConfig,
) -> Result<SimulationOutput> {
    let provenance = Provenance {
        master_seed: cfg.sim.seed,
        mediator_model: format!("generator(seed={})", fm.meta.seed),
        outcome_model: match fy {
            OutcomeModel::Generator(g) => format!("generator(seed={})", g.meta.seed),
            OutcomeModel::LinearGaussian(_) => "linear_gaussian".into(),
        },
    };
    let regimes = cfg.sim.regimes(fm.n_mediators());
    forward_simulate_regimes(fm, fy, z, &cfg.sim, &regimes, &provenance)
}
