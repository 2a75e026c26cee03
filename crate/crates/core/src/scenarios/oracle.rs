//! Ground truth by forward simulation through the known mechanism.

use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::{draw_covariates, ScenarioSpec};
use crate::error::{DcmaError, Result};
use crate::estimands::{compute_effect, EffectKind};
use crate::metrics::{Contrast, FunctionalSpec};
use crate::numcore::RngStream;
use crate::simulate::{forward_simulate_regimes, Provenance, RegimeLabel, SimConfig, SimulationOutput};

const ORACLE_STREAM: u64 = 0x0_7ac1e;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleMeta {
    pub scenario: String,
    pub n_oracle: usize,
    pub b_oracle: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthEntry {
    pub effect: EffectKind,
    pub functional: FunctionalSpec,
    pub value: Contrast,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleTruth {
    pub entries: Vec<TruthEntry>,
    pub meta: OracleMeta,
}

impl OracleTruth {
    pub fn get(&self, effect: EffectKind, functional: &FunctionalSpec) -> Option<&Contrast> {
        self.entries
            .iter()
            .find(|e| e.effect == effect && &e.functional == functional)
            .map(|e| &e.value)
    }

    pub fn scalar(&self, effect: EffectKind, functional: &FunctionalSpec) -> Option<f64> {
        self.get(effect, functional).and_then(Contrast::scalar)
    }
}

/// Interventional draws of `regimes` under the true mechanism for `n` fresh
/// covariate draws, `b` draws each. Draws of a regime do not depend on which
/// other regimes are requested.
pub fn oracle_regime_samples(
    spec: &ScenarioSpec,
    n: usize,
    b: usize,
    seed: u64,
    regimes: &[RegimeLabel],
) -> Result<SimulationOutput> {
    if n == 0 {
        return Err(DcmaError::arg("oracle sample size must be >= 1"));
    }
    let mech = spec.mechanism()?;
    let root = RngStream::new(seed, ORACLE_STREAM);
    let z = draw_covariates(n, &mut root.split(0));
    let cfg = SimConfig {
        b,
        seed: root.split(1).next_u64(),
        ipse_mediators: None,
    };
    let provenance = Provenance {
        master_seed: seed,
        mediator_model: format!("{}-true", spec.id()),
        outcome_model: format!("{}-true", spec.id()),
    };
    forward_simulate_regimes(&mech, &mech, &z, &cfg, regimes, &provenance)
}

/// True effect values for ITE, IDE and every IPSE under each functional.
/// Effects are simulated one group at a time to bound memory; the oracle
/// seed is `spec.seed`.
pub fn oracle_truth(
    spec: &ScenarioSpec,
    n_oracle: usize,
    b_oracle: usize,
    functionals: &[FunctionalSpec],
) -> Result<OracleTruth> {
    spec.validate()?;
    for f in functionals {
        f.validate()?;
    }
    let s = spec.n_mediators();
    let mut groups: Vec<Vec<EffectKind>> = vec![vec![EffectKind::Ite, EffectKind::Ide]];
    groups.extend((1..=s).map(|k| vec![EffectKind::Ipse(k)]));
    let mut entries = Vec::new();
    for group in groups {
        let mut regimes: Vec<RegimeLabel> = Vec::new();
        for k in &group {
            let (t, c) = k.regimes();
            for r in [t, c] {
                if !regimes.contains(&r) {
                    regimes.push(r);
                }
            }
        }
        let samples = oracle_regime_samples(spec, n_oracle, b_oracle, spec.seed, &regimes)?;
        for &k in &group {
            for f in functionals {
                entries.push(TruthEntry {
                    effect: k,
                    functional: f.clone(),
                    value: compute_effect(&samples, k, f)?.point,
                });
            }
        }
    }
    Ok(OracleTruth {
        entries,
        meta: OracleMeta {
            scenario: spec.id().to_string(),
            n_oracle,
            b_oracle,
            seed: spec.seed,
        },
    })
}
