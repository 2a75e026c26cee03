//! Repeated fit-and-estimate runs on fresh scenario draws, scored against
//! the oracle.

use std::collections::BTreeMap;
use std::io::Write;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::oracle::oracle_regime_samples;
use super::{generate_scenario, OracleTruth, ScenarioSpec};
use crate::error::{DcmaError, Result};
use crate::estimands::{
    estimate_effects, EffectEstimate, EffectKind, OutcomeModel, OutcomeModelKind, PipelineConfig,
};
use crate::genmodel::{fit_linear_gaussian, train_generator, Dataset, Role};
use crate::metrics::energy_distance;
use crate::numcore::RngStream;
use crate::par;
use crate::simulate::{RegimeLabel, SimulationOutput};

const STUDY_STREAM: u64 = 0x57ad7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    DcmaEs,
    LinearGaussianAblation,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::DcmaEs => "dcma_es",
            Method::LinearGaussianAblation => "linear_gaussian_ablation",
        }
    }

    fn outcome_kind(self) -> OutcomeModelKind {
        match self {
            Method::DcmaEs => OutcomeModelKind::Generator,
            Method::LinearGaussianAblation => OutcomeModelKind::LinearGaussian,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudyConfig {
    pub reps: usize,
    /// Methods fitted on each replication; they share the mediator generator.
    pub methods: Vec<Method>,
    pub pipeline: PipelineConfig,
    pub seed: u64,
    /// `(n, B)` of the oracle reference draws for per-regime energy
    /// distances; `None` skips that comparison.
    pub reference: Option<(usize, usize)>,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            reps: 20,
            methods: vec![Method::DcmaEs],
            pipeline: PipelineConfig::default(),
            seed: 0,
            reference: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub method: Method,
    pub functional: String,
    pub params: String,
    pub effect: EffectKind,
    pub truth: f64,
    pub mean_estimate: f64,
    pub bias: f64,
    pub rmse: f64,
    pub reps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeEdRow {
    pub method: Method,
    pub regime: RegimeLabel,
    pub mean_ed: f64,
    pub per_rep: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepOutcome {
    pub rep: usize,
    pub method: Method,
    pub effects: Vec<EffectEstimate>,
    pub regime_ed: BTreeMap<RegimeLabel, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyResult {
    pub scenario: String,
    pub n: usize,
    pub reps: usize,
    pub rows: Vec<StudyRow>,
    pub regime_ed: Vec<RegimeEdRow>,
    pub outcomes: Vec<RepOutcome>,
    pub failures: Vec<(usize, String)>,
}

impl StudyResult {
    pub fn row(&self, method: Method, functional: &str, effect: EffectKind) -> Option<&StudyRow> {
        self.rows
            .iter()
            .find(|r| r.method == method && r.functional == functional && r.effect == effect)
    }

    /// `method,functional,params,metric,effect,value` with metric one of
    /// truth, mean, bias, rmse.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "method,functional,params,metric,effect,value")?;
        for r in &self.rows {
            for (metric, v) in [
                ("truth", r.truth),
                ("mean", r.mean_estimate),
                ("bias", r.bias),
                ("rmse", r.rmse),
            ] {
                writeln!(
                    w,
                    "{},{},{},{},{},{}",
                    r.method.name(),
                    r.functional,
                    r.params,
                    metric,
                    r.effect,
                    v
                )?;
            }
        }
        for r in &self.regime_ed {
            writeln!(w, "{},ed,,regime_ed,{},{}", r.method.name(), r.regime, r.mean_ed)?;
        }
        Ok(())
    }
}

/// Seeds of replication `rep`: `(data, train, sim)`.
pub fn replication_seeds(study_seed: u64, rep: usize) -> (u64, u64, u64) {
    let rs = RngStream::new(study_seed, STUDY_STREAM).split(rep as u64);
    (rs.split(0).next_u64(), rs.split(1).next_u64(), rs.split(2).next_u64())
}

/// Fresh data per replication, full pipeline per method, bias and RMSE of
/// every scalar effect against `truth`. `inspect` sees each replication's
/// simulated regimes before they are dropped. More than 10% failed
/// replications is an error.
pub fn run_replication_study<F>(
    spec: &ScenarioSpec,
    cfg: &StudyConfig,
    truth: &OracleTruth,
    inspect: F,
) -> Result<StudyResult>
where
    F: Fn(usize, Method, &Dataset, &SimulationOutput) + Sync,
{
    if cfg.reps == 0 {
        return Err(DcmaError::arg("a replication study needs at least one replication"));
    }
    if cfg.methods.is_empty() {
        return Err(DcmaError::arg("no methods requested"));
    }
    spec.validate()?;
    let s = spec.n_mediators();
    cfg.pipeline.validate(s)?;
    let effects = cfg.pipeline.effects(s);
    let reference = match cfg.reference {
        Some((n_ref, b_ref)) => {
            let regimes = cfg.pipeline.sim.regimes(s);
            let seed = RngStream::new(cfg.seed, STUDY_STREAM).split(u64::MAX).next_u64();
            Some(oracle_regime_samples(spec, n_ref, b_ref, seed, &regimes)?)
        }
        None => None,
    };
    let reference_pooled: Option<BTreeMap<RegimeLabel, _>> = reference
        .as_ref()
        .map(|r| r.iter().map(|(k, v)| (*k, v.pooled())).collect());
    drop(reference);

    let results = par::map_indexed(cfg.reps, |rep| -> Result<Vec<RepOutcome>> {
        let (data_seed, train_seed, sim_seed) = replication_seeds(cfg.seed, rep);
        let data = generate_scenario(&spec.with_seed(data_seed))?;
        let mut pc = cfg.pipeline.clone();
        pc.train.seed = train_seed;
        pc.sim.seed = sim_seed;
        let fm = train_generator(&data, Role::Mediator, &pc.train)?;
        let mut out = Vec::new();
        for &method in &cfg.methods {
            pc.outcome_model = method.outcome_kind();
            let fy = match method {
                Method::DcmaEs => OutcomeModel::Generator(train_generator(&data, Role::Outcome, &pc.train)?),
                Method::LinearGaussianAblation => OutcomeModel::LinearGaussian(fit_linear_gaussian(&data)?),
            };
            let sims = crate::estimands::simulate_fitted(&fm, &fy, data.covariates(), &pc)?;
            inspect(rep, method, &data, &sims);
            let est = estimate_effects(&sims, &effects, &pc.functionals)?;
            let mut regime_ed = BTreeMap::new();
            if let Some(refs) = &reference_pooled {
                for (r, samples) in &sims {
                    if let Some(rp) = refs.get(r) {
                        regime_ed.insert(*r, energy_distance(&samples.pooled(), rp)?);
                    }
                }
            }
            out.push(RepOutcome {
                rep,
                method,
                effects: est,
                regime_ed,
            });
        }
        Ok(out)
    });

    let mut outcomes = Vec::new();
    let mut failures = Vec::new();
    for (rep, r) in results.into_iter().enumerate() {
        match r {
            Ok(v) => outcomes.extend(v),
            Err(e) => failures.push((rep, e.to_string())),
        }
    }
    if failures.len() * 10 > cfg.reps {
        return Err(DcmaError::Fit(format!(
            "{} of {} replications failed; first: {}",
            failures.len(),
            cfg.reps,
            failures[0].1
        )));
    }
    if outcomes.is_empty() {
        return Err(DcmaError::Fit("every replication failed".into()));
    }

    let mut rows = Vec::new();
    let mut regime_ed = Vec::new();
    for &method in &cfg.methods {
        let mine: Vec<&RepOutcome> = outcomes.iter().filter(|o| o.method == method).collect();
        for &k in &effects {
            for f in &pc_scalar(&cfg.pipeline) {
                let Some(t) = truth.scalar(k, f) else { continue };
                let vals: Vec<f64> = mine
                    .iter()
                    .filter_map(|o| {
                        o.effects
                            .iter()
                            .find(|e| e.effect == k && &e.functional == f)
                            .and_then(|e| e.point.scalar())
                    })
                    .collect();
                if vals.is_empty() {
                    continue;
                }
                let m = vals.len() as f64;
                let mean = vals.iter().sum::<f64>() / m;
                let mse = vals.iter().map(|v| (v - t) * (v - t)).sum::<f64>() / m;
                rows.push(StudyRow {
                    method,
                    functional: f.name().to_string(),
                    params: f.params_label(),
                    effect: k,
                    truth: t,
                    mean_estimate: mean,
                    bias: mean - t,
                    rmse: mse.sqrt(),
                    reps: vals.len(),
                });
            }
        }
        if let Some(first) = mine.first() {
            for r in first.regime_ed.keys() {
                let per_rep: Vec<f64> = mine.iter().filter_map(|o| o.regime_ed.get(r).copied()).collect();
                regime_ed.push(RegimeEdRow {
                    method,
                    regime: *r,
                    mean_ed: per_rep.iter().sum::<f64>() / per_rep.len() as f64,
                    per_rep,
                });
            }
        }
    }
    Ok(StudyResult {
        scenario: spec.id().to_string(),
        n: spec.n,
        reps: cfg.reps,
        rows,
        regime_ed,
        outcomes,
        failures,
    })
}

fn pc_scalar(pc: &PipelineConfig) -> Vec<crate::metrics::FunctionalSpec> {
    pc.functionals
        .iter()
        .filter(|f| !matches!(f, crate::metrics::FunctionalSpec::QteCurve { .. }))
        .cloned()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::FunctionalSpec;
    use crate::scenarios::OracleMeta;

    #[test]
    fn zero_replications_is_an_argument_error() {
        let spec = ScenarioSpec::s1(100, 0);
        let truth = OracleTruth {
            entries: vec![],
            meta: OracleMeta {
                scenario: "S1".into(),
                n_oracle: 0,
                b_oracle: 0,
                seed: 0,
            },
        };
        let cfg = StudyConfig {
            reps: 0,
            ..Default::default()
        };
        let e = run_replication_study(&spec, &cfg, &truth, |_, _, _, _| {}).unwrap_err();
        assert!(matches!(e, DcmaError::Argument(_)));
    }

    #[test]
    fn tiny_study_runs() {
        let spec = ScenarioSpec::s1(120, 0);
        let truth = crate::scenarios::oracle_truth(&spec, 500, 10, &[FunctionalSpec::Mean]).unwrap();
        let mut cfg = StudyConfig {
            reps: 2,
            methods: vec![Method::DcmaEs, Method::LinearGaussianAblation],
            reference: Some((100, 10)),
            ..Default::default()
        };
        cfg.pipeline.train.epochs = 2;
        cfg.pipeline.train.mediator_hidden = vec![8];
        cfg.pipeline.train.outcome_hidden = vec![8];
        cfg.pipeline.sim.b = 5;
        let res = run_replication_study(&spec, &cfg, &truth, |_, _, _, _| {}).unwrap();
        assert_eq!(res.outcomes.len(), 4);
        assert!(res.row(Method::DcmaEs, "mean", EffectKind::Ite).is_some());
        assert!(res.row(Method::LinearGaussianAblation, "mean", EffectKind::Ipse(1)).is_some());
        assert_eq!(res.regime_ed.len(), 10);
        let mut csv = Vec::new();
        res.write_csv(&mut csv).unwrap();
        assert!(String::from_utf8(csv).unwrap().starts_with("method,functional"));
    }
}
