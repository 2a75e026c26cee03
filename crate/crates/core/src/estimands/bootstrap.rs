use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::pipeline::{estimate_effects, fit_models, simulate_fitted};
use super::{EffectEstimate, PipelineConfig};
use crate::error::{DcmaError, Result};
use crate::genmodel::Dataset;
use crate::metrics::{quantile_sorted, Contrast};
use crate::numcore::RngStream;
use crate::par;

const BOOT_STREAM: u64 = 0xb0075;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BootstrapConfig {
    pub resamples: usize,
    /// Independent pipeline fits averaged within each resample.
    pub refits: usize,
    pub seed: u64,
    pub level: f64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig {
            resamples: 100,
            refits: 1,
            seed: 0,
            level: 0.95,
        }
    }
}

impl BootstrapConfig {
    pub fn validate(&self) -> Result<()> {
        if self.resamples < 2 {
            return Err(DcmaError::config(format!(
                "resamples must be >= 2, got {}",
                self.resamples
            )));
        }
        if self.refits == 0 {
            return Err(DcmaError::config("refits must be >= 1"));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(DcmaError::config(format!(
                "level must lie in (0, 1), got {}",
                self.level
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapMeta {
    pub resamples: usize,
    pub completed: usize,
    pub refits: usize,
    pub seed: u64,
    pub level: f64,
}

pub struct BootstrapOutput {
    /// Point estimates from the original data, with intervals.
    pub estimates: Vec<EffectEstimate>,
    /// Per successful resample, effect values aligned with `estimates`.
    pub replicates: Vec<Vec<Contrast>>,
    /// `(resample, error)` for every skipped resample.
    pub failures: Vec<(usize, String)>,
}

impl BootstrapOutput {
    /// Percentile interval of estimate `idx` at another level, from the same
    /// replicates.
    pub fn interval_at(&self, idx: usize, level: f64) -> Result<(Contrast, Contrast)> {
        let values: Vec<&Contrast> = self.replicates.iter().map(|r| &r[idx]).collect();
        percentile_interval(&values, level)
    }
}

/// Pointwise `(α/2, 1 − α/2)` interpolated percentiles.
pub fn percentile_interval(values: &[&Contrast], level: f64) -> Result<(Contrast, Contrast)> {
    if values.is_empty() {
        return Err(DcmaError::arg("no replicate values"));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(DcmaError::arg(format!("level must lie in (0, 1), got {level}")));
    }
    let width = values[0].components().len();
    let alpha = 1.0 - level;
    let mut lo = Vec::with_capacity(width);
    let mut hi = Vec::with_capacity(width);
    for k in 0..width {
        let mut col: Vec<f64> = values.iter().map(|v| v.components()[k]).collect();
        col.sort_by(f64::total_cmp);
        lo.push(quantile_sorted(&col, alpha / 2.0)?);
        hi.push(quantile_sorted(&col, 1.0 - alpha / 2.0)?);
    }
    let wrap = |v: Vec<f64>| match values[0] {
        Contrast::Scalar(_) => Contrast::Scalar(v[0]),
        Contrast::Curve(_) => Contrast::Curve(v),
    };
    Ok((wrap(lo), wrap(hi)))
}

fn average(runs: &[Vec<EffectEstimate>]) -> Vec<Contrast> {
    let r = runs.len() as f64;
    (0..runs[0].len())
        .map(|j| {
            let mut acc = runs[0][j].point.components();
            for run in &runs[1..] {
                for (a, v) in acc.iter_mut().zip(run[j].point.components()) {
                    *a += v;
                }
            }
            acc.iter_mut().for_each(|a| *a /= r);
            match runs[0][j].point {
                Contrast::Scalar(_) => Contrast::Scalar(acc[0]),
                Contrast::Curve(_) => Contrast::Curve(acc),
            }
        })
        .collect()
}

fn with_seeds(cfg: &PipelineConfig, stream: &RngStream) -> PipelineConfig {
    let mut c = cfg.clone();
    c.train.seed = stream.split(0).next_u64();
    c.sim.seed = stream.split(1).next_u64();
    c
}

/// Pairs bootstrap over rows of `data`. Each resample reruns the whole
/// pipeline (standardization, both fits, simulation), averaging effect values
/// over `refits` independently seeded fits. Failed resamples are skipped; more
/// than 20% failures is an error.
pub fn bootstrap_effects(
    data: &Dataset,
    cfg: &PipelineConfig,
    boot: &BootstrapConfig,
) -> Result<BootstrapOutput> {
    boot.validate()?;
    cfg.validate(data.n_mediators())?;
    let effects = cfg.effects(data.n_mediators());
    let (fm, fy) = fit_models(data, cfg)?;
    let samples = simulate_fitted(&fm, &fy, data.covariates(), cfg)?;
    let mut estimates = estimate_effects(&samples, &effects, &cfg.functionals)?;
    drop(samples);

    let root = RngStream::new(boot.seed, BOOT_STREAM);
    let n = data.len();
    let results = par::map_indexed(boot.resamples, |r| -> Result<Vec<Contrast>> {
        let rs = root.split(r as u64);
        let mut pick = rs.split(0);
        let idx: Vec<usize> = (0..n).map(|_| pick.index(n)).collect();
        let sample = data.select_rows(&idx)?;
        let runs = (0..boot.refits)
            .map(|j| {
                let c = with_seeds(cfg, &rs.split(j as u64 + 1));
                let (fm, fy) = fit_models(&sample, &c)?;
                let sims = simulate_fitted(&fm, &fy, sample.covariates(), &c)?;
                estimate_effects(&sims, &effects, &c.functionals)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(average(&runs))
    });

    let mut replicates = Vec::new();
    let mut failures = Vec::new();
    for (r, res) in results.into_iter().enumerate() {
        match res {
            Ok(v) => replicates.push(v),
            Err(e) => failures.push((r, e.to_string())),
        }
    }
    if failures.len() * 5 > boot.resamples {
        return Err(DcmaError::Fit(format!(
            "{} of {} bootstrap resamples failed; first: {}",
            failures.len(),
            boot.resamples,
            failures[0].1
        )));
    }
    if replicates.len() < 2 {
        return Err(DcmaError::Fit("fewer than two bootstrap resamples succeeded".into()));
    }
    let meta = BootstrapMeta {
        resamples: boot.resamples,
        completed: replicates.len(),
        refits: boot.refits,
        seed: boot.seed,
        level: boot.level,
    };
    for (j, est) in estimates.iter_mut().enumerate() {
        let vals: Vec<&Contrast> = replicates.iter().map(|r| &r[j]).collect();
        est.interval = Some(percentile_interval(&vals, boot.level)?);
        est.meta = Some(meta.clone());
    }
    Ok(BootstrapOutput {
        estimates,
        replicates,
        failures,
    })
}
