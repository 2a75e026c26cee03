use std::io::Write;

use dcma_core::estimands::{
    bootstrap_effects, effects_to_json, run_pipeline, write_effects_csv, EffectEstimate, OutcomeModel,
};
use dcma_core::genmodel::{save_checkpoint, Dataset};
use dcma_core::metrics::Contrast;
use dcma_core::scenarios::{
    generate_scenario, oracle_truth, run_replication_study, Method, OracleTruth, ScenarioSpec,
    StudyConfig, StudyResult,
};
use dcma_core::simulate::write_regimes_csv;

use crate::config::{derive_seed, RunConfig, Source};
use crate::data::{load_dataset, write_dataset};
use crate::error::CliError;
use crate::output::OutputDir;

pub const RESOLVED_CONFIG: &str = "config.resolved.toml";

fn derived_seed(cfg: &RunConfig, k: u64) -> u64 {
    derive_seed(cfg.seed, k)
}

fn require_scenario(cfg: &RunConfig, command: &str) -> Result<ScenarioSpec, CliError> {
    cfg.scenario()?.ok_or_else(|| {
        CliError::config(format!(
            "{command} requires a scenario source with a known mechanism, not CSV data"
        ))
    })
}

fn open_output(cfg: &RunConfig) -> Result<OutputDir, CliError> {
    let out = OutputDir::open(&cfg.out_dir())?;
    out.write(RESOLVED_CONFIG, &cfg.to_toml()?)?;
    Ok(out)
}

pub fn simulate(cfg: &RunConfig) -> Result<(), CliError> {
    let spec = require_scenario(cfg, "simulate")?;
    let out = open_output(cfg)?;
    if cfg.study.reps > 1 {
        let truth = compute_truth(cfg, &spec, &out)?;
        let study = StudyConfig {
            reps: cfg.study.reps,
            methods: vec![Method::DcmaEs],
            pipeline: cfg.pipeline(),
            seed: derived_seed(cfg, 5),
            reference: None,
        };
        let result = run_study(&spec, &study, &truth)?;
        write_study(&out, &result)?;
        print_study(&result);
        return Ok(());
    }
    eprintln!("generating {} data, n = {}", spec.id(), spec.n);
    let data = generate_scenario(&spec)?;
    out.write_with("data.csv", |w| write_dataset(&data, w))?;
    estimate_on(&data, cfg, &out)
}

pub fn estimate(cfg: &RunConfig) -> Result<(), CliError> {
    let data = match &cfg.source {
        Source::Csv { path, columns } => load_dataset(path, columns)?,
        Source::Scenario { .. } => generate_scenario(&require_scenario(cfg, "estimate")?)?,
    };
    cfg.pipeline().validate(data.n_mediators())?;
    let out = open_output(cfg)?;
    if matches!(cfg.source, Source::Scenario { .. }) {
        out.write_with("data.csv", |w| write_dataset(&data, w))?;
    }
    estimate_on(&data, cfg, &out)
}

fn estimate_on(data: &Dataset, cfg: &RunConfig, out: &OutputDir) -> Result<(), CliError> {
    let pipeline = cfg.pipeline();
    pipeline.validate(data.n_mediators())?;
    eprintln!(
        "fitting generators on {} rows ({} mediators) and simulating B = {}",
        data.len(),
        data.n_mediators(),
        pipeline.sim.b
    );
    let fit = run_pipeline(data, &pipeline)?;
    save_checkpoint(&fit.fm, &out.path("fm.ckpt"))?;
    match &fit.fy {
        OutcomeModel::Generator(g) => save_checkpoint(g, &out.path("fy.ckpt"))?,
        OutcomeModel::LinearGaussian(l) => out.write(
            "fy.json",
            &serde_json::to_string_pretty(l).map_err(|e| CliError::runtime(e.to_string()))?,
        )?,
    }
    if cfg.write_regimes {
        out.write_with("regimes.csv", |w| Ok(write_regimes_csv(&fit.samples, w)?))?;
    }
    let effects = match &cfg.bootstrap {
        Some(boot) => {
            eprintln!("bootstrap: {} resamples x {} refits", boot.resamples, boot.refits);
            let b = bootstrap_effects(data, &pipeline, boot)?;
            if !b.failures.is_empty() {
                eprintln!("warning: {} bootstrap resamples failed", b.failures.len());
            }
            b.estimates
        }
        None => fit.effects,
    };
    out.write("effects.json", &effects_to_json(&effects)?)?;
    out.write_with("effects.csv", |w| Ok(write_effects_csv(&effects, w)?))?;
    print_effects(&effects);
    Ok(())
}

fn compute_truth(cfg: &RunConfig, spec: &ScenarioSpec, out: &OutputDir) -> Result<OracleTruth, CliError> {
    eprintln!(
        "oracle truth for {}: n = {}, B = {}",
        spec.id(),
        cfg.oracle.n,
        cfg.oracle.b
    );
    let truth = oracle_truth(
        &spec.with_seed(derived_seed(cfg, 4)),
        cfg.oracle.n,
        cfg.oracle.b,
        &cfg.functionals,
    )?;
    out.write("truth.json", &to_json(&truth)?)?;
    Ok(truth)
}

pub fn oracle(cfg: &RunConfig) -> Result<(), CliError> {
    let spec = require_scenario(cfg, "oracle")?;
    let out = open_output(cfg)?;
    let truth = compute_truth(cfg, &spec, &out)?;
    let mut stdout = std::io::stdout().lock();
    for e in &truth.entries {
        let _ = writeln!(stdout, "{:<8} {:<28} {}", e.effect, functional_label(&e.functional), fmt_contrast(&e.value));
    }
    Ok(())
}

pub fn ablation(cfg: &RunConfig) -> Result<(), CliError> {
    let spec = require_scenario(cfg, "ablation")?;
    let out = open_output(cfg)?;
    let truth = compute_truth(cfg, &spec, &out)?;
    let study = StudyConfig {
        reps: cfg.study.reps,
        methods: vec![Method::DcmaEs, Method::LinearGaussianAblation],
        pipeline: cfg.pipeline(),
        seed: derived_seed(cfg, 5),
        reference: Some((cfg.study.reference_n, cfg.study.reference_b)),
    };
    let result = run_study(&spec, &study, &truth)?;
    write_study(&out, &result)?;
    print_study(&result);
    Ok(())
}

fn run_study(spec: &ScenarioSpec, study: &StudyConfig, truth: &OracleTruth) -> Result<StudyResult, CliError> {
    eprintln!(
        "{} replications of {} at n = {}",
        study.reps,
        spec.id(),
        spec.n
    );
    let result = run_replication_study(spec, study, truth, |rep, method, _, _| {
        eprintln!("  replication {rep} ({}) done", method.name());
    })?;
    for (rep, msg) in &result.failures {
        eprintln!("warning: replication {rep} failed: {msg}");
    }
    Ok(result)
}

fn write_study(out: &OutputDir, result: &StudyResult) -> Result<(), CliError> {
    out.write_with("bias_rmse.csv", |w| Ok(result.write_csv(w)?))?;
    out.write("study.json", &to_json(result)?)
}

fn to_json<T: serde::Serialize>(v: &T) -> Result<String, CliError> {
    serde_json::to_string_pretty(v).map_err(|e| CliError::runtime(format!("cannot serialize: {e}")))
}

fn functional_label(f: &dcma_core::metrics::FunctionalSpec) -> String {
    serde_json::to_string(f).unwrap_or_default()
}

fn fmt_contrast(c: &Contrast) -> String {
    match c {
        Contrast::Scalar(v) => format!("{v:.4}"),
        Contrast::Curve(v) => {
            let parts: Vec<String> = v.iter().map(|x| format!("{x:.3}")).collect();
            format!("[{}]", parts.join(", "))
        }
    }
}

fn print_effects(effects: &[EffectEstimate]) {
    let mut stdout = std::io::stdout().lock();
    for e in effects {
        let interval = match &e.interval {
            Some((lo, hi)) => format!("  ({}, {})", fmt_contrast(lo), fmt_contrast(hi)),
            None => String::new(),
        };
        let _ = writeln!(
            stdout,
            "{:<8} {:<28} {}{interval}",
            e.effect,
            functional_label(&e.functional),
            fmt_contrast(&e.point)
        );
    }
}

fn print_study(result: &StudyResult) {
    let mut stdout = std::io::stdout().lock();
    let _ = writeln!(stdout, "{:<26} {:<10} {:<8} {:>9} {:>9} {:>9}", "method", "functional", "effect", "truth", "bias", "rmse");
    for r in &result.rows {
        let _ = writeln!(
            stdout,
            "{:<26} {:<10} {:<8} {:>9.4} {:>9.4} {:>9.4}",
            r.method.name(),
            r.functional,
            r.effect,
            r.truth,
            r.bias,
            r.rmse
        );
    }
    for r in &result.regime_ed {
        let _ = writeln!(stdout, "regime ED {:<26} {:<16} {:.4}", r.method.name(), r.regime, r.mean_ed);
    }
}
