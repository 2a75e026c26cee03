use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dcma_core::estimands::{effects_from_json, EffectKind};
use dcma_core::genmodel::load_checkpoint;
use dcma_core::metrics::FunctionalSpec;
use dcma_core::scenarios::OracleTruth;

const TINY: &str = r#"
seed = 11
functionals = [{ kind = "mean" }, { kind = "ed" }]

[source]
kind = "scenario"
id = "S1"
n = 300

[train]
epochs = 3
mediator_hidden = [8]
outcome_hidden = [8]

[sim]
b = 10

[oracle]
n = 2000
b = 20
"#;

fn dcma(args: &[&str], dir: &Path) -> Output {
    dcma_env(args, dir, None)
}

fn dcma_env(args: &[&str], dir: &Path, threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_dcma"));
    cmd.args(args).current_dir(dir);
    if let Some(t) = threads {
        cmd.env("RAYON_NUM_THREADS", t);
    }
    cmd.output().unwrap()
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn csv_config(data: &Path) -> String {
    format!(
        r#"
seed = 11
functionals = [{{ kind = "mean" }}, {{ kind = "ed" }}]

[source]
kind = "csv"
path = "{}"

[source.columns]
treatment = "A"
mediators = ["M1"]
outcome = "Y"
covariates = ["Z1"]

[train]
epochs = 3
mediator_hidden = [8]
outcome_hidden = [8]

[sim]
b = 10
"#,
        data.display()
    )
}

#[test]
fn simulate_writes_parseable_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "run.toml", TINY);
    let o = dcma(&["simulate", "--config", cfg.to_str().unwrap(), "--out", "out"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let out = dir.path().join("out");
    for f in ["data.csv", "fm.ckpt", "fy.ckpt", "effects.json", "effects.csv", "regimes.csv", "config.resolved.toml"] {
        assert!(out.join(f).exists(), "{f}");
    }
    assert!(!out.join("dcma.lock").exists());
    let effects = effects_from_json(&std::fs::read_to_string(out.join("effects.json")).unwrap()).unwrap();
    assert_eq!(effects.len(), 3 * 2);
    load_checkpoint(&out.join("fm.ckpt")).unwrap();
    load_checkpoint(&out.join("fy.ckpt")).unwrap();
    let data = std::fs::read_to_string(out.join("data.csv")).unwrap();
    assert!(data.starts_with("A,Z1,M1,Y\n"));
    assert_eq!(data.lines().count(), 301);
    let regimes = std::fs::read_to_string(out.join("regimes.csv")).unwrap();
    assert!(regimes.starts_with("regime,i,b,y\n"));
    assert_eq!(regimes.lines().count(), 1 + 5 * 300 * 10);
    assert!(effects.iter().all(|e| e.interval.is_none()));

    // the resolved config reruns to the same effects
    let again = dcma(
        &["simulate", "--config", "out/config.resolved.toml", "--out", "out2"],
        dir.path(),
    );
    assert!(again.status.success(), "{}", stderr(&again));
    assert_eq!(
        std::fs::read(out.join("effects.json")).unwrap(),
        std::fs::read(dir.path().join("out2/effects.json")).unwrap()
    );
}

#[test]
fn estimate_on_simulated_csv_reproduces_effects_and_leaves_input_alone() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "run.toml", TINY);
    let o = dcma(&["simulate", "--config", cfg.to_str().unwrap(), "--out", "sim"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let data = dir.path().join("sim/data.csv");
    let before = std::fs::read(&data).unwrap();
    let ecfg = write_config(dir.path(), "est.toml", &csv_config(&data));
    let o = dcma(&["estimate", "--config", ecfg.to_str().unwrap(), "--out", "est"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(std::fs::read(&data).unwrap(), before);
    assert!(!dir.path().join("est/data.csv").exists());

    let read = |p: &str| effects_from_json(&std::fs::read_to_string(dir.path().join(p)).unwrap()).unwrap();
    let (sim, est) = (read("sim/effects.json"), read("est/effects.json"));
    for (a, b) in sim.iter().zip(&est) {
        assert_eq!((a.effect, &a.functional), (b.effect, &b.functional));
        if a.functional == FunctionalSpec::Mean {
            let d = a.point.scalar().unwrap() - b.point.scalar().unwrap();
            assert!(d.abs() < 0.05, "{}: {d}", a.effect);
        }
    }
}

#[test]
fn bootstrap_adds_intervals() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{TINY}\n[bootstrap]\nresamples = 4\n").replace("n = 300", "n = 120");
    let cfg = write_config(dir.path(), "run.toml", &text);
    let o = dcma(&["simulate", "--config", cfg.to_str().unwrap(), "--out", "out"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let effects = effects_from_json(&std::fs::read_to_string(dir.path().join("out/effects.json")).unwrap()).unwrap();
    for e in &effects {
        let (lo, hi) = e.interval.as_ref().unwrap();
        assert!(lo.scalar().unwrap() <= hi.scalar().unwrap());
        assert_eq!(e.meta.as_ref().unwrap().resamples, 4);
    }
    let csv = std::fs::read_to_string(dir.path().join("out/effects.csv")).unwrap();
    let row: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
    assert!(!row[4].is_empty() && !row[5].is_empty(), "{row:?}");
}

#[test]
fn effects_are_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "run.toml", TINY);
    let c = cfg.to_str().unwrap();
    for (threads, out) in [("1", "t1"), ("4", "t4"), ("1", "t1b")] {
        let o = dcma_env(&["simulate", "--config", c, "--out", out], dir.path(), Some(threads));
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let read = |p: &str| std::fs::read(dir.path().join(p).join("effects.json")).unwrap();
    assert_eq!(read("t1"), read("t4"));
    assert_eq!(read("t1"), read("t1b"));
    let o = dcma(&["simulate", "--config", c, "--out", "s5", "--seed", "5"], dir.path());
    assert!(o.status.success());
    assert_ne!(read("t1"), read("s5"));
}

#[test]
fn invalid_tau_exits_with_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let text = TINY.replace(r#"{ kind = "ed" }"#, r#"{ kind = "quantile", tau = 1.2 }"#);
    let cfg = write_config(dir.path(), "run.toml", &text);
    let o = dcma(&["simulate", "--config", cfg.to_str().unwrap(), "--out", "out"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("functionals[1].tau"), "{}", stderr(&o));
}

fn estimate_csv(contents: &str) -> Output {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.csv");
    std::fs::write(&data, contents).unwrap();
    let cfg = write_config(dir.path(), "est.toml", &csv_config(&data));
    dcma(&["estimate", "--config", cfg.to_str().unwrap(), "--out", "out"], dir.path())
}

#[test]
fn csv_data_errors_exit_with_code_2() {
    let o = estimate_csv("A,Z1,M1,Y\n");
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("empty dataset"), "{}", stderr(&o));

    let o = estimate_csv("A,Z1,M1,Y\n1,0.1,0.2,1\n2,0.1,0.2,1\n");
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("must be 0 or 1"), "{}", stderr(&o));

    let o = estimate_csv("A,Z1,M1,Y\n1,0.1,,1\n0,0.1,0.2,1\n1,0.3,0.2,\n");
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("rows 1, 3"), "{}", stderr(&o));

    let o = estimate_csv("A,Z1,M1,Y\n1,0.1,0.2,1\n0,zero,0.2,1\n");
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("row 2, column 'Z1'"), "{}", stderr(&o));

    let o = estimate_csv("A,M1,Y\n1,0.2,1\n");
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn oracle_requires_a_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.csv");
    std::fs::write(&data, "A,Z1,M1,Y\n1,0,0,0\n").unwrap();
    let cfg = write_config(dir.path(), "o.toml", &csv_config(&data));
    let o = dcma(&["oracle", "--config", cfg.to_str().unwrap(), "--out", "out"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("known mechanism"), "{}", stderr(&o));
}

#[test]
fn oracle_truth_values_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let s1 = TINY.replace("n = 2000\nb = 20", "n = 100000\nb = 200");
    let cfg = write_config(dir.path(), "s1.toml", &s1);
    let o = dcma(&["oracle", "--config", cfg.to_str().unwrap(), "--out", "s1"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let read = |p: &str| -> OracleTruth {
        serde_json::from_str(&std::fs::read_to_string(dir.path().join(p)).unwrap()).unwrap()
    };
    let truth = read("s1/truth.json");
    assert_eq!((truth.meta.n_oracle, truth.meta.b_oracle), (100_000, 200));
    let ite = truth.scalar(EffectKind::Ite, &FunctionalSpec::Mean).unwrap();
    assert!((ite - 0.498).abs() < 0.02, "{ite}");

    let s2 = TINY
        .replace(r#"id = "S1""#, r#"id = "S2""#)
        .replace("n = 2000\nb = 20", "n = 20000\nb = 100");
    let cfg = write_config(dir.path(), "s2.toml", &s2);
    for out in ["s2a", "s2b"] {
        let o = dcma(&["oracle", "--config", cfg.to_str().unwrap(), "--out", out], dir.path());
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let ide = read("s2a/truth.json").scalar(EffectKind::Ide, &FunctionalSpec::Mean).unwrap();
    assert!((ide - 0.599).abs() < 0.03, "{ide}");
    assert_eq!(
        std::fs::read(dir.path().join("s2a/truth.json")).unwrap(),
        std::fs::read(dir.path().join("s2b/truth.json")).unwrap()
    );
}

#[test]
fn replication_study_writes_bias_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "run.toml", &TINY.replace("n = 300", "n = 150"));
    let o = dcma(
        &["simulate", "--config", cfg.to_str().unwrap(), "--out", "out", "--reps", "2"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let table = std::fs::read_to_string(dir.path().join("out/bias_rmse.csv")).unwrap();
    let mut lines = table.lines();
    assert_eq!(lines.next(), Some("method,functional,params,metric,effect,value"));
    let rows: Vec<&str> = lines.collect();
    // 3 effects x 2 functionals x {truth, mean, bias, rmse}
    assert_eq!(rows.len(), 3 * 2 * 4);
    assert!(rows.iter().all(|r| r.starts_with("dcma_es,")));
    assert!(dir.path().join("out/truth.json").exists());
}

#[test]
fn ablation_reports_per_regime_distances() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{TINY}\n[study]\nreps = 2\nreference_n = 500\nreference_b = 10\n").replace("n = 300", "n = 150");
    let cfg = write_config(dir.path(), "run.toml", &text);
    let o = dcma(&["ablation", "--config", cfg.to_str().unwrap(), "--out", "out"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let table = std::fs::read_to_string(dir.path().join("out/bias_rmse.csv")).unwrap();
    assert!(table.contains("linear_gaussian_ablation,"));
    assert!(table.lines().any(|l| l.contains("regime_ed")));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("regime ED"));
}

#[test]
fn locked_output_directory_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "run.toml", TINY);
    std::fs::create_dir(dir.path().join("out")).unwrap();
    std::fs::write(dir.path().join("out/dcma.lock"), "1").unwrap();
    let o = dcma(&["simulate", "--config", cfg.to_str().unwrap(), "--out", "out"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("locked"), "{}", stderr(&o));
}
