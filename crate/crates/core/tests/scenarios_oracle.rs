use dcma_core::estimands::EffectKind;
use dcma_core::metrics::{kde_modes, FunctionalSpec, SampleSet};
use dcma_core::numcore::linalg::cholesky;
use dcma_core::numcore::Matrix;
use dcma_core::scenarios::{generate_scenario, oracle_truth, S2Params, ScenarioParams, ScenarioSpec};

fn s2_params(spec: &ScenarioSpec) -> &S2Params {
    match &spec.params {
        ScenarioParams::S2(p) => p,
        ScenarioParams::S1(_) => unreachable!(),
    }
}

/// Mediator noise recovered from S2 data with the known mean structure.
fn s2_residuals(n: usize, seed: u64) -> Matrix {
    let spec = ScenarioSpec::s2(n, seed);
    let p = s2_params(&spec);
    let d = generate_scenario(&spec).unwrap();
    let mut e = Matrix::zeros(n, 5);
    for i in 0..n {
        let a = f64::from(d.treatment()[i]);
        let z = d.covariates()[(i, 0)];
        for j in 0..5 {
            e[(i, j)] = d.mediators()[(i, j)]
                - p.mediator_intercept[j]
                - p.mediator_treatment[j] * a
                - p.mediator_covariate[j] * z;
        }
    }
    e
}

#[test]
fn s1_mediator_mean_near_zero_covariate() {
    let d = generate_scenario(&ScenarioSpec::s1(100_000, 1)).unwrap();
    let vals: Vec<f64> = (0..d.len())
        .filter(|&i| d.treatment()[i] == 1 && d.covariates()[(i, 0)].abs() < 0.1)
        .map(|i| d.mediators()[(i, 0)])
        .collect();
    assert!(vals.len() > 3000);
    let mean = vals.iter().sum::<f64>() / vals.len() as f64;
    assert!((mean - 1.5).abs() < 0.03, "{mean}");
}

#[test]
fn s1_treated_outcome_is_bimodal() {
    let d = generate_scenario(&ScenarioSpec::s1(100_000, 2)).unwrap();
    let y: Vec<f64> = (0..d.len())
        .filter(|&i| d.treatment()[i] == 1)
        .map(|i| d.outcome()[i])
        .collect();
    let modes = kde_modes(&SampleSet::from_values(y).unwrap(), 0.3, 1024, 0.05).unwrap();
    assert_eq!(modes.len(), 2, "{modes:?}");
    // component means: intercept + 0.3 + 0.5 * 1.5 +/- (0.5 * 0.3 + 0.2) * E|Z|
    let shift = 0.35 * (2.0 / std::f64::consts::PI).sqrt();
    let low = 2.0 + 0.3 + 0.75 + shift;
    let high = 6.0 + 0.3 + 0.75 - shift;
    assert!((modes[0] - low).abs() < 0.15, "{modes:?}");
    assert!((modes[1] - high).abs() < 0.15, "{modes:?}");
}

#[test]
fn s2_noise_correlation_and_covariance() {
    let n = 100_000;
    let e = s2_residuals(n, 3);
    let cov = |a: usize, b: usize| (0..n).map(|i| e[(i, a)] * e[(i, b)]).sum::<f64>() / n as f64;
    let corr = cov(0, 1) / (cov(0, 0) * cov(1, 1)).sqrt();
    assert!((corr - 0.6).abs() < 0.02, "{corr}");
    for i in 0..5 {
        for j in 0..5 {
            let target = 0.6f64.powi((i as i32 - j as i32).abs());
            assert!((cov(i, j) - target).abs() < 0.02, "({i},{j}) {}", cov(i, j));
        }
    }
}

#[test]
fn cholesky_factor_reconstructs_the_covariance() {
    let mech = ScenarioSpec::s2(1, 0).mechanism().unwrap();
    let l = mech.noise_covariance_factor().unwrap();
    let llt = l.matmul(&l.transpose()).unwrap();
    for i in 0..5 {
        for j in 0..5 {
            let target = 0.6f64.powi((i as i32 - j as i32).abs());
            assert!((llt[(i, j)] - target).abs() < 1e-10);
            if j > i {
                assert_eq!(l[(i, j)], 0.0);
            }
        }
    }
    let direct = cholesky(&llt).unwrap();
    for (x, y) in direct.as_slice().iter().zip(l.as_slice()) {
        assert!((x - y).abs() < 1e-10);
    }
}

#[test]
fn generation_is_a_pure_function_of_the_spec() {
    let spec = ScenarioSpec::s2(500, 9);
    assert_eq!(generate_scenario(&spec).unwrap(), generate_scenario(&spec).unwrap());
    assert_ne!(
        generate_scenario(&spec).unwrap(),
        generate_scenario(&spec.with_seed(10)).unwrap()
    );
}

#[test]
fn null_scenario_oracle_is_zero() {
    let f = [FunctionalSpec::Mean];
    for spec in [ScenarioSpec::s1(1, 4), ScenarioSpec::s2(1, 4)] {
        let truth = oracle_truth(&spec.without_treatment_effects(), 20_000, 50, &f).unwrap();
        for e in &truth.entries {
            let v = e.value.scalar().unwrap();
            assert!(v.abs() < 0.02, "{} {}: {v}", spec.id(), e.effect);
        }
    }
}

#[test]
fn oracle_is_reproducible_and_stable_across_seeds() {
    let f = [FunctionalSpec::Mean, FunctionalSpec::Ed];
    let small = ScenarioSpec::s2(1, 5);
    assert_eq!(
        oracle_truth(&small, 300, 10, &f).unwrap(),
        oracle_truth(&small, 300, 10, &f).unwrap()
    );

    let a = oracle_truth(&ScenarioSpec::s1(1, 11), 100_000, 200, &f).unwrap();
    let b = oracle_truth(&ScenarioSpec::s1(1, 12), 100_000, 200, &f).unwrap();
    for kind in EffectKind::all(&[1]) {
        for (func, tol) in [(FunctionalSpec::Mean, 0.02), (FunctionalSpec::Ed, 0.03)] {
            let x = a.scalar(kind, &func).unwrap();
            let y = b.scalar(kind, &func).unwrap();
            assert!((x - y).abs() < tol, "{kind} {func:?}: {x} vs {y}");
        }
    }
    let ide_mean = a.scalar(EffectKind::Ide, &FunctionalSpec::Mean).unwrap();
    let ide_ed = a.scalar(EffectKind::Ide, &FunctionalSpec::Ed).unwrap();
    assert!(ide_mean.abs() < 0.03 && ide_ed > 0.2, "{ide_mean} {ide_ed}");
}
