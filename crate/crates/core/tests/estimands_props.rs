use std::collections::BTreeMap;

use dcma_core::estimands::{
    bootstrap_effects, compute_effect, effects_from_json, effects_to_json, quantile_effect_curve,
    run_pipeline, write_effects_csv, BootstrapConfig, EffectKind, OutcomeModelKind, PipelineConfig,
};
use dcma_core::genmodel::{ColumnNames, ConstantColumnPolicy, Dataset, TrainConfig};
use dcma_core::metrics::{Contrast, FunctionalSpec};
use dcma_core::numcore::{sample_standard_normal, Matrix, RngStream};
use dcma_core::simulate::{InterventionalSamples, Provenance, RegimeLabel, SimConfig, SimulationOutput};
use proptest::prelude::*;

fn samples(pairs: &[(RegimeLabel, &Matrix)]) -> SimulationOutput {
    let provenance = Provenance {
        master_seed: 0,
        mediator_model: "test".into(),
        outcome_model: "test".into(),
    };
    pairs
        .iter()
        .map(|&(regime, draws)| {
            (
                regime,
                InterventionalSamples {
                    regime,
                    draws: draws.clone(),
                    provenance: provenance.clone(),
                },
            )
        })
        .collect::<BTreeMap<_, _>>()
}

fn signed_functionals() -> Vec<FunctionalSpec> {
    vec![
        FunctionalSpec::Mean,
        FunctionalSpec::Quantile { tau: 0.3 },
        FunctionalSpec::Exceedance { threshold: 0.2 },
        FunctionalSpec::DtePoint { threshold: -0.1 },
        FunctionalSpec::QteCurve { taus: vec![0.1, 0.5, 0.9] },
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn swapping_the_regime_pair_negates_or_preserves(
        n in 1usize..6,
        b in 2usize..6,
        seed in any::<u64>(),
        shift in -2.0f64..2.0,
    ) {
        let mut rs = RngStream::root(seed);
        let p = sample_standard_normal(&mut rs, n, b);
        let mut q = sample_standard_normal(&mut rs, n, b);
        q.as_mut_slice().iter_mut().for_each(|v| *v += shift);
        let fwd = samples(&[(RegimeLabel::Treated, &p), (RegimeLabel::Control, &q)]);
        let rev = samples(&[(RegimeLabel::Treated, &q), (RegimeLabel::Control, &p)]);
        for f in signed_functionals() {
            let x = compute_effect(&fwd, EffectKind::Ite, &f).unwrap().point;
            let y = compute_effect(&rev, EffectKind::Ite, &f).unwrap().point;
            prop_assert_eq!(x.components().len(), y.components().len());
            for (a, b) in x.components().iter().zip(y.components()) {
                prop_assert_eq!(*a, -b, "{:?}", f);
            }
        }
        for f in [FunctionalSpec::Ed, FunctionalSpec::W1] {
            let x = compute_effect(&fwd, EffectKind::Ite, &f).unwrap().point.scalar().unwrap();
            let y = compute_effect(&rev, EffectKind::Ite, &f).unwrap().point.scalar().unwrap();
            prop_assert!((x - y).abs() <= 1e-12 * (1.0 + x.abs()));
            prop_assert!(x >= 0.0);
        }
    }

    #[test]
    fn mean_effect_is_the_difference_of_grand_means(
        n in 1usize..20,
        b in 2usize..20,
        seed in any::<u64>(),
    ) {
        let mut rs = RngStream::root(seed);
        let p = sample_standard_normal(&mut rs, n, b);
        let q = sample_standard_normal(&mut rs, n, b);
        let s = samples(&[(RegimeLabel::Treated, &p), (RegimeLabel::Control, &q)]);
        let v = compute_effect(&s, EffectKind::Ite, &FunctionalSpec::Mean).unwrap().point.scalar().unwrap();
        let grand = |m: &Matrix| m.as_slice().iter().sum::<f64>() / (n * b) as f64;
        prop_assert!((v - (grand(&p) - grand(&q))).abs() < 1e-12);
    }
}

#[test]
fn identical_regimes_give_zero_effects() {
    let p = sample_standard_normal(&mut RngStream::root(1), 4, 9);
    let s = samples(&[(RegimeLabel::IpseTreated(2), &p), (RegimeLabel::IpseControl(2), &p)]);
    for f in signed_functionals().into_iter().chain([FunctionalSpec::Ed, FunctionalSpec::W1]) {
        let e = compute_effect(&s, EffectKind::Ipse(2), &f).unwrap();
        assert!(e.point.components().iter().all(|&v| v == 0.0), "{f:?}");
    }
}

#[test]
fn shifted_regime_gives_flat_quantile_curve() {
    let p = sample_standard_normal(&mut RngStream::root(2), 10, 30);
    let mut q = p.clone();
    q.as_mut_slice().iter_mut().for_each(|v| *v -= 2.0);
    let s = samples(&[(RegimeLabel::Treated, &p), (RegimeLabel::Control, &q)]);
    let taus: Vec<f64> = (1..10).map(|k| k as f64 / 10.0).collect();
    let curve = quantile_effect_curve(&s, EffectKind::Ite, &taus).unwrap();
    assert_eq!(curve.point.components().len(), 9);
    for v in curve.point.components() {
        assert!((v - 2.0).abs() < 1e-12);
    }
    assert!(quantile_effect_curve(&s, EffectKind::Ite, &[]).is_err());
}

#[test]
fn missing_regime_is_named() {
    let p = Matrix::zeros(2, 2);
    let s = samples(&[(RegimeLabel::Treated, &p)]);
    let e = compute_effect(&s, EffectKind::Ide, &FunctionalSpec::Mean).unwrap_err();
    assert!(e.to_string().contains("Y(1,M0)"), "{e}");
}

/// `M = 0.5 + A + 0.3 Z + 0.5 ε`, `Y = 1 + 0.5 A + 0.5 M + 0.2 Z + ε`.
fn linear_data(n: usize, seed: u64) -> Dataset {
    let mut rs = RngStream::new(seed, 7);
    let mut a = Vec::new();
    let mut z = Vec::new();
    let mut m = Vec::new();
    let mut y = Vec::new();
    for _ in 0..n {
        let ai = u8::from(rs.bernoulli(0.5));
        let zi = rs.standard_normal();
        let mi = 0.5 + f64::from(ai) + 0.3 * zi + 0.5 * rs.standard_normal();
        a.push(ai);
        z.push(zi);
        m.push(mi);
        y.push(1.0 + 0.5 * f64::from(ai) + 0.5 * mi + 0.2 * zi + rs.standard_normal());
    }
    Dataset::new(
        a,
        Matrix::column_vector(z).unwrap(),
        Matrix::column_vector(m).unwrap(),
        y,
        ColumnNames::default_for(1, 1),
    )
    .unwrap()
}

fn quick_cfg() -> PipelineConfig {
    PipelineConfig {
        train: TrainConfig {
            epochs: 15,
            batch_size: 128,
            learning_rate: 5e-3,
            mediator_hidden: vec![16],
            outcome_hidden: vec![16],
            ..Default::default()
        },
        sim: SimConfig {
            b: 20,
            ..Default::default()
        },
        functionals: vec![
            FunctionalSpec::Mean,
            FunctionalSpec::QteCurve { taus: vec![0.25, 0.5, 0.75] },
        ],
        outcome_model: OutcomeModelKind::LinearGaussian,
    }
}

fn boot(resamples: usize) -> BootstrapConfig {
    BootstrapConfig {
        resamples,
        seed: 3,
        ..Default::default()
    }
}

#[test]
fn bootstrap_is_deterministic_and_intervals_nest() {
    let data = linear_data(400, 1);
    let a = bootstrap_effects(&data, &quick_cfg(), &boot(20)).unwrap();
    let b = bootstrap_effects(&data, &quick_cfg(), &boot(20)).unwrap();
    assert_eq!(a.estimates, b.estimates);
    assert_eq!(a.replicates.len(), 20);
    assert!(a.failures.is_empty());
    for (idx, e) in a.estimates.iter().enumerate() {
        let (lo, hi) = e.interval.as_ref().unwrap();
        let (lo50, hi50) = a.interval_at(idx, 0.5).unwrap();
        for k in 0..lo.components().len() {
            assert!(lo.components()[k] <= hi.components()[k]);
            assert!(lo.components()[k] <= lo50.components()[k]);
            assert!(hi50.components()[k] <= hi.components()[k]);
        }
        let meta = e.meta.as_ref().unwrap();
        assert_eq!((meta.resamples, meta.completed, meta.seed), (20, 20, 3));
    }

    // the point estimate is the full-data pipeline
    let full = run_pipeline(&data, &quick_cfg()).unwrap();
    for (x, y) in full.effects.iter().zip(&a.estimates) {
        assert_eq!(x.point, y.point);
    }

    let text = effects_to_json(&a.estimates).unwrap();
    assert_eq!(effects_from_json(&text).unwrap(), a.estimates);
    let mut csv = Vec::new();
    write_effects_csv(&a.estimates, &mut csv).unwrap();
    let csv = String::from_utf8(csv).unwrap();
    assert!(csv.starts_with("effect,functional,params,point,lower,upper\n"));
    // 3 effects: one mean row plus three curve rows each
    assert_eq!(csv.lines().count(), 1 + 3 * 4);
}

#[test]
fn constant_outcome_gives_a_degenerate_interval() {
    let base = linear_data(200, 2);
    let data = Dataset::new(
        base.treatment().to_vec(),
        base.covariates().clone(),
        base.mediators().clone(),
        vec![3.0; 200],
        ColumnNames::default_for(1, 1),
    )
    .unwrap();
    let mut cfg = quick_cfg();
    cfg.train.constant_columns = ConstantColumnPolicy::UnitScale;
    cfg.functionals = vec![FunctionalSpec::Mean];
    let out = bootstrap_effects(&data, &cfg, &boot(2)).unwrap();
    for e in &out.estimates {
        let (lo, hi) = e.interval.as_ref().unwrap();
        for v in [&e.point, lo, hi] {
            assert!(v.scalar().unwrap().abs() < 1e-9, "{}: {v:?}", e.effect);
        }
    }
}

#[test]
fn interval_width_shrinks_with_sample_size() {
    let width = |n: usize| {
        let out = bootstrap_effects(&linear_data(n, 4), &quick_cfg(), &boot(30)).unwrap();
        let e = &out.estimates[0];
        assert_eq!((e.effect, &e.functional), (EffectKind::Ite, &FunctionalSpec::Mean));
        let (lo, hi) = e.interval.as_ref().unwrap();
        hi.scalar().unwrap() - lo.scalar().unwrap()
    };
    let (small, large) = (width(1000), width(4000));
    assert!(large < small, "{large} vs {small}");
}

#[test]
fn bootstrap_rejects_bad_configs() {
    let data = linear_data(50, 5);
    let bad = BootstrapConfig {
        resamples: 1,
        ..Default::default()
    };
    assert!(bootstrap_effects(&data, &quick_cfg(), &bad).is_err());
    assert!(matches!(Contrast::Scalar(1.0).scalar(), Some(v) if v == 1.0));
}
