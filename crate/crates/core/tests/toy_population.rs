mod common;

use std::sync::OnceLock;

use common::Target;
use synergy_decomp::data::{Dataset, FeatureFormula};
use synergy_decomp::decomposition::{
    estimate_psi, fit_nuisances, unit_contributions, CovariateEval, EstimatorKind, EstimatorOptions, FactorIntervention,
    Integration, InterventionSpec, NuisanceSet, NuisanceSpecs, Observed, Variant,
};
use synergy_decomp::model::{Family, ModelSpec};
use synergy_decomp::pipeline::{estimate, EstimationConfig};

const N: usize = 200_000;

fn big() -> &'static Dataset {
    static DS: OnceLock<Dataset> = OnceLock::new();
    DS.get_or_init(|| common::sample(N, 2024))
}

fn opts() -> EstimatorOptions {
    EstimatorOptions {
        covariate_eval: CovariateEval::GroupMarginal,
        ..Default::default()
    }
}

fn psi(kind: EstimatorKind, ds: &Dataset, nuis: &NuisanceSet) -> f64 {
    estimate_psi(kind, ds, &common::roles(), nuis, &opts()).unwrap()[0].psi
}

fn nuisances(ds: &Dataset, specs: &NuisanceSpecs, spec: &InterventionSpec) -> NuisanceSet {
    fit_nuisances(ds, &common::roles(), specs, spec, true, 5).unwrap()
}

fn group_rows(ds: &Dataset) -> Vec<usize> {
    let r = ds.column("R").unwrap().codes().unwrap();
    (0..ds.n_rows()).filter(|&i| r[i] == 1).collect()
}

fn mean_over(rows: &[usize], v: &[f64]) -> f64 {
    rows.iter().map(|&i| v[i]).sum::<f64>() / rows.len() as f64
}

#[test]
fn saturated_estimators_match_exact_summation() {
    let ds = big();
    let nuis = nuisances(ds, &common::saturated_specs(), &InterventionSpec::default());
    let joint = common::counterfactual_mean(1, Target::Joint);
    for kind in EstimatorKind::SYNERGISTIC {
        let err = psi(kind, ds, &nuis) - joint;
        assert!(err.abs() < 0.005, "{}: error {err}", kind.as_str());
    }
    let only_m = common::counterfactual_mean(1, Target::OnlyM);
    let only_a = common::counterfactual_mean(1, Target::OnlyA);
    assert!((psi(EstimatorKind::SingleFactorM, ds, &nuis) - only_m).abs() < 0.005);
    assert!((psi(EstimatorKind::SingleFactorA, ds, &nuis) - only_a).abs() < 0.005);
}

#[test]
fn augmentation_terms_vanish_with_correct_models() {
    let ds = big();
    let nuis = nuisances(ds, &common::saturated_specs(), &InterventionSpec::default());
    let obs = Observed::from_dataset(ds, &common::roles()).unwrap();
    let rows = group_rows(ds);
    let mid: Vec<f64> = (0..ds.n_rows())
        .map(|i| {
            let a = obs.a[i];
            nuis.star_a(i, a) / nuis.pi_a(i, a) * (nuis.mu_bar(i, a) - nuis.nu_breve(i, a))
        })
        .collect();
    let tail: Vec<f64> = (0..ds.n_rows())
        .map(|i| {
            let (a, m) = (obs.a[i], obs.m[i]);
            nuis.star_a(i, a) * nuis.star_m(i, m) / (nuis.pi_a(i, a) * nuis.pi_m(i, m)) * (obs.y[i] - nuis.mu_obs(i, a, m))
        })
        .collect();
    assert!(mean_over(&rows, &mid).abs() < 0.01);
    assert!(mean_over(&rows, &tail).abs() < 0.01);
}

#[test]
fn literal_variant_misses_exact_summation() {
    let ds = big();
    let joint = common::counterfactual_mean(1, Target::Joint);
    let literal = InterventionSpec {
        variant: Variant::Literal,
        ..Default::default()
    };
    let nuis = nuisances(ds, &common::saturated_specs(), &literal);
    let err = psi(EstimatorKind::Imputation, ds, &nuis) - joint;
    assert!(err.abs() > 0.02, "literal imputation error {err}");
}

#[test]
fn triply_robust_under_each_correct_model_set() {
    let ds = big();
    let joint = common::counterfactual_mean(1, Target::Joint);
    let configs = [[false, false, true, true], [true, true, false, false], [true, false, true, false]];
    let others = [EstimatorKind::Imputation, EstimatorKind::Weighting, EstimatorKind::ImpThenWeight];
    let mut fails = [false; 3];
    for correct in configs {
        let nuis = nuisances(ds, &common::specs_with(correct), &InterventionSpec::default());
        let tr = psi(EstimatorKind::TriplyRobust, ds, &nuis) - joint;
        assert!(tr.abs() < 0.01, "{correct:?}: triply robust error {tr}");
        for (k, kind) in others.iter().enumerate() {
            fails[k] |= (psi(*kind, ds, &nuis) - joint).abs() > 0.05;
        }
    }
    assert_eq!(fails, [true; 3]);
}

#[test]
fn imp_then_weight_needs_correct_outcome_model() {
    let ds = big();
    let joint = common::counterfactual_mean(1, Target::Joint);
    let nuis = nuisances(ds, &common::specs_with([true, true, false, false]), &InterventionSpec::default());
    assert!((psi(EstimatorKind::Weighting, ds, &nuis) - joint).abs() < 0.01);
    assert!((psi(EstimatorKind::ImpThenWeight, ds, &nuis) - joint).abs() > 0.05);
}

#[test]
fn equalize_to_self_gives_no_reduction() {
    let ds = big();
    let spec = InterventionSpec {
        a: FactorIntervention::Natural,
        m: FactorIntervention::Natural,
        ..Default::default()
    };
    let cfg = EstimationConfig {
        intervention: spec,
        models: common::saturated_specs(),
        estimators: EstimatorKind::SYNERGISTIC.to_vec(),
        crossfit: None,
        covariate_eval: CovariateEval::GroupMarginal,
        trim: None,
        normalize: false,
    };
    let est = estimate(ds, &common::roles(), &cfg, 3).unwrap();
    for r in &est.records {
        assert!(r.delta.abs() < 0.01, "{}: delta {}", r.estimator.as_str(), r.delta);
    }
}

#[test]
fn unit_weights_give_group_mean() {
    let ds = common::sample(5_000, 8);
    let spec = InterventionSpec {
        a: FactorIntervention::Natural,
        m: FactorIntervention::Natural,
        ..Default::default()
    };
    let nuis = nuisances(&ds, &common::saturated_specs(), &spec);
    let rows = group_rows(&ds);
    let y = ds.numeric("Y").unwrap();
    let w = psi(EstimatorKind::Weighting, &ds, &nuis);
    assert!((w - mean_over(&rows, y)).abs() < 1e-10);
}

#[test]
fn point_mass_weights_vanish_off_support() {
    let ds = common::sample(5_000, 9);
    let spec = InterventionSpec {
        a: FactorIntervention::SetValue { level: 1 },
        m: FactorIntervention::SetValue { level: 1 },
        ..Default::default()
    };
    let nuis = nuisances(&ds, &common::saturated_specs(), &spec);
    let obs = Observed::from_dataset(&ds, &common::roles()).unwrap();
    let phi = unit_contributions(EstimatorKind::Weighting, &nuis, &obs).unwrap();
    for i in 0..ds.n_rows() {
        if obs.a[i] == 0 || obs.m[i] == 0 {
            assert_eq!(phi[i], 0.0);
        } else {
            let ipw = obs.y[i] / (nuis.pi_a(i, 1) * nuis.pi_m(i, 1));
            assert!((phi[i] - ipw).abs() < 1e-9);
        }
    }
}

#[test]
fn natural_a_reduces_imp_then_weight_to_outcome_average() {
    let ds = common::sample(5_000, 10);
    let spec = InterventionSpec {
        a: FactorIntervention::Natural,
        ..Default::default()
    };
    let nuis = nuisances(&ds, &common::saturated_specs(), &spec);
    let obs = Observed::from_dataset(&ds, &common::roles()).unwrap();
    let rows = group_rows(&ds);
    let mu_bar: Vec<f64> = (0..ds.n_rows()).map(|i| nuis.mu_bar(i, obs.a[i])).collect();
    let itw = psi(EstimatorKind::ImpThenWeight, &ds, &nuis);
    assert!((itw - mean_over(&rows, &mu_bar)).abs() < 1e-10);
}

#[test]
fn inert_factor_leaves_outcome_average() {
    let ds = common::sample(5_000, 11);
    let mut specs = common::saturated_specs();
    specs.mu = ModelSpec::glm(Family::LinearGlm, FeatureFormula::parse("R + X + A + Z + C").unwrap());
    let nuis = nuisances(&ds, &specs, &InterventionSpec::default());
    let rows = group_rows(&ds);
    let obs = Observed::from_dataset(&ds, &common::roles()).unwrap();
    let mu: Vec<f64> = (0..ds.n_rows()).map(|i| nuis.mu_obs(i, obs.a[i], obs.m[i])).collect();
    let single = psi(EstimatorKind::SingleFactorM, &ds, &nuis);
    assert!((single - mean_over(&rows, &mu)).abs() < 1e-10);
}

#[test]
fn draws_agree_with_marginalization() {
    let ds = common::sample(400, 12);
    let specs = common::saturated_specs();
    let marg = nuisances(&ds, &specs, &InterventionSpec::default());
    let n_draws = 10_000;
    let drawn = nuisances(
        &ds,
        &specs,
        &InterventionSpec {
            integration: Integration::Draw { n_draws, seed: 77 },
            ..Default::default()
        },
    );
    let rows = group_rows(&ds);
    let per_draw: Vec<f64> = drawn
        .draws
        .iter()
        .map(|d| rows.iter().map(|&i| d.nu[d.a_tilde[i] as usize][i]).sum::<f64>() / rows.len() as f64)
        .collect();
    let mean = per_draw.iter().sum::<f64>() / n_draws as f64;
    let sd = (per_draw.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n_draws - 1) as f64).sqrt();
    let se = sd / (n_draws as f64).sqrt();
    let by_draws = psi(EstimatorKind::Imputation, &ds, &drawn);
    assert!((by_draws - mean).abs() < 1e-9);
    let exact = psi(EstimatorKind::Imputation, &ds, &marg);
    assert!((by_draws - exact).abs() < 3.0 * se, "draws {by_draws} vs {exact}, se {se}");
    for kind in [EstimatorKind::TriplyRobust, EstimatorKind::ImpThenWeight, EstimatorKind::SingleFactorM] {
        let d = psi(kind, &ds, &drawn) - psi(kind, &ds, &marg);
        assert!(d.abs() < 0.02, "{}: {d}", kind.as_str());
    }
}
