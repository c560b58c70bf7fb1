use qre_core::estimation::{self, bootstrap_around, raw_from_params};
use qre_core::synth::Marginal;
use qre_core::{
    fit_em, generate, quantal_response, CovariateSpec, Error, EstimationConfig, GameKind,
    Observation, PayoffParams,
};

fn truth() -> PayoffParams {
    PayoffParams::from_theta([0.35, -0.45, 0.2, 0.6, -0.4, 0.15, 0.3], 5.0)
}

fn sample(params: &PayoffParams, spec: &CovariateSpec, n: usize, seed: u64) -> Vec<Observation> {
    generate(params, spec, n, seed)
        .unwrap()
        .into_iter()
        .map(|r| r.observation)
        .collect()
}

fn wide_spec() -> CovariateSpec {
    CovariateSpec {
        v_s: Marginal::Uniform { lo: 0.5, hi: 6.0 },
        v_r: Marginal::Uniform { lo: 0.5, hi: 6.0 },
        d_s: Marginal::Uniform { lo: 1.0, hi: 4.0 },
        d_r: Marginal::Uniform { lo: 1.0, hi: 4.0 },
        n_group_weights: vec![1.0; 4],
    }
}

#[test]
fn vehicle_ebike_recovery_at_5000() {
    let data = sample(
        &truth(),
        &CovariateSpec::default_for(GameKind::VehicleEbike),
        5000,
        3,
    );
    let fit = fit_em(&data, &EstimationConfig::default()).unwrap();
    assert!(fit.converged);
    let want = truth().normalized();
    let cos: f64 = fit
        .params
        .theta()
        .iter()
        .zip(want.theta())
        .map(|(a, b)| a * b)
        .sum();
    assert!(cos >= 0.98, "cosine {cos}");
    assert!(
        (fit.params.lambda / want.lambda - 1.0).abs() <= 0.15,
        "λ {}",
        fit.params.lambda
    );
    assert!((fit.params.theta_norm() - 1.0).abs() < 1e-12);
}

#[test]
fn coin_flip_data_gives_small_lambda() {
    let coin = PayoffParams::from_theta([0.0; 7], 0.0);
    let data = sample(&coin, &wide_spec(), 5000, 17);
    let fit = fit_em(&data, &EstimationConfig::default()).unwrap();
    assert!(fit.params.lambda < 0.2, "λ {}", fit.params.lambda);
    let floor = 2.0 * data.len() as f64 * 0.5f64.ln();
    assert!((fit.log_lik - floor).abs() <= 0.01 * floor.abs());
    assert!(fit.log_lik >= floor);
}

#[test]
fn fitted_probabilities_satisfy_the_equilibrium_condition() {
    let cfg = EstimationConfig::default();
    let data = sample(
        &truth(),
        &CovariateSpec::default_for(GameKind::VehiclePedestrian),
        2000,
        5,
    );
    let fit = fit_em(&data, &cfg).unwrap();
    assert!(fit.converged);
    let worst = data
        .iter()
        .zip(&fit.fitted)
        .map(|(obs, p)| {
            quantal_response(obs, &fit.params, *p)
                .unwrap()
                .max_abs_diff(p)
        })
        .fold(0.0, f64::max);
    assert!(worst <= cfg.outer_tol, "residual {worst}");
}

#[test]
fn reported_likelihood_matches_recomputation() {
    let data = sample(
        &truth(),
        &CovariateSpec::default_for(GameKind::EbikePedestrian),
        1000,
        8,
    );
    let fit = fit_em(&data, &EstimationConfig::default()).unwrap();
    let (ll, ll_s, ll_r) = estimation::log_likelihood(&data, &fit.params, &fit.fitted).unwrap();
    assert!((ll - fit.log_lik).abs() < 1e-9);
    assert!((ll_s + ll_r - ll).abs() < 1e-9);
    let raw = raw_from_params(&fit.params);
    for (a, b) in raw.iter().zip(&fit.raw_coefficients) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn bootstrap_is_reproducible_and_seed_sensitive() {
    let data = sample(
        &truth(),
        &CovariateSpec::default_for(GameKind::VehicleEbike),
        800,
        9,
    );
    let cfg = EstimationConfig {
        bootstrap_reps: 10,
        seed: 4,
        ..EstimationConfig::default()
    };
    let point = fit_em(&data, &cfg).unwrap();
    let a = bootstrap_around(&data, &cfg, &point).unwrap();
    let b = bootstrap_around(&data, &cfg, &point).unwrap();
    assert_eq!(a, b);
    let c = bootstrap_around(&data, &EstimationConfig { seed: 5, ..cfg }, &point).unwrap();
    assert_ne!(a.std_errors, c.std_errors);
    assert_eq!(a.requested, 10);
}

#[test]
fn empty_dataset_is_rejected() {
    let err = fit_em(&[], &EstimationConfig::default()).unwrap_err();
    assert!(matches!(err, Error::EmptyDataset));
}
