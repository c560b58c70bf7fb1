//! Nonparametric bootstrap of the fitted coefficients.
//!
//! Replicate `r` draws its resample from a ChaCha stream keyed by
//! `(seed, r)`, so results do not depend on how replicates are scheduled.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{fit_em, EstimationConfig, EstimationResult};
use crate::error::{Error, Result};
use crate::game::Observation;

/// One value per reported coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimates<T> {
    /// Normalized structural coefficients `(β₀, β₁, β₂, β₃, β₄, c₁, c₂)`.
    pub theta: [T; 7],
    /// `λ·θ` in the same order.
    pub raw: [T; 7],
    pub lambda: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapResult {
    pub std_errors: Estimates<f64>,
    /// Point estimate over standard error; `None` where the error is zero.
    pub z_values: Estimates<Option<f64>>,
    /// Replicates that converged and entered the standard errors.
    pub replicates: usize,
    pub requested: usize,
    /// Fewer than two replicates: standard errors are reported as zero.
    pub degenerate: bool,
}

impl BootstrapResult {
    pub fn dropped(&self) -> usize {
        self.requested - self.replicates
    }
}

fn replicate_rng(seed: u64, replicate: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate as u64);
    rng
}

/// Draws the resample used by replicate `replicate`.
pub fn resample(dataset: &[Observation], seed: u64, replicate: usize) -> Vec<Observation> {
    let mut rng = replicate_rng(seed, replicate);
    let n = dataset.len();
    (0..n)
        .map(|_| dataset[rng.random_range(0..n)].clone())
        .collect()
}

/// Fits the full dataset, then bootstraps around that point estimate.
pub fn bootstrap(dataset: &[Observation], cfg: &EstimationConfig) -> Result<BootstrapResult> {
    let point = fit_em(dataset, cfg)?;
    bootstrap_around(dataset, cfg, &point)
}

pub fn bootstrap_around(
    dataset: &[Observation],
    cfg: &EstimationConfig,
    point: &EstimationResult,
) -> Result<BootstrapResult> {
    if cfg.bootstrap_reps < 1 {
        return Err(Error::domain(
            "bootstrap_reps",
            "at least one replicate is required",
        ));
    }
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let fits: Vec<Option<Estimates<f64>>> = (0..cfg.bootstrap_reps)
        .into_par_iter()
        .map(|r| {
            let sample = resample(dataset, cfg.seed, r);
            match fit_em(&sample, cfg) {
                Ok(fit) => Some(estimates_of(&fit)),
                Err(e) => {
                    log::info!("bootstrap replicate {r} dropped: {e}");
                    None
                }
            }
        })
        .collect();
    let kept: Vec<Estimates<f64>> = fits.into_iter().flatten().collect();
    if kept.is_empty() {
        return Err(Error::BootstrapFailed {
            requested: cfg.bootstrap_reps,
        });
    }

    let sd = |pick: &dyn Fn(&Estimates<f64>) -> f64| std_dev(kept.iter().map(pick));
    let std_errors = Estimates {
        theta: std::array::from_fn(|k| sd(&|e| e.theta[k])),
        raw: std::array::from_fn(|k| sd(&|e| e.raw[k])),
        lambda: sd(&|e| e.lambda),
    };
    let estimate = estimates_of(point);
    let z = |value: f64, se: f64| (se > 0.0).then(|| value / se);
    let z_values = Estimates {
        theta: std::array::from_fn(|k| z(estimate.theta[k], std_errors.theta[k])),
        raw: std::array::from_fn(|k| z(estimate.raw[k], std_errors.raw[k])),
        lambda: z(estimate.lambda, std_errors.lambda),
    };
    Ok(BootstrapResult {
        std_errors,
        z_values,
        replicates: kept.len(),
        requested: cfg.bootstrap_reps,
        degenerate: kept.len() < 2,
    })
}

pub fn estimates_of(fit: &EstimationResult) -> Estimates<f64> {
    Estimates {
        theta: fit.params.theta(),
        raw: fit.raw_coefficients,
        lambda: fit.params.lambda,
    }
}

/// Sample standard deviation (n − 1 denominator); zero for fewer than two values.
fn std_dev(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let n = values.clone().count();
    if n < 2 {
        return 0.0;
    }
    let mean = values.clone().sum::<f64>() / n as f64;
    let ss: f64 = values.map(|v| (v - mean).powi(2)).sum();
    (ss / (n - 1) as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{GameKind, PayoffParams};
    use crate::synth::{generate, CovariateSpec};

    fn data(n: usize) -> Vec<Observation> {
        let spec = CovariateSpec::default_for(GameKind::VehicleEbike);
        let params = PayoffParams::from_theta([0.5, -0.6, 0.3, 0.7, -0.4, 0.2, 0.3], 6.0);
        generate(&params, &spec, n, 21)
            .unwrap()
            .into_iter()
            .map(|r| r.observation)
            .collect()
    }

    #[test]
    fn same_seed_same_errors() {
        let d = data(400);
        let cfg = EstimationConfig {
            bootstrap_reps: 8,
            seed: 3,
            ..Default::default()
        };
        let a = bootstrap(&d, &cfg).unwrap();
        let b = bootstrap(&d, &cfg).unwrap();
        assert_eq!(a, b);
        let c = bootstrap(&d, &EstimationConfig { seed: 4, ..cfg }).unwrap();
        assert_ne!(a.std_errors, c.std_errors);
    }

    #[test]
    fn single_replicate_is_degenerate() {
        let d = data(300);
        let cfg = EstimationConfig {
            bootstrap_reps: 1,
            ..Default::default()
        };
        let r = bootstrap(&d, &cfg).unwrap();
        assert!(r.degenerate);
        assert_eq!(r.replicates, 1);
        assert!(r.std_errors.theta.iter().all(|&s| s == 0.0));
        assert!(r.z_values.theta.iter().all(Option::is_none));
    }

    #[test]
    fn zero_replicates_rejected() {
        let d = data(50);
        let cfg = EstimationConfig {
            bootstrap_reps: 0,
            ..Default::default()
        };
        assert!(matches!(bootstrap(&d, &cfg), Err(Error::Domain { .. })));
    }

    #[test]
    fn all_failed_replicates_is_an_error() {
        // outer_max_iter = 1 cannot converge from the uniform start
        let d = data(300);
        let point = fit_em(&d, &EstimationConfig::default()).unwrap();
        let cfg = EstimationConfig {
            bootstrap_reps: 3,
            outer_max_iter: 1,
            ..Default::default()
        };
        assert!(matches!(
            bootstrap_around(&d, &cfg, &point),
            Err(Error::BootstrapFailed { requested: 3 })
        ));
    }

    #[test]
    fn resample_streams_are_independent_of_order() {
        let d = data(30);
        let a = resample(&d, 9, 5);
        let _ = resample(&d, 9, 4);
        assert_eq!(a, resample(&d, 9, 5));
        assert_ne!(a, resample(&d, 9, 6));
    }
}
