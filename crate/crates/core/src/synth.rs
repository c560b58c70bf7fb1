//! Synthetic datasets drawn from known parameters.
//!
//! Covariates are sampled from per-variable marginals, each observation's
//! equilibrium is solved exactly, and both decisions are independent
//! Bernoulli draws from it. The recorded equilibria are the ground truth
//! against which estimation is checked.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{weighted::WeightedIndex, Distribution, LogNormal, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{GameKind, Observation, PayoffParams, MIN_DISTANCE};
use crate::solver::{fixed_point, QrePoint, SolverConfig};

/// Draws per slot before giving up on an observation whose equilibrium
/// iteration does not settle.
pub const MAX_RESAMPLES: usize = 100;

/// Solver settings used for the recorded ground-truth equilibria.
pub const TRUTH_SOLVER: SolverConfig = SolverConfig {
    tol: 1e-10,
    max_iter: 20_000,
    damping: 1.0,
    init: QrePoint::UNIFORM,
};

/// A univariate sampling distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Marginal {
    /// `offset + LogNormal`, parameterized so the total has the given mean
    /// and standard deviation.
    LogNormal {
        mean: f64,
        sd: f64,
        #[serde(default)]
        offset: f64,
    },
    Uniform {
        lo: f64,
        hi: f64,
    },
    Constant {
        value: f64,
    },
}

impl Marginal {
    /// Uniform with the given first two moments.
    pub fn uniform_with_moments(mean: f64, sd: f64) -> Self {
        let half = sd * 3f64.sqrt();
        Marginal::Uniform {
            lo: mean - half,
            hi: mean + half,
        }
    }

    /// Lowest value the marginal can produce.
    pub fn lower_bound(&self) -> f64 {
        match *self {
            Marginal::LogNormal { offset, .. } => offset,
            Marginal::Uniform { lo, .. } => lo,
            Marginal::Constant { value } => value,
        }
    }

    fn validate(&self, field: &'static str) -> Result<()> {
        let ok = match *self {
            Marginal::LogNormal { mean, sd, offset } => {
                mean.is_finite()
                    && sd.is_finite()
                    && offset.is_finite()
                    && mean > offset
                    && sd >= 0.0
            }
            Marginal::Uniform { lo, hi } => lo.is_finite() && hi.is_finite() && lo <= hi,
            Marginal::Constant { value } => value.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::domain(field, format!("invalid marginal {self:?}")))
        }
    }

    fn sampler(&self) -> Sampler {
        match *self {
            Marginal::LogNormal { mean, sd, offset } => {
                let m = mean - offset;
                let sigma2 = (1.0 + (sd / m).powi(2)).ln();
                let dist = LogNormal::new(m.ln() - 0.5 * sigma2, sigma2.sqrt())
                    .expect("validated lognormal parameters");
                Sampler::LogNormal(dist, offset)
            }
            Marginal::Uniform { lo, hi } => {
                Sampler::Uniform(Uniform::new_inclusive(lo, hi).expect("validated bounds"))
            }
            Marginal::Constant { value } => Sampler::Constant(value),
        }
    }
}

enum Sampler {
    LogNormal(LogNormal<f64>, f64),
    Uniform(Uniform<f64>),
    Constant(f64),
}

impl Sampler {
    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match self {
            Sampler::LogNormal(d, offset) => offset + d.sample(rng),
            Sampler::Uniform(d) => d.sample(rng),
            Sampler::Constant(v) => *v,
        }
    }
}

/// Sampling distributions for every covariate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariateSpec {
    pub v_s: Marginal,
    pub v_r: Marginal,
    pub d_s: Marginal,
    pub d_r: Marginal,
    /// Weights of group sizes 1, 2, 3, ...
    pub n_group_weights: Vec<f64>,
}

impl CovariateSpec {
    /// Marginals whose means and standard deviations follow the observed
    /// descriptive statistics of each interaction type.
    pub fn default_for(kind: GameKind) -> Self {
        // (mean, sd) of v_s, v_r, d_s, d_r, then group-size weights
        let (v_s, v_r, d_s, d_r, weights): (_, _, _, _, &[f64]) = match kind {
            GameKind::VehiclePedestrian => (
                (1.348, 0.346),
                (3.957, 1.708),
                (6.929, 2.696),
                (19.955, 7.337),
                &[0.5922, 0.2338, 0.0983, 0.0440, 0.0210, 0.0107],
            ),
            GameKind::VehicleEbike => (
                (4.341, 1.787),
                (3.707, 1.280),
                (14.829, 6.303),
                (14.399, 4.822),
                &[0.8288, 0.1310, 0.0278, 0.0079, 0.0030, 0.0015],
            ),
            GameKind::EbikePedestrian => (
                (1.098, 0.338),
                (4.478, 1.590),
                (3.758, 2.204),
                (9.276, 5.192),
                &[0.6688, 0.3127, 0.0184, 0.0001],
            ),
        };
        let speed = |(mean, sd)| Marginal::LogNormal {
            mean,
            sd,
            offset: 0.0,
        };
        CovariateSpec {
            v_s: speed(v_s),
            v_r: speed(v_r),
            d_s: distance(d_s),
            d_r: distance(d_r),
            n_group_weights: weights.to_vec(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.v_s.validate("v_s")?;
        self.v_r.validate("v_r")?;
        self.d_s.validate("d_s")?;
        self.d_r.validate("d_r")?;
        for (field, m) in [("v_s", &self.v_s), ("v_r", &self.v_r)] {
            if m.lower_bound() < 0.0 {
                return Err(Error::domain(field, "speed support must be non-negative"));
            }
        }
        for (field, m) in [("d_s", &self.d_s), ("d_r", &self.d_r)] {
            if m.lower_bound() < MIN_DISTANCE {
                return Err(Error::domain(
                    field,
                    format!("distance support must start at {MIN_DISTANCE} m or above"),
                ));
            }
        }
        let w = &self.n_group_weights;
        if w.is_empty()
            || w.iter().any(|x| !(x.is_finite() && *x >= 0.0))
            || w.iter().sum::<f64>() <= 0.0
        {
            return Err(Error::domain(
                "n_group_weights",
                "weights must be non-negative with positive sum",
            ));
        }
        Ok(())
    }
}

/// Uniform when its moment-matched support clears the minimum distance,
/// otherwise a lognormal shifted to start at the minimum distance.
fn distance((mean, sd): (f64, f64)) -> Marginal {
    let uniform = Marginal::uniform_with_moments(mean, sd);
    if uniform.lower_bound() >= MIN_DISTANCE {
        uniform
    } else {
        Marginal::LogNormal {
            mean,
            sd,
            offset: MIN_DISTANCE,
        }
    }
}

/// An observation together with the equilibrium its decisions were drawn from.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticRecord {
    pub observation: Observation,
    pub true_equilibrium: QrePoint,
}

/// Draws `n` records. Record `i` uses its own RNG stream, so the output is
/// identical regardless of thread count.
pub fn generate(
    params: &PayoffParams,
    spec: &CovariateSpec,
    n: usize,
    seed: u64,
) -> Result<Vec<SyntheticRecord>> {
    if n < 1 {
        return Err(Error::domain("n", "at least one record is required"));
    }
    params.validate()?;
    spec.validate()?;
    let samplers = [
        spec.v_s.sampler(),
        spec.v_r.sampler(),
        spec.d_s.sampler(),
        spec.d_r.sampler(),
    ];
    let groups = WeightedIndex::new(&spec.n_group_weights)
        .map_err(|e| Error::domain("n_group_weights", e.to_string()))?;

    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            for _ in 0..MAX_RESAMPLES {
                let [v_s, v_r, d_s, d_r] = samplers.each_ref().map(|s| s.sample(&mut rng));
                let n_group = groups.sample(&mut rng) as u32 + 1;
                let Ok(obs) = Observation::new(v_s, v_r, d_s, d_r, n_group) else {
                    continue;
                };
                let Ok((eq, _)) = fixed_point(&obs, params, &TRUTH_SOLVER) else {
                    continue;
                };
                let y_cross = rng.random::<f64>() < eq.p_cross;
                let y_yield = rng.random::<f64>() < eq.p_yield;
                return Ok(SyntheticRecord {
                    observation: obs.with_decisions(y_cross, y_yield).with_id(i.to_string()),
                    true_equilibrium: eq,
                });
            }
            Err(Error::Resample {
                index: i,
                attempts: MAX_RESAMPLES,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::population_fixed_point;

    fn mean_sd(values: &[f64]) -> (f64, f64) {
        let n = values.len() as f64;
        let m = values.iter().sum::<f64>() / n;
        let v = values.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
        (m, v.sqrt())
    }

    fn column(records: &[SyntheticRecord], f: impl Fn(&Observation) -> f64) -> Vec<f64> {
        records.iter().map(|r| f(&r.observation)).collect()
    }

    #[test]
    fn coin_flips_at_zero_rationality() {
        let params = PayoffParams::from_theta([1.0; 7], 0.0);
        let spec = CovariateSpec::default_for(GameKind::VehicleEbike);
        let recs = generate(&params, &spec, 100_000, 1).unwrap();
        let share = column(&recs, |o| f64::from(u8::from(o.y_cross)));
        assert!((mean_sd(&share).0 - 0.5).abs() < 0.005);
    }

    #[test]
    fn degenerate_spec_gives_identical_equilibria() {
        let spec = CovariateSpec {
            v_s: Marginal::Constant { value: 1.2 },
            v_r: Marginal::Constant { value: 4.0 },
            d_s: Marginal::Constant { value: 5.0 },
            d_r: Marginal::Constant { value: 12.0 },
            n_group_weights: vec![0.0, 1.0],
        };
        let params = PayoffParams::from_theta([0.3, -0.5, 0.2, 0.6, -0.4, 0.1, 0.2], 4.0);
        let recs = generate(&params, &spec, 200, 8).unwrap();
        assert!(recs
            .iter()
            .all(|r| r.true_equilibrium == recs[0].true_equilibrium));
        assert!(recs.iter().all(|r| r.observation.n_group == 2));
    }

    #[test]
    fn decision_frequencies_track_equilibria() {
        // strong-yield regime: large c2 for the turning player
        let params = PayoffParams::from_theta([0.4, -0.8, 0.2, 0.3, -0.5, 0.1, 1.2], 3.0);
        let spec = CovariateSpec::default_for(GameKind::VehiclePedestrian);
        let n = 20_000;
        let recs = generate(&params, &spec, n, 12).unwrap();
        let bound = 3.0 / (n as f64).sqrt();
        let mean_true_yield =
            recs.iter().map(|r| r.true_equilibrium.p_yield).sum::<f64>() / n as f64;
        let mean_true_cross =
            recs.iter().map(|r| r.true_equilibrium.p_cross).sum::<f64>() / n as f64;
        let yields = column(&recs, |o| f64::from(u8::from(o.y_yield)));
        let crosses = column(&recs, |o| f64::from(u8::from(o.y_cross)));
        assert!(mean_true_yield > 0.7);
        assert!((mean_sd(&yields).0 - mean_true_yield).abs() < bound);
        assert!((mean_sd(&crosses).0 - mean_true_cross).abs() < bound);
    }

    #[test]
    fn same_seed_same_dataset() {
        let params = PayoffParams::from_theta([0.3, -0.5, 0.2, 0.6, -0.4, 0.1, 0.2], 4.0);
        let spec = CovariateSpec::default_for(GameKind::EbikePedestrian);
        let a = generate(&params, &spec, 500, 77).unwrap();
        let b = generate(&params, &spec, 500, 77).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|r| r.observation.validate().is_ok()));
    }

    #[test]
    fn pooled_solver_matches_recorded_truth() {
        let params = PayoffParams::from_theta([0.3, -0.5, 0.2, 0.6, -0.4, 0.1, 0.2], 4.0);
        let spec = CovariateSpec::default_for(GameKind::VehiclePedestrian);
        let recs = generate(&params, &spec, 2_000, 5).unwrap();
        let data: Vec<Observation> = recs.iter().map(|r| r.observation.clone()).collect();
        let (pooled, _) = population_fixed_point(&data, &params, &SolverConfig::default()).unwrap();
        let n = recs.len() as f64;
        let truth_c = recs.iter().map(|r| r.true_equilibrium.p_cross).sum::<f64>() / n;
        let truth_y = recs.iter().map(|r| r.true_equilibrium.p_yield).sum::<f64>() / n;
        assert!((pooled.p_cross - truth_c).abs() < 1e-3);
        assert!((pooled.p_yield - truth_y).abs() < 1e-3);
    }

    #[test]
    fn default_spec_moments() {
        let params = PayoffParams::zero();
        let n = 100_000;
        for (kind, column_index, target) in [
            (GameKind::VehiclePedestrian, 0, 1.348),
            (GameKind::VehicleEbike, 0, 4.341),
            (GameKind::EbikePedestrian, 2, 3.758),
        ] {
            let recs = generate(&params, &CovariateSpec::default_for(kind), n, 2).unwrap();
            let col = column(&recs, |o| [o.v_s, o.v_r, o.d_s, o.d_r][column_index]);
            let tol = if kind == GameKind::VehiclePedestrian {
                0.01
            } else {
                0.03
            };
            assert!(
                (mean_sd(&col).0 - target).abs() < tol,
                "{kind}: {}",
                mean_sd(&col).0
            );
        }
    }

    #[test]
    fn group_weights_match_descriptive_moments() {
        for (kind, mean, sd) in [
            (GameKind::VehiclePedestrian, 1.700, 1.066),
            (GameKind::VehicleEbike, 1.230, 0.589),
            (GameKind::EbikePedestrian, 1.350, 0.515),
        ] {
            let w = CovariateSpec::default_for(kind).n_group_weights;
            let total: f64 = w.iter().sum();
            let m: f64 = w
                .iter()
                .enumerate()
                .map(|(k, p)| (k + 1) as f64 * p)
                .sum::<f64>()
                / total;
            let v: f64 = w
                .iter()
                .enumerate()
                .map(|(k, p)| ((k + 1) as f64 - m).powi(2) * p)
                .sum::<f64>()
                / total;
            assert!((m - mean).abs() < 1e-3, "{kind}");
            assert!((v.sqrt() - sd).abs() < 2e-3, "{kind}");
        }
    }

    #[test]
    fn invalid_specs_rejected() {
        let mut spec = CovariateSpec::default_for(GameKind::VehiclePedestrian);
        spec.d_s = Marginal::Uniform { lo: 0.0, hi: 3.0 };
        assert!(spec.validate().is_err());
        let mut spec = CovariateSpec::default_for(GameKind::VehiclePedestrian);
        spec.n_group_weights = vec![0.0];
        assert!(spec.validate().is_err());
        assert!(generate(
            &PayoffParams::zero(),
            &CovariateSpec::default_for(GameKind::VehicleEbike),
            0,
            1
        )
        .is_err());
    }
}
