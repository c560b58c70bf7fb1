//! Logit quantal response equilibrium of the crossing game.
//!
//! Each player's choice probability is the logistic function of λ times its
//! latent utility difference, which in turn depends on the opponent's
//! probability. The equilibrium is the fixed point of that joint map and is
//! found by (optionally damped) simultaneous iteration from `(0.5, 0.5)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{finite, probability, Error, Result};
use crate::game::{delta_eu_unchecked, Observation, PayoffParams};

/// Numerically stable logistic function.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln φ(x)` without forming `φ(x)` first.
#[inline]
pub fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

/// The logistic CDF `exp(x) / (1 + exp(x))`, rejecting non-finite input.
pub fn logistic(x: f64) -> Result<f64> {
    finite("x", x).map(sigmoid)
}

/// A pair of mixed strategies: the probability that the straight-going
/// player crosses and that the right-turning player yields.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QrePoint {
    pub p_cross: f64,
    pub p_yield: f64,
}

impl QrePoint {
    pub const UNIFORM: QrePoint = QrePoint {
        p_cross: 0.5,
        p_yield: 0.5,
    };

    pub fn new(p_cross: f64, p_yield: f64) -> Result<Self> {
        Ok(QrePoint {
            p_cross: probability("p_cross", p_cross)?,
            p_yield: probability("p_yield", p_yield)?,
        })
    }

    pub fn p_stay(&self) -> f64 {
        1.0 - self.p_cross
    }

    pub fn p_not_yield(&self) -> f64 {
        1.0 - self.p_yield
    }

    /// Componentwise maximum absolute difference.
    pub fn max_abs_diff(&self, other: &QrePoint) -> f64 {
        (self.p_cross - other.p_cross)
            .abs()
            .max((self.p_yield - other.p_yield).abs())
    }

    #[inline]
    fn relax(&self, target: &QrePoint, damping: f64) -> QrePoint {
        QrePoint {
            p_cross: (1.0 - damping) * self.p_cross + damping * target.p_cross,
            p_yield: (1.0 - damping) * self.p_yield + damping * target.p_yield,
        }
    }

    fn mean(points: &[QrePoint]) -> QrePoint {
        let n = points.len() as f64;
        let (c, y) = points
            .iter()
            .fold((0.0, 0.0), |(c, y), p| (c + p.p_cross, y + p.p_yield));
        QrePoint {
            p_cross: c / n,
            p_yield: y / n,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Convergence threshold on the largest probability change.
    pub tol: f64,
    pub max_iter: usize,
    /// Relaxation factor in `(0, 1]`; 1 is plain fixed-point iteration.
    pub damping: f64,
    pub init: QrePoint,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tol: 1e-3,
            max_iter: 500,
            damping: 1.0,
            init: QrePoint::UNIFORM,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::domain("tol", "tolerance must be positive"));
        }
        if self.max_iter < 1 {
            return Err(Error::domain(
                "max_iter",
                "at least one iteration is required",
            ));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::domain("damping", "damping must lie in (0, 1]"));
        }
        QrePoint::new(self.init.p_cross, self.init.p_yield)?;
        Ok(())
    }
}

/// Iterates of a fixed-point run. `iterations` excludes the starting point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverTrace {
    pub initial: QrePoint,
    pub iterations: Vec<QrePoint>,
    pub converged: bool,
    pub rounds: usize,
}

impl SolverTrace {
    fn new(initial: QrePoint) -> Self {
        SolverTrace {
            initial,
            iterations: Vec::new(),
            converged: false,
            rounds: 0,
        }
    }

    fn push(&mut self, p: QrePoint) {
        self.iterations.push(p);
        self.rounds = self.iterations.len();
    }

    pub fn last(&self) -> QrePoint {
        self.iterations.last().copied().unwrap_or(self.initial)
    }

    /// Rows `(round, p_cross, p_yield)` with the starting point as round 0.
    pub fn rows(&self) -> impl Iterator<Item = (usize, QrePoint)> + '_ {
        std::iter::once(self.initial)
            .chain(self.iterations.iter().copied())
            .enumerate()
    }
}

#[inline]
pub(crate) fn quantal_response_unchecked(
    obs: &Observation,
    params: &PayoffParams,
    p: QrePoint,
) -> QrePoint {
    let d = delta_eu_unchecked(obs, params, p.p_cross, p.p_yield);
    QrePoint {
        p_cross: sigmoid(params.lambda * d.straight),
        p_yield: sigmoid(params.lambda * d.turning),
    }
}

/// Simultaneous logit best response to `p`.
pub fn quantal_response(obs: &Observation, params: &PayoffParams, p: QrePoint) -> Result<QrePoint> {
    obs.validate()?;
    params.validate()?;
    let p = QrePoint::new(p.p_cross, p.p_yield)?;
    Ok(quantal_response_unchecked(obs, params, p))
}

/// Largest componentwise gap between `p` and its quantal response.
pub fn residual(obs: &Observation, params: &PayoffParams, p: QrePoint) -> Result<f64> {
    Ok(quantal_response(obs, params, p)?.max_abs_diff(&p))
}

/// Solves one observation's equilibrium.
///
/// A round is accepted as converged when both its step from the previous
/// iterate and its own quantal-response residual are within `tol`, so the
/// returned point always satisfies `|p − QR(p)| ≤ tol`.
pub fn fixed_point(
    obs: &Observation,
    params: &PayoffParams,
    cfg: &SolverConfig,
) -> Result<(QrePoint, SolverTrace)> {
    obs.validate()?;
    params.validate()?;
    cfg.validate()?;

    let mut trace = SolverTrace::new(cfg.init);
    let mut p = cfg.init;
    let mut last_step = f64::INFINITY;
    loop {
        let response = quantal_response_unchecked(obs, params, p);
        let gap = response.max_abs_diff(&p);
        if trace.rounds > 0 && gap <= cfg.tol && last_step <= cfg.tol {
            trace.converged = true;
            return Ok((p, trace));
        }
        if trace.rounds == cfg.max_iter {
            return Err(Error::NonConvergence {
                trace: Box::new(trace),
            });
        }
        let next = p.relax(&response, cfg.damping);
        last_step = next.max_abs_diff(&p);
        trace.push(next);
        p = next;
    }
}

/// Per-observation equilibria solved jointly, with the pooled mean trace.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationSolution {
    pub pooled: QrePoint,
    pub per_observation: Vec<QrePoint>,
    pub trace: SolverTrace,
}

/// Iterates every observation's map in lockstep and tracks the mean
/// probabilities per round. Converges when the worst observation does.
pub fn population_equilibria(
    dataset: &[Observation],
    params: &PayoffParams,
    cfg: &SolverConfig,
) -> Result<PopulationSolution> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    for obs in dataset {
        obs.validate()?;
    }
    params.validate()?;
    cfg.validate()?;

    let mut points = vec![cfg.init; dataset.len()];
    let mut responses = points.clone();
    let mut trace = SolverTrace::new(cfg.init);
    let mut last_step = f64::INFINITY;
    loop {
        responses
            .par_iter_mut()
            .zip(dataset.par_iter().zip(points.par_iter()))
            .for_each(|(r, (obs, p))| *r = quantal_response_unchecked(obs, params, *p));
        let gap = max_gap(&points, &responses);
        if trace.rounds > 0 && gap <= cfg.tol && last_step <= cfg.tol {
            trace.converged = true;
            return Ok(PopulationSolution {
                pooled: trace.last(),
                per_observation: points,
                trace,
            });
        }
        if trace.rounds == cfg.max_iter {
            return Err(Error::NonConvergence {
                trace: Box::new(trace),
            });
        }
        let next: Vec<QrePoint> = points
            .iter()
            .zip(&responses)
            .map(|(p, r)| p.relax(r, cfg.damping))
            .collect();
        last_step = max_gap(&points, &next);
        trace.push(QrePoint::mean(&next));
        points = next;
    }
}

/// Pooled equilibrium: mean of the per-observation fixed points.
pub fn population_fixed_point(
    dataset: &[Observation],
    params: &PayoffParams,
    cfg: &SolverConfig,
) -> Result<(QrePoint, SolverTrace)> {
    let solution = population_equilibria(dataset, params, cfg)?;
    Ok((solution.pooled, solution.trace))
}

fn max_gap(a: &[QrePoint], b: &[QrePoint]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.max_abs_diff(y))
        .fold(0.0, f64::max)
}

/// Outcome of restarting the solver from random initial points.
#[derive(Debug, Clone, PartialEq)]
pub struct Sensitivity {
    pub baseline: QrePoint,
    /// Largest distance from `baseline` among the restarts that converged.
    pub max_deviation: f64,
    pub converged_starts: usize,
    pub starts: usize,
}

/// Reruns [`fixed_point`] from `starts` initial points drawn uniformly from
/// `[0.1, 0.9]²` and measures how far their solutions land from the one
/// reached from `cfg.init`.
pub fn sensitivity(
    obs: &Observation,
    params: &PayoffParams,
    cfg: &SolverConfig,
    starts: usize,
    seed: u64,
) -> Result<Sensitivity> {
    let (baseline, _) = fixed_point(obs, params, cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_deviation: f64 = 0.0;
    let mut converged_starts = 0;
    for _ in 0..starts {
        let init = QrePoint {
            p_cross: rng.random_range(0.1..=0.9),
            p_yield: rng.random_range(0.1..=0.9),
        };
        let restart = SolverConfig { init, ..*cfg };
        if let Ok((p, _)) = fixed_point(obs, params, &restart) {
            converged_starts += 1;
            max_deviation = max_deviation.max(p.max_abs_diff(&baseline));
        }
    }
    Ok(Sensitivity {
        baseline,
        max_deviation,
        converged_starts,
        starts,
    })
}
