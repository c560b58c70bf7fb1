//! Maximum-likelihood estimation of the payoff parameters under the
//! equilibrium constraint.
//!
//! Choice probabilities depend on the parameters only through the products
//! `λ·θ`, so the fit works with the raw latent-index coefficients
//! `γ_s = λ(β₀, β₁, β₂, c₁)` and `γ_r = λ(β₃, β₄, c₂)`. Each outer round
//! fixes every observation's equilibrium probabilities, fits the two binary
//! logits on the implied regressors, then moves the probabilities to the
//! fitted responses. At convergence `λ = ‖γ‖` and `θ = γ / λ`.

pub mod bootstrap;
pub mod logit;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use bootstrap::{bootstrap, bootstrap_around, BootstrapResult, Estimates};

use crate::error::{finite, Error, Result, Side};
use crate::game::{Observation, PayoffParams};
use crate::solver::{log_sigmoid, sigmoid, QrePoint, SolverConfig, SolverTrace};
use logit::dot;

/// Straight-going regressors, paired with `(β₀, β₁, β₂, c₁)`.
pub type StraightRow = [f64; 4];
/// Right-turning regressors, paired with `(β₃, β₄, c₂)`.
pub type TurningRow = [f64; 3];

/// Floor applied to log-probabilities in the likelihood.
pub const LOG_PROB_FLOOR: f64 = -690.775_527_898_213_7; // ln(1e-300)

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EstimationConfig {
    /// Initial probabilities and damping of the outer probability update.
    pub solver: SolverConfig,
    pub mstep_grad_tol: f64,
    pub outer_tol: f64,
    pub outer_max_iter: usize,
    pub bootstrap_reps: usize,
    pub seed: u64,
}

impl Default for EstimationConfig {
    fn default() -> Self {
        EstimationConfig {
            solver: SolverConfig::default(),
            mstep_grad_tol: 1e-6,
            outer_tol: 1e-3,
            outer_max_iter: 200,
            bootstrap_reps: 500,
            seed: 0,
        }
    }
}

impl EstimationConfig {
    pub fn validate(&self) -> Result<()> {
        self.solver.validate()?;
        for (field, tol) in [
            ("mstep_grad_tol", self.mstep_grad_tol),
            ("outer_tol", self.outer_tol),
        ] {
            if finite(field, tol)? <= 0.0 {
                return Err(Error::domain(field, "tolerance must be positive"));
            }
        }
        if self.outer_max_iter < 1 {
            return Err(Error::domain(
                "outer_max_iter",
                "at least one round is required",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationResult {
    /// Structural coefficients with `‖θ‖ = 1` and λ carrying the scale.
    pub params: PayoffParams,
    /// `λ·θ` in `(β₀, β₁, β₂, β₃, β₄, c₁, c₂)` order.
    pub raw_coefficients: [f64; 7],
    pub log_lik: f64,
    pub log_lik_s: f64,
    pub log_lik_r: f64,
    pub fitted: Vec<QrePoint>,
    /// Mean fitted probabilities per outer round.
    pub trace: SolverTrace,
    pub converged: bool,
}

impl EstimationResult {
    pub fn pooled(&self) -> QrePoint {
        self.trace.last()
    }

    pub fn n_obs(&self) -> usize {
        self.fitted.len()
    }
}

/// Regressors of both latent indices at mixture `p`, such that
/// `ΔEU_s = (β₀, β₁, β₂, c₁)·x_s` and `ΔEU_r = (β₃, β₄, c₂)·x_r`.
pub fn design_rows(obs: &Observation, p: QrePoint) -> Result<(StraightRow, TurningRow)> {
    obs.validate()?;
    let p = QrePoint::new(p.p_cross, p.p_yield)?;
    Ok(design_rows_unchecked(obs, p))
}

#[inline]
fn design_rows_unchecked(obs: &Observation, p: QrePoint) -> (StraightRow, TurningRow) {
    let not_yield = 1.0 - p.p_yield;
    (
        [
            obs.straight_rate(),
            not_yield * obs.turning_rate(),
            not_yield * obs.group(),
            -1.0,
        ],
        [-obs.turning_rate(), -p.p_cross * obs.straight_rate(), 1.0],
    )
}

/// Splits `λ·θ` into the straight and turning coefficient vectors.
pub fn split_raw(raw: &[f64; 7]) -> (StraightRow, TurningRow) {
    let [b0, b1, b2, b3, b4, c1, c2] = *raw;
    ([b0, b1, b2, c1], [b3, b4, c2])
}

pub fn join_raw(straight: &StraightRow, turning: &TurningRow) -> [f64; 7] {
    let [b0, b1, b2, c1] = *straight;
    let [b3, b4, c2] = *turning;
    [b0, b1, b2, b3, b4, c1, c2]
}

/// Maps raw coefficients to normalized structural parameters.
pub fn params_from_raw(raw: &[f64; 7]) -> PayoffParams {
    let lambda = raw.iter().map(|g| g * g).sum::<f64>().sqrt();
    if lambda == 0.0 {
        return PayoffParams::from_theta([0.0; 7], 0.0);
    }
    PayoffParams::from_theta(raw.map(|g| g / lambda), lambda)
}

pub fn raw_from_params(params: &PayoffParams) -> [f64; 7] {
    params.theta().map(|t| params.lambda * t)
}

#[inline]
fn response(raw_s: &StraightRow, raw_r: &TurningRow, obs: &Observation, p: QrePoint) -> QrePoint {
    let (xs, xr) = design_rows_unchecked(obs, p);
    QrePoint {
        p_cross: sigmoid(dot(raw_s, &xs)),
        p_yield: sigmoid(dot(raw_r, &xr)),
    }
}

/// Total, straight-side and turning-side log-likelihood at `fitted`.
pub fn log_likelihood(
    dataset: &[Observation],
    params: &PayoffParams,
    fitted: &[QrePoint],
) -> Result<(f64, f64, f64)> {
    if dataset.len() != fitted.len() {
        return Err(Error::domain(
            "fitted",
            format!("{} points for {} observations", fitted.len(), dataset.len()),
        ));
    }
    params.validate()?;
    let (raw_s, raw_r) = split_raw(&raw_from_params(params));
    let (mut ll_s, mut ll_r) = (0.0, 0.0);
    for (obs, p) in dataset.iter().zip(fitted) {
        let (xs, xr) = design_rows(obs, *p)?;
        let (eta_s, eta_r) = (dot(&raw_s, &xs), dot(&raw_r, &xr));
        ll_s += bernoulli_log(obs.y_cross, eta_s);
        ll_r += bernoulli_log(obs.y_yield, eta_r);
    }
    Ok((ll_s + ll_r, ll_s, ll_r))
}

#[inline]
fn bernoulli_log(outcome: bool, eta: f64) -> f64 {
    let lp = if outcome {
        log_sigmoid(eta)
    } else {
        log_sigmoid(-eta)
    };
    lp.max(LOG_PROB_FLOOR)
}

/// Fits from the configured initial probabilities (`cfg.solver.init`).
pub fn fit_em(dataset: &[Observation], cfg: &EstimationConfig) -> Result<EstimationResult> {
    let initial = vec![cfg.solver.init; dataset.len()];
    fit_em_from(dataset, cfg, &initial)
}

/// Fits starting from one initial mixture per observation.
pub fn fit_em_from(
    dataset: &[Observation],
    cfg: &EstimationConfig,
    initial: &[QrePoint],
) -> Result<EstimationResult> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if initial.len() != dataset.len() {
        return Err(Error::domain(
            "initial",
            "one initial point per observation is required",
        ));
    }
    cfg.validate()?;
    for obs in dataset {
        obs.validate()?;
    }

    let y_cross: Vec<bool> = dataset.iter().map(|o| o.y_cross).collect();
    let y_yield: Vec<bool> = dataset.iter().map(|o| o.y_yield).collect();
    let mut points: Vec<QrePoint> = initial
        .iter()
        .map(|p| QrePoint::new(p.p_cross, p.p_yield))
        .collect::<Result<_>>()?;
    let mut trace = SolverTrace {
        initial: mean(&points),
        iterations: Vec::new(),
        converged: false,
        rounds: 0,
    };
    let mut raw_s = [0.0; 4];
    let mut raw_r = [0.0; 3];
    let mut xs = Vec::with_capacity(dataset.len());
    let mut xr = Vec::with_capacity(dataset.len());

    loop {
        if trace.rounds == cfg.outer_max_iter {
            return Err(Error::OuterNonConvergence {
                trace: trace.iterations,
            });
        }
        xs.clear();
        xr.clear();
        for (obs, p) in dataset.iter().zip(&points) {
            let (s, r) = design_rows_unchecked(obs, *p);
            xs.push(s);
            xr.push(r);
        }
        raw_s = logit::fit(&xs, &y_cross, raw_s, cfg.mstep_grad_tol, Side::Straight)?.coef;
        raw_r = logit::fit(&xr, &y_yield, raw_r, cfg.mstep_grad_tol, Side::Turning)?.coef;

        let mut step: f64 = 0.0;
        for (obs, p) in dataset.iter().zip(points.iter_mut()) {
            let target = response(&raw_s, &raw_r, obs, *p);
            let damping = cfg.solver.damping;
            let next = QrePoint {
                p_cross: (1.0 - damping) * p.p_cross + damping * target.p_cross,
                p_yield: (1.0 - damping) * p.p_yield + damping * target.p_yield,
            };
            step = step.max(next.max_abs_diff(p));
            *p = next;
        }
        trace.iterations.push(mean(&points));
        trace.rounds = trace.iterations.len();
        log::debug!(
            "outer round {}: max |dp| = {step:.3e}, gamma_s = {raw_s:?}, gamma_r = {raw_r:?}",
            trace.rounds
        );

        if step <= cfg.outer_tol {
            let gap = dataset
                .iter()
                .zip(&points)
                .map(|(obs, p)| response(&raw_s, &raw_r, obs, *p).max_abs_diff(p))
                .fold(0.0, f64::max);
            if gap <= cfg.outer_tol {
                break;
            }
        }
    }
    trace.converged = true;

    let raw_coefficients = join_raw(&raw_s, &raw_r);
    let params = params_from_raw(&raw_coefficients);
    let (log_lik, log_lik_s, log_lik_r) = log_likelihood(dataset, &params, &points)?;
    Ok(EstimationResult {
        params,
        raw_coefficients,
        log_lik,
        log_lik_s,
        log_lik_r,
        fitted: points,
        trace,
        converged: true,
    })
}

fn mean(points: &[QrePoint]) -> QrePoint {
    let n = points.len() as f64;
    QrePoint {
        p_cross: points.iter().map(|p| p.p_cross).sum::<f64>() / n,
        p_yield: points.iter().map(|p| p.p_yield).sum::<f64>() / n,
    }
}

/// Result of refitting from randomized initial probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct FitSensitivity {
    pub baseline: EstimationResult,
    /// Largest absolute difference in any raw coefficient across restarts.
    pub max_raw_deviation: f64,
    /// Largest difference in any fitted probability across restarts.
    pub max_fitted_deviation: f64,
    pub converged_restarts: usize,
    pub restarts: usize,
}

/// Refits `restarts` times with every observation's initial mixture drawn
/// uniformly from `[0.1, 0.9]²`.
pub fn fit_sensitivity(
    dataset: &[Observation],
    cfg: &EstimationConfig,
    restarts: usize,
    seed: u64,
) -> Result<FitSensitivity> {
    let baseline = fit_em(dataset, cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_raw_deviation: f64 = 0.0;
    let mut max_fitted_deviation: f64 = 0.0;
    let mut converged_restarts = 0;
    for _ in 0..restarts {
        let initial: Vec<QrePoint> = dataset
            .iter()
            .map(|_| QrePoint {
                p_cross: rng.random_range(0.1..=0.9),
                p_yield: rng.random_range(0.1..=0.9),
            })
            .collect();
        let Ok(fit) = fit_em_from(dataset, cfg, &initial) else {
            continue;
        };
        converged_restarts += 1;
        for (a, b) in fit.raw_coefficients.iter().zip(&baseline.raw_coefficients) {
            max_raw_deviation = max_raw_deviation.max((a - b).abs());
        }
        for (a, b) in fit.fitted.iter().zip(&baseline.fitted) {
            max_fitted_deviation = max_fitted_deviation.max(a.max_abs_diff(b));
        }
    }
    Ok(FitSensitivity {
        baseline,
        max_raw_deviation,
        max_fitted_deviation,
        converged_restarts,
        restarts,
    })
}
