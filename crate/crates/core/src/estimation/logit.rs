//! Binary logit by Newton's method with step halving.
//!
//! The regressor dimension is a const generic: the straight-going side has
//! four regressors and the right-turning side three.

use nalgebra::{SMatrix, SVector};

use crate::error::{Error, Result, Side};
use crate::solver::{log_sigmoid, sigmoid};

/// Coefficient norm beyond which the fit is treated as diverging.
pub const DIVERGENCE_NORM: f64 = 1e6;

const MAX_NEWTON_ITER: usize = 100;
const MAX_HALVINGS: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogitFit<const K: usize> {
    pub coef: [f64; K],
    pub log_lik: f64,
    pub grad_norm: f64,
    pub iterations: usize,
}

#[inline]
pub fn dot<const K: usize>(a: &[f64; K], b: &[f64; K]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm<const K: usize>(a: &[f64; K]) -> f64 {
    dot(a, a).sqrt()
}

/// Bernoulli log-likelihood `Σ y ln φ(η) + (1 − y) ln φ(−η)`.
pub fn log_likelihood<const K: usize>(x: &[[f64; K]], y: &[bool], coef: &[f64; K]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(row, &yi)| {
            let eta = dot(coef, row);
            if yi {
                log_sigmoid(eta)
            } else {
                log_sigmoid(-eta)
            }
        })
        .sum()
}

/// Analytic gradient `Σ (y − φ(η)) x`.
pub fn gradient<const K: usize>(x: &[[f64; K]], y: &[bool], coef: &[f64; K]) -> [f64; K] {
    let mut g = [0.0; K];
    for (row, &yi) in x.iter().zip(y) {
        let r = f64::from(u8::from(yi)) - sigmoid(dot(coef, row));
        for (gk, xk) in g.iter_mut().zip(row) {
            *gk += r * xk;
        }
    }
    g
}

/// Negated Hessian `Σ φ(1 − φ) x xᵀ` (the Fisher information).
fn information<const K: usize>(x: &[[f64; K]], coef: &[f64; K]) -> (SMatrix<f64, K, K>, f64) {
    let mut info = SMatrix::<f64, K, K>::zeros();
    let mut max_weight: f64 = 0.0;
    for row in x {
        let p = sigmoid(dot(coef, row));
        let w = p * (1.0 - p);
        max_weight = max_weight.max(w);
        for i in 0..K {
            for j in 0..=i {
                info[(i, j)] += w * row[i] * row[j];
            }
        }
    }
    for i in 0..K {
        for j in 0..i {
            info[(j, i)] = info[(i, j)];
        }
    }
    (info, max_weight)
}

/// Maximizes the Bernoulli log-likelihood starting from `start` until the
/// gradient norm drops to `grad_tol`.
///
/// Complete separation shows up either as a diverging coefficient norm, as
/// saturated weights that make the information matrix singular, or as a
/// converged fit that reproduces every label with near certainty; all three
/// are reported as [`Error::Separation`].
pub fn fit<const K: usize>(
    x: &[[f64; K]],
    y: &[bool],
    start: [f64; K],
    grad_tol: f64,
    side: Side,
) -> Result<LogitFit<K>> {
    if x.len() != y.len() {
        return Err(Error::domain(
            "y",
            "labels and design rows differ in length",
        ));
    }
    if x.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if y.iter().all(|&v| v) || y.iter().all(|&v| !v) {
        return Err(Error::Separation { side });
    }

    let mut coef = start;
    let mut ll = log_likelihood(x, y, &coef);
    let mut g = gradient(x, y, &coef);
    let mut iterations = 0;
    while norm(&g) > grad_tol {
        if iterations == MAX_NEWTON_ITER {
            return Err(Error::InnerFit {
                side,
                reason: format!(
                    "gradient norm {:e} after {iterations} Newton steps",
                    norm(&g)
                ),
            });
        }
        iterations += 1;

        let (info, max_weight) = information(x, &coef);
        let Some(chol) = info.cholesky() else {
            if max_weight < 1e-12 {
                return Err(Error::Separation { side });
            }
            return Err(Error::InnerFit {
                side,
                reason: "singular information matrix (collinear regressors)".into(),
            });
        };
        let direction = chol.solve(&SVector::<f64, K>::from(g));

        // Near the optimum likelihood gains drop below rounding noise; a
        // full Newton step that keeps the likelihood within that noise is
        // taken as is.
        let noise = 64.0 * f64::EPSILON * (ll.abs() + 1.0);
        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let mut trial = coef;
            for (t, d) in trial.iter_mut().zip(direction.iter()) {
                *t += scale * d;
            }
            let trial_ll = log_likelihood(x, y, &trial);
            if trial_ll >= ll || (scale == 1.0 && trial_ll >= ll - noise) {
                accepted = Some((trial, trial_ll));
                break;
            }
            scale *= 0.5;
        }
        let Some((next, next_ll)) = accepted else {
            // No ascent left at machine precision.
            break;
        };
        coef = next;
        ll = next_ll;
        if norm(&coef) > DIVERGENCE_NORM {
            return Err(Error::Separation { side });
        }
        g = gradient(x, y, &coef);
    }

    let grad_norm = norm(&g);
    if grad_norm > grad_tol {
        return Err(Error::InnerFit {
            side,
            reason: format!("line search stalled at gradient norm {grad_norm:e}"),
        });
    }
    let separated = x.iter().zip(y).all(|(row, &yi)| {
        let p = sigmoid(dot(&coef, row));
        let p_observed = if yi { p } else { 1.0 - p };
        p_observed > 1.0 - 1e-6
    });
    if separated {
        return Err(Error::Separation { side });
    }
    Ok(LogitFit {
        coef,
        log_lik: ll,
        grad_norm,
        iterations,
    })
}
