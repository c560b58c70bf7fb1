//! Logit quantal response equilibrium models of interactions between
//! right-turning and straight-going road users.
//!
//! - [`game`]: the crossing game, payoffs and expected utilities
//! - [`solver`]: equilibrium fixed points and iteration traces
//! - [`estimation`]: maximum likelihood under the equilibrium constraint,
//!   with bootstrap inference
//! - [`trajectory`]: turning tracked trajectories into observations
//! - [`synth`]: synthetic datasets from known parameters
//! - [`report`]: conflict/confusion metrics, descriptive statistics and
//!   estimation reports
//! - [`io`]: the CSV and JSON file formats

pub mod error;
pub mod estimation;
pub mod game;
pub mod io;
pub mod report;
pub mod solver;
pub mod synth;
pub mod trajectory;

pub use error::{Error, Result, Side};
pub use estimation::{bootstrap, fit_em, BootstrapResult, EstimationConfig, EstimationResult};
pub use game::{
    delta_eu, expected_utilities, payoff_matrix, GameKind, Observation, PayoffMatrix, PayoffParams,
    RightTurnAction, StraightAction,
};

pub use report::{conflict_confusion, ConflictConfusion};
pub use solver::{
    fixed_point, logistic, population_fixed_point, quantal_response, QrePoint, SolverConfig,
    SolverTrace,
};
pub use synth::{generate, CovariateSpec, SyntheticRecord};
