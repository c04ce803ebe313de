//! Resolvent, implicit-Euler semigroup, and piecewise-constant parabolic
//! solves on an assembled generator.

mod cache;
mod linear;
mod parabolic;
mod resolvent;
mod schedule;

pub use cache::OperatorCache;
pub use linear::{LinearSolver, SolverKind, SolverOptions, SolverTag, DIRECT_SOLVE_LIMIT};
pub use parabolic::{parabolic_solve, weak_test_functions, ParabolicOptions, Trajectory, WeakTestFunction};
pub use resolvent::{resolvent_apply, semigroup_apply, EulerSemigroup, Resolvent};
pub use schedule::{riemann_sum, time_sampler, CoefficientSchedule, SchedulePiece};

use std::time::Duration;

use serde::Serialize;
use thiserror::Error;

use crate::discretization::DiscretizationError;
use crate::drift::DriftError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("singular or ill-conditioned system (condition estimate {condition_estimate:e})")]
    Singular { condition_estimate: f64 },
    #[error("linear solve did not reach tolerance after {iterations} iterations (relative residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error(transparent)]
    Discretization(#[from] DiscretizationError),
    #[error(transparent)]
    Drift(#[from] DriftError),
}

/// Outcome of one linear solve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveReport {
    /// Relative residual `‖Mx - b‖∞ / ‖b‖∞`.
    pub residual: f64,
    pub iterations: usize,
    #[serde(skip)]
    pub wall_time: Duration,
    pub solver: SolverTag,
}
