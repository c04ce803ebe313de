//! Gradient-bound checks, Ornstein–Uhlenbeck closed forms, Markov-structure
//! checks, and refinement studies.

mod bounds;
mod markov;
mod oracle;
mod refinement;
mod test_function;

pub use bounds::{
    check_parabolic_sup_bound, check_resolvent_gradient_bound, check_resolvent_gradient_bound_in,
    check_semigroup_gradient_bound, check_semigroup_gradient_bound_in, check_sup_resolvent_bound,
    check_sup_resolvent_bound_in, check_sup_semigroup_bound, check_sup_semigroup_bound_in, default_tolerance,
    lipschitz_seminorm, scaled_tolerance, BoundCheckReport, BoundKind, MarginEntry, ResolventForm,
    DEFAULT_SLACK_FACTOR, ROUNDING_FLOOR,
};
pub use markov::{markov_structure, MarkovReport};
pub use oracle::{ou_oracle, ou_stationary_density, OracleSpec};
pub use refinement::{refinement_study, RefinementRow, RefinementTable};
pub use test_function::TestFunction;

use thiserror::Error;

use crate::discretization::DiscretizationError;
use crate::solver::SolverError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VerificationError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Discretization(#[from] DiscretizationError),
}
