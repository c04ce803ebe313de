//! Truncated-box grids and the monotone finite-difference generator.

mod diffusion;
mod generator;
mod gradient;
mod grid;
mod lyapunov;

pub use diffusion::DiffusionSpec;
pub use generator::{assemble_generator, BoundaryCondition, DiscreteGenerator};
pub use gradient::{discrete_gradient, GradientField};
pub use grid::{build_grid, Grid, MAX_DIM};
pub use lyapunov::{suggest_truncation, LyapunovSpec, TruncationOptions};

use crate::drift::DriftError;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiscretizationError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("drift not evaluable at node {node}: {source}")]
    Drift { node: usize, source: DriftError },
    #[error("drift evaluation failed: {0}")]
    DriftEval(#[from] DriftError),
    #[error("Lyapunov function fails: L V > -{threshold} persists up to the search cap |x| = {cap}")]
    LyapunovFailure { threshold: f64, cap: f64 },
}
