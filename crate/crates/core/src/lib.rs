//! Numerical laboratory for drift-diffusion operators
//! `L u = Σ a_ij ∂_i∂_j u + Σ b_i ∂_i u` with dissipative drift.
//!
//! The crate discretizes `L` on a truncated box as a monotone Markov
//! generator, applies its resolvent `(λ - L)^{-1}` and its semigroup through
//! the implicit-Euler product formula, computes the stationary density of the
//! finite chain, and checks the pointwise gradient-contraction estimates
//!
//! ```text
//! |∇ T_t f| ≤ T_t |∇ f|        |∇ G_λ f| ≤ G_λ |∇ f|
//! ```
//!
//! on the resulting discrete objects. The drift toolkit reproduces the
//! regularization chain used to reach non-smooth drifts: mollification,
//! Yosida approximation, and a strongly dissipative shift.
//!
//! Module map:
//!
//! * [`drift`] vector fields, dissipativity sampling, mollifier, Yosida maps
//! * [`discretization`] grids, diffusion matrices, generator assembly,
//!   discrete gradients, Lyapunov-based truncation
//! * [`solver`] resolvent, semigroup, piecewise-constant parabolic solves,
//!   dyadic time sampling
//! * [`invariant_measure`] stationary density, dual drift, duality residual
//! * [`verification`] bound checks, Ornstein–Uhlenbeck closed forms,
//!   refinement studies
//! * [`scenario`] configuration files, orchestration, reports, sweeps

pub mod discretization;
pub mod drift;
pub mod invariant_measure;
pub mod quadrature;
pub mod scenario;
pub mod solver;
pub mod sparse;
pub mod verification;

pub use discretization::{
    assemble_generator, build_grid, discrete_gradient, suggest_truncation, BoundaryCondition, DiffusionSpec,
    DiscreteGenerator, DiscretizationError, GradientField, Grid, LyapunovSpec,
};
pub use drift::{
    check_dissipative, mollify, regularized_drift, yosida_field, yosida_resolve, DissipativityReport, DriftError,
    MollifierSpec, SamplePair, VectorFieldSpec,
};

pub use invariant_measure::{
    dual_drift, duality_residual, stationary_density, DiscreteDensity, DualDrift, InvariantMeasureError,
};
pub use solver::{
    parabolic_solve, resolvent_apply, riemann_sum, semigroup_apply, time_sampler, CoefficientSchedule,
    ParabolicOptions, SchedulePiece, SolveReport, SolverError, SolverOptions, Trajectory,
};
pub use verification::{
    check_resolvent_gradient_bound, check_semigroup_gradient_bound, lipschitz_seminorm, ou_oracle, refinement_study,
    BoundCheckReport, BoundKind, OracleSpec, ResolventForm, TestFunction, VerificationError,
};
