//! Drift vector fields and the regularization chain
//! `b ↦ b∗σ_k ↦ F_{1/k}(b∗σ_k) - I/k`.

mod dissipativity;
mod field;
mod mollifier;
mod yosida;

pub use dissipativity::{check_dissipative, check_strongly_dissipative, sample_pairs, DissipativityReport, SamplePair};
pub use field::{FieldKind, Monomial, TabulatedField, VectorFieldSpec};
pub use mollifier::{mollify, MollifierSpec, MOLLIFIER_ORDER};
pub use yosida::{regularized_drift, yosida_field, yosida_resolve, yosida_resolve_with, YosidaOptions};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DriftError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("point {point:?} lies outside the field's domain")]
    Domain { point: Vec<f64> },
    #[error("expected a point of dimension {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("Yosida resolvent did not converge in {iterations} iterations (residual {residual:e})")]
    Convergence { iterations: usize, residual: f64 },
}
