//! Scenario files, the verification run, reports and parameter sweeps.

mod bundled;
mod config;
mod output;
mod run;
mod schedule;
mod sweep;

use thiserror::Error;

use crate::discretization::DiscretizationError;
use crate::drift::DriftError;
use crate::invariant_measure::InvariantMeasureError;
use crate::solver::SolverError;
use crate::verification::VerificationError;

pub use bundled::{bundled_scenario, bundled_scenarios, BundledScenario};
pub use config::{
    ChecksConfig, DiffusionConfig, DriftConfig, GridConfig, LyapunovConfig, MonomialConfig, ParabolicConfig,
    PieceConfig, RadiusConfig, RegularizationConfig, Scenario, TheoremForm, TolerancesConfig, WaveConfig, MAX_NODES,
};
pub use output::write_outputs;
pub use run::{
    run_scenario, CheckRecord, ConsistencyRecord, InvariantSummary, OracleRecord, ParabolicSummary, RefinementRecord,
    SamplerStudy, ValueCheck, VariantReport, VerificationReport, THEOREM_FORM_NOTE,
};
pub use schedule::ScheduleSummary;
pub use sweep::{run_sweep, SweepAxis, SweepRow, SweepTable};

#[derive(Debug, Error)]
pub enum ScenarioError {
    /// Malformed or inconsistent configuration.
    #[error("configuration error: {0}")]
    Config(String),
    /// A standing assumption (ellipticity, dissipativity, Lyapunov) fails.
    #[error("hypothesis not satisfied: {0}")]
    Hypothesis(String),
    #[error(transparent)]
    Drift(#[from] DriftError),
    #[error(transparent)]
    Discretization(#[from] DiscretizationError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    InvariantMeasure(#[from] InvariantMeasureError),
    #[error(transparent)]
    Verification(#[from] VerificationError),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for ScenarioError {
    fn from(e: std::io::Error) -> Self {
        Self::Io(e.to_string())
    }
}

impl From<csv::Error> for ScenarioError {
    fn from(e: csv::Error) -> Self {
        Self::Io(e.to_string())
    }
}
