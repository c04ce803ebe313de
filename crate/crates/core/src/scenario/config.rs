use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::ScenarioError;
use crate::discretization::{build_grid, BoundaryCondition, DiffusionSpec, Grid};
use crate::drift::VectorFieldSpec;
use crate::verification::TestFunction;

/// Largest admissible node count `n^d`.
pub const MAX_NODES: usize = 1_000_000;

/// One verification run, read from a TOML file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub dimension: usize,
    /// Seed for every sampled quantity (dissipativity pairs, random vectors).
    #[serde(default)]
    pub seed: u64,
    pub diffusion: DiffusionConfig,
    pub drift: DriftConfig,
    #[serde(default)]
    pub regularization: Option<RegularizationConfig>,
    #[serde(default)]
    pub lyapunov: LyapunovConfig,
    pub grid: GridConfig,
    pub test_functions: Vec<TestFunction>,
    #[serde(default)]
    pub checks: ChecksConfig,
    #[serde(default)]
    pub tolerances: TolerancesConfig,
    #[serde(default)]
    pub parabolic: Option<ParabolicConfig>,
    /// Directory for tabulated-drift files; set from the config location.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiffusionConfig {
    pub matrix: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DriftConfig {
    /// `b(x) = Mx`
    Linear {
        matrix: Vec<Vec<f64>>,
    },
    Constant {
        value: Vec<f64>,
    },
    /// `b(x) = -s·x/|x|`
    Sign {
        strength: f64,
    },
    /// `b = -∇P` with `P = Σ coeff·Π x_k^{powers[k]}`
    PolynomialGradient {
        terms: Vec<MonomialConfig>,
        #[serde(default)]
        declared_dissipative: bool,
    },
    /// CSV with columns `x0..x{d-1}, b0..b{d-1}` in row-major node order.
    Tabulated {
        file: PathBuf,
        #[serde(default)]
        declared_dissipative: bool,
    },
    Sum {
        parts: Vec<DriftConfig>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonomialConfig {
    pub coeff: f64,
    pub powers: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegularizationConfig {
    /// Indices of `b_k = F_{1/k}(b∗σ_k) - I/k`.
    pub k: Vec<u32>,
    /// Also run every check on the drift as given.
    #[serde(default = "yes")]
    pub include_unregularized: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LyapunovConfig {
    /// `V(x) = |x|^{2·power}`
    #[serde(default = "one_u32")]
    pub power: u32,
    /// Level `θ` in `LV ≤ -θ` outside the truncation radius.
    #[serde(default = "one_f64")]
    pub theta: f64,
}

impl Default for LyapunovConfig {
    fn default() -> Self {
        Self { power: 1, theta: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RadiusConfig {
    Fixed(f64),
    /// `"auto"`: twice the Lyapunov truncation radius, so the inner
    /// half-box contains every point where `LV > -θ`.
    Named(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub radius: RadiusConfig,
    pub points: usize,
    #[serde(default)]
    pub boundary: BoundaryCondition,
}

/// How the theorem-form resolvent bound `|∇G_λf| ≤ λ⁻¹G_λ|∇f|` enters the verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum TheoremForm {
    /// Reported and able to fail the run.
    Gating,
    /// Reported, never affects the exit code.
    #[default]
    Informational,
    Off,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChecksConfig {
    #[serde(default = "default_times")]
    pub times: Vec<f64>,
    /// Implicit-Euler steps per unit time; time `t` uses `max(1, round(t·n_steps))` steps.
    #[serde(default = "default_n_steps")]
    pub n_steps: usize,
    #[serde(default = "default_lambdas")]
    pub lambdas: Vec<f64>,
    /// Levels of the refinement study of the pointwise bounds; 0 disables it.
    #[serde(default)]
    pub refinement_levels: usize,
    #[serde(default = "yes")]
    pub oracle: bool,
    #[serde(default)]
    pub invariant_measure: bool,
    #[serde(default = "yes")]
    pub markov: bool,
    #[serde(default)]
    pub theorem_form: TheoremForm,
    #[serde(default = "default_samples")]
    pub dissipativity_samples: usize,
}

impl Default for ChecksConfig {
    fn default() -> Self {
        Self {
            times: default_times(),
            n_steps: default_n_steps(),
            lambdas: default_lambdas(),
            refinement_levels: 0,
            oracle: true,
            invariant_measure: false,
            markov: true,
            theorem_form: TheoremForm::default(),
            dissipativity_samples: default_samples(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TolerancesConfig {
    /// `c` in the pointwise slack `c·h·Lip_h(f)`.
    #[serde(default = "ten")]
    pub slack_factor: f64,
    /// Absolute sup error allowed against the semigroup closed form.
    #[serde(default = "default_oracle_semigroup")]
    pub oracle_semigroup: f64,
    /// Resolvent closed-form error allowed, in units of `h`.
    #[serde(default = "five")]
    pub oracle_resolvent_factor: f64,
    /// Relative stationary-density error allowed, in units of `h`.
    #[serde(default = "ten")]
    pub density_factor: f64,
    /// Dual-drift error allowed, in units of `h`.
    #[serde(default = "ten")]
    pub dual_drift_factor: f64,
    #[serde(default = "default_matrix_tol")]
    pub markov: f64,
    #[serde(default = "default_matrix_tol")]
    pub dissipativity: f64,
}

impl Default for TolerancesConfig {
    fn default() -> Self {
        Self {
            slack_factor: 10.0,
            oracle_semigroup: default_oracle_semigroup(),
            oracle_resolvent_factor: 5.0,
            density_factor: 10.0,
            dual_drift_factor: 10.0,
            markov: default_matrix_tol(),
            dissipativity: default_matrix_tol(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PieceConfig {
    /// Defaults to the scenario diffusion.
    #[serde(default)]
    pub diffusion: Option<Vec<Vec<f64>>>,
    pub drift: DriftConfig,
}

/// `A(t) = A₀ + sin(2πt)A₁`, `b(t,x) = (M₀ + sin(2πt)M₁)x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveConfig {
    pub diffusion: Vec<Vec<f64>>,
    pub diffusion_wave: Vec<Vec<f64>>,
    pub drift: Vec<Vec<f64>>,
    pub drift_wave: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParabolicConfig {
    /// Step function in time: piece `k` of `m` covers `[k/m, (k+1)/m)`.
    #[serde(default)]
    pub pieces: Vec<PieceConfig>,
    #[serde(default)]
    pub wave: Option<WaveConfig>,
    /// Freeze coefficients on the dyadic sampler partition of this level.
    #[serde(default)]
    pub sampler_level: Option<u32>,
    #[serde(default)]
    pub s0: f64,
    #[serde(default = "default_steps_per_interval")]
    pub steps_per_interval: usize,
    #[serde(default)]
    pub report_times: Vec<f64>,
    /// Sampler levels for the convergence study at `t = 1`; the time step
    /// is held fixed across levels.
    #[serde(default)]
    pub sampler_levels: Vec<u32>,
}

fn yes() -> bool {
    true
}
fn one_u32() -> u32 {
    1
}
fn one_f64() -> f64 {
    1.0
}
fn five() -> f64 {
    5.0
}
fn ten() -> f64 {
    10.0
}
fn default_times() -> Vec<f64> {
    vec![0.1, 0.5, 1.0]
}
fn default_n_steps() -> usize {
    64
}
fn default_lambdas() -> Vec<f64> {
    vec![0.5, 1.0, 4.0]
}
fn default_samples() -> usize {
    256
}
fn default_oracle_semigroup() -> f64 {
    0.05
}
fn default_matrix_tol() -> f64 {
    1e-9
}
fn default_steps_per_interval() -> usize {
    32
}

fn invalid(field: &str, msg: impl std::fmt::Display) -> ScenarioError {
    ScenarioError::Config(format!("{field}: {msg}"))
}

fn check_matrix(field: &str, m: &[Vec<f64>], d: usize) -> Result<(), ScenarioError> {
    if m.len() != d || m.iter().any(|r| r.len() != d) {
        return Err(invalid(field, format!("expected a {d}×{d} matrix")));
    }
    if m.iter().flatten().any(|v| !v.is_finite()) {
        return Err(invalid(field, "entries must be finite"));
    }
    Ok(())
}

impl DriftConfig {
    fn validate(&self, field: &str, d: usize) -> Result<(), ScenarioError> {
        match self {
            Self::Linear { matrix } => check_matrix(&format!("{field}.matrix"), matrix, d),
            Self::Constant { value } if value.len() != d => {
                Err(invalid(&format!("{field}.value"), format!("expected {d} components")))
            }
            Self::Constant { .. } => Ok(()),
            Self::Sign { strength } if !(*strength >= 0.0 && strength.is_finite()) => {
                Err(invalid(&format!("{field}.strength"), "must be finite and nonnegative"))
            }
            Self::Sign { .. } => Ok(()),
            Self::PolynomialGradient { terms, .. } => {
                if terms.is_empty() {
                    return Err(invalid(&format!("{field}.terms"), "empty potential"));
                }
                match terms.iter().position(|t| t.powers.len() != d) {
                    Some(i) => Err(invalid(
                        &format!("{field}.terms[{i}].powers"),
                        format!("expected {d} exponents"),
                    )),
                    None => Ok(()),
                }
            }
            Self::Tabulated { .. } => Ok(()),
            Self::Sum { parts } => {
                if parts.is_empty() {
                    return Err(invalid(&format!("{field}.parts"), "empty sum"));
                }
                for (i, p) in parts.iter().enumerate() {
                    p.validate(&format!("{field}.parts[{i}]"), d)?;
                }
                Ok(())
            }
        }
    }

    pub(crate) fn is_tabulated(&self) -> bool {
        match self {
            Self::Tabulated { .. } => true,
            Self::Sum { parts } => parts.iter().any(DriftConfig::is_tabulated),
            _ => false,
        }
    }

    /// Builds the field; tabulated paths resolve against `base`.
    pub fn build(&self, d: usize, base: Option<&Path>) -> Result<VectorFieldSpec, ScenarioError> {
        Ok(match self {
            Self::Linear { matrix } => VectorFieldSpec::linear(matrix.clone())?,
            Self::Constant { value } => VectorFieldSpec::constant(value.clone()),
            Self::Sign { strength } => VectorFieldSpec::sign(d, *strength),
            Self::PolynomialGradient {
                terms,
                declared_dissipative,
            } => VectorFieldSpec::polynomial_gradient(d, terms.iter().map(|t| (t.coeff, t.powers.clone())).collect())?
                .with_declared_dissipative(*declared_dissipative),
            Self::Tabulated {
                file,
                declared_dissipative,
            } => {
                let path = match base {
                    Some(b) if file.is_relative() => b.join(file),
                    _ => file.clone(),
                };
                read_tabulated(&path, d)?.with_declared_dissipative(*declared_dissipative)
            }
            Self::Sum { parts } => {
                VectorFieldSpec::sum(parts.iter().map(|p| p.build(d, base)).collect::<Result<_, _>>()?)?
            }
        })
    }

    /// `Some(M)` when the drift is linear.
    pub fn linear_matrix(&self) -> Option<&[Vec<f64>]> {
        match self {
            Self::Linear { matrix } => Some(matrix),
            _ => None,
        }
    }

    /// True for drifts of the form `-∇P`.
    pub fn is_gradient(&self) -> bool {
        match self {
            Self::PolynomialGradient { .. } => true,
            Self::Linear { matrix } => {
                (0..matrix.len()).all(|i| (0..matrix.len()).all(|j| matrix[i][j] == matrix[j][i]))
            }
            Self::Constant { .. } => false,
            _ => false,
        }
    }
}

fn read_tabulated(path: &Path, d: usize) -> Result<VectorFieldSpec, ScenarioError> {
    let field = "drift.file";
    let mut reader = csv::Reader::from_path(path).map_err(|e| invalid(field, format!("{}: {e}", path.display())))?;
    let mut coords = Vec::new();
    let mut values = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| invalid(field, e))?;
        if rec.len() != 2 * d {
            return Err(invalid(
                field,
                format!("row {i} has {} columns, expected {}", rec.len(), 2 * d),
            ));
        }
        let nums: Vec<f64> = rec
            .iter()
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| invalid(field, format!("row {i}: {e}")))?;
        coords.push(nums[..d].to_vec());
        values.push(nums[d..].to_vec());
    }
    let n = (values.len() as f64).powf(1.0 / d as f64).round() as usize;
    if n.pow(d as u32) != values.len() {
        return Err(invalid(
            field,
            format!("{} rows do not form a {d}-dimensional grid", values.len()),
        ));
    }
    let radius = coords.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs()));
    let grid = build_grid(d, radius, n).map_err(|e| invalid(field, e))?;
    for (k, x) in coords.iter().enumerate() {
        let p = grid.point(k);
        if x.iter().zip(&p).any(|(a, b)| (a - b).abs() > 1e-9 * radius.max(1.0)) {
            return Err(invalid(field, format!("row {k} is not at grid node {p:?}")));
        }
    }
    Ok(VectorFieldSpec::tabulated(grid, values)?)
}

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Self, ScenarioError> {
        let scenario: Scenario = toml::from_str(text).map_err(|e| ScenarioError::Config(e.to_string()))?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn from_file(path: &Path) -> Result<Self, ScenarioError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| ScenarioError::Config(format!("{}: {e}", path.display())))?;
        let mut s = Self::from_toml_str(&text)?;
        s.base_dir = path.parent().map(Path::to_path_buf);
        Ok(s)
    }

    /// Structural checks that need no numerics.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let d = self.dimension;
        if !(1..=3).contains(&d) {
            return Err(invalid("dimension", format!("must be 1, 2 or 3, got {d}")));
        }
        check_matrix("diffusion.matrix", &self.diffusion.matrix, d)?;
        self.drift.validate("drift", d)?;
        if let Some(r) = &self.regularization {
            if r.k.is_empty() || r.k.contains(&0) {
                return Err(invalid("regularization.k", "needs at least one positive index"));
            }
        }
        if self.lyapunov.power == 0 {
            return Err(invalid("lyapunov.power", "must be at least 1"));
        }
        if !(self.lyapunov.theta > 0.0) {
            return Err(invalid("lyapunov.theta", "must be positive"));
        }
        match &self.grid.radius {
            RadiusConfig::Fixed(r) if !(*r > 0.0 && r.is_finite()) => {
                return Err(invalid("grid.radius", format!("must be positive, got {r}")));
            }
            RadiusConfig::Named(s) if s != "auto" => {
                return Err(invalid(
                    "grid.radius",
                    format!("expected a number or \"auto\", got {s:?}"),
                ));
            }
            RadiusConfig::Named(_) if self.drift.is_tabulated() => {
                return Err(invalid("grid.radius", "\"auto\" is not available for tabulated drifts"));
            }
            _ => {}
        }
        let n = self.grid.points;
        if n < 3 || n % 2 == 0 {
            return Err(invalid("grid.points", format!("must be odd and at least 3, got {n}")));
        }
        if n.checked_pow(d as u32).is_none_or(|total| total > MAX_NODES) {
            return Err(invalid(
                "grid.points",
                format!("{n}^{d} nodes exceed the cap {MAX_NODES}"),
            ));
        }
        if self.test_functions.is_empty() {
            return Err(invalid("test_functions", "at least one test function is required"));
        }
        for (i, f) in self.test_functions.iter().enumerate() {
            f.validate(d).map_err(|m| invalid(&format!("test_functions[{i}]"), m))?;
        }
        let c = &self.checks;
        if let Some(t) = c.times.iter().find(|t| !(**t > 0.0 && t.is_finite())) {
            return Err(invalid("checks.times", format!("times must be positive, got {t}")));
        }
        if let Some(l) = c.lambdas.iter().find(|l| !(**l > 0.0 && l.is_finite())) {
            return Err(invalid("checks.lambdas", format!("λ must be positive, got {l}")));
        }
        if c.n_steps == 0 {
            return Err(invalid("checks.n_steps", "must be at least 1"));
        }
        if c.refinement_levels != 0 && c.refinement_levels < 3 {
            return Err(invalid("checks.refinement_levels", "use 0 or at least 3 levels"));
        }
        if c.dissipativity_samples == 0 {
            return Err(invalid("checks.dissipativity_samples", "must be positive"));
        }
        if c.invariant_measure && self.grid.boundary != BoundaryCondition::Reflecting {
            return Err(invalid(
                "checks.invariant_measure",
                "needs reflecting boundary conditions",
            ));
        }
        let t = &self.tolerances;
        for (name, v) in [
            ("tolerances.slack_factor", t.slack_factor),
            ("tolerances.oracle_semigroup", t.oracle_semigroup),
            ("tolerances.oracle_resolvent_factor", t.oracle_resolvent_factor),
            ("tolerances.density_factor", t.density_factor),
            ("tolerances.dual_drift_factor", t.dual_drift_factor),
            ("tolerances.markov", t.markov),
            ("tolerances.dissipativity", t.dissipativity),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(invalid(name, "must be finite and nonnegative"));
            }
        }
        if let Some(p) = &self.parabolic {
            p.validate(d)?;
        }
        Ok(())
    }

    pub fn diffusion_spec(&self) -> Result<DiffusionSpec, ScenarioError> {
        DiffusionSpec::new(self.diffusion.matrix.clone()).map_err(|e| invalid("diffusion.matrix", e))
    }

    pub fn drift_spec(&self) -> Result<VectorFieldSpec, ScenarioError> {
        self.drift.build(self.dimension, self.base_dir.as_deref())
    }

    /// Grid with an explicit radius (the caller resolves `"auto"`).
    pub fn grid_with_radius(&self, radius: f64) -> Result<Grid, ScenarioError> {
        build_grid(self.dimension, radius, self.grid.points).map_err(|e| invalid("grid", e))
    }
}

impl ParabolicConfig {
    fn validate(&self, d: usize) -> Result<(), ScenarioError> {
        match (self.pieces.is_empty(), &self.wave) {
            (true, None) => return Err(invalid("parabolic", "give either pieces or wave coefficients")),
            (false, Some(_)) => return Err(invalid("parabolic", "pieces and wave are mutually exclusive")),
            _ => {}
        }
        for (i, p) in self.pieces.iter().enumerate() {
            if let Some(a) = &p.diffusion {
                check_matrix(&format!("parabolic.pieces[{i}].diffusion"), a, d)?;
            }
            p.drift.validate(&format!("parabolic.pieces[{i}].drift"), d)?;
        }
        if let Some(w) = &self.wave {
            check_matrix("parabolic.wave.diffusion", &w.diffusion, d)?;
            check_matrix("parabolic.wave.diffusion_wave", &w.diffusion_wave, d)?;
            check_matrix("parabolic.wave.drift", &w.drift, d)?;
            check_matrix("parabolic.wave.drift_wave", &w.drift_wave, d)?;
            if self.sampler_level.is_none() {
                return Err(invalid(
                    "parabolic.sampler_level",
                    "wave coefficients need a sampler level",
                ));
            }
        }
        if !(0.0..1.0).contains(&self.s0) {
            return Err(invalid("parabolic.s0", format!("must lie in [0, 1), got {}", self.s0)));
        }
        if self.steps_per_interval == 0 {
            return Err(invalid("parabolic.steps_per_interval", "must be at least 1"));
        }
        if let Some(t) = self.report_times.iter().find(|t| !(**t > 0.0 && **t <= 1.0)) {
            return Err(invalid("parabolic.report_times", format!("{t} outside (0, 1]")));
        }
        for &n in self.sampler_levels.iter().chain(self.sampler_level.iter()) {
            if !(1..=16).contains(&n) {
                return Err(invalid("parabolic.sampler_levels", format!("level {n} outside 1..=16")));
            }
        }
        if !self.sampler_levels.is_empty() && self.sampler_levels.len() < 3 {
            return Err(invalid(
                "parabolic.sampler_levels",
                "a convergence study needs at least 3 levels",
            ));
        }
        Ok(())
    }
}
