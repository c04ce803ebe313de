use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use super::config::{RadiusConfig, Scenario, TheoremForm};
use super::schedule::{build_schedule, ScheduleSummary};
use super::ScenarioError;
use crate::discretization::{
    assemble_generator, suggest_truncation, BoundaryCondition, DiffusionSpec, DiscreteGenerator, Grid, LyapunovSpec,
    TruncationOptions,
};
use crate::drift::{
    check_dissipative, check_strongly_dissipative, regularized_drift, sample_pairs, DissipativityReport,
    VectorFieldSpec,
};
use crate::invariant_measure::{dual_drift, duality_residual, stationary_density, DiscreteDensity};
use crate::solver::{
    parabolic_solve, riemann_sum, OperatorCache, ParabolicOptions, Resolvent, SolverOptions, Trajectory,
};
use crate::verification::{
    check_parabolic_sup_bound, check_resolvent_gradient_bound_in, check_semigroup_gradient_bound_in,
    check_sup_resolvent_bound_in, check_sup_semigroup_bound_in, markov_structure, ou_oracle, refinement_study,
    scaled_tolerance, BoundCheckReport, MarkovReport, OracleSpec, RefinementTable, ResolventForm, TestFunction,
    VerificationError,
};

pub const THEOREM_FORM_NOTE: &str = "The theorem-form resolvent bound |∇G_λf| ≤ λ⁻¹G_λ|∇f| is inconsistent \
with the lemma form |∇G_λf| ≤ G_λ|∇f| for λ ≠ 1; the Ornstein–Uhlenbeck closed form refutes it for λ > 1 \
with gap 1/(λ+1) − 1/λ². A theorem-form violation documents that inconsistency and is not a solver defect.";

#[derive(Debug, Clone, Serialize)]
pub struct ReportHeader {
    pub gating: Vec<&'static str>,
    pub informational: Vec<&'static str>,
    pub theorem_form: TheoremForm,
    pub note: &'static str,
}

#[derive(Debug, Clone, Serialize)]
pub struct DiffusionSummary {
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    /// `‖A‖ + ‖A⁻¹‖`
    pub bound: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LyapunovSummary {
    pub power: u32,
    pub theta: f64,
    /// Radius beyond which `LV ≤ -θ` on every sampled ray; absent for tabulated drifts.
    pub truncation_radius: Option<f64>,
    /// Whether the inner half-box contains the truncation ball.
    pub inner_box_covers: Option<bool>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Hypotheses {
    pub diffusion: DiffusionSummary,
    pub dissipativity: DissipativityReport,
    pub lyapunov: LyapunovSummary,
}

#[derive(Debug, Clone, Serialize)]
pub struct GridSummary {
    pub dimension: usize,
    pub radius: f64,
    pub points: usize,
    pub spacing: f64,
    pub nodes: usize,
    pub boundary: BoundaryCondition,
}

#[derive(Debug, Clone, Serialize)]
pub struct GeneratorSummary {
    pub monotone: bool,
    pub nnz: usize,
    pub max_row_sum: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckRecord {
    /// File stem of the margin CSV.
    pub id: String,
    pub function: String,
    pub gating: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<&'static str>,
    pub report: BoundCheckReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleRecord {
    pub id: String,
    pub function: String,
    pub oracle: &'static str,
    pub parameter: f64,
    pub error: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct RefinementRecord {
    pub id: String,
    pub function: String,
    pub table: RefinementTable,
    /// Violation at each level within that level's slack.
    pub within_slack: bool,
    pub non_increasing: bool,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValueCheck {
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl ValueCheck {
    fn new(value: f64, tolerance: f64) -> Self {
        Self {
            value,
            tolerance,
            pass: value <= tolerance,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DualDriftSummary {
    pub masked_nodes: usize,
    /// `reversible` (gradient drift) or `gaussian` (linear drift, closed form).
    pub expectation: Option<&'static str>,
    pub error: Option<ValueCheck>,
}

#[derive(Debug, Clone, Serialize)]
pub struct InvariantSummary {
    #[serde(skip)]
    pub density: DiscreteDensity,
    /// Closed-form density at the nodes, when one is known.
    #[serde(skip)]
    pub reference: Option<Vec<f64>>,
    pub mass: f64,
    pub floor: f64,
    /// `‖Lᵀϱ‖_∞` after inverse iteration.
    pub stationary_residual: f64,
    pub iterations: usize,
    /// Relative error against the Gaussian closed form on the inner half-box.
    pub oracle: Option<ValueCheck>,
    /// `max |⟨ϱ, T_t f⟩ - ⟨ϱ, f⟩|` over test functions and times.
    pub invariance: ValueCheck,
    pub dual_drift: DualDriftSummary,
    /// Duality residuals on successively refined grids (informational).
    pub duality: Option<RefinementTable>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub duality_note: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct VariantReport {
    /// `unregularized` or `k=<index>`.
    pub label: String,
    pub generator: GeneratorSummary,
    /// Strong dissipativity of `b_k` with modulus `1/k`; absent for the drift as given.
    pub strong_dissipativity: Option<DissipativityReport>,
    pub checks: Vec<CheckRecord>,
    pub oracles: Vec<OracleRecord>,
    pub refinement: Vec<RefinementRecord>,
    pub markov: Option<MarkovReport>,
    pub invariant_measure: Option<InvariantSummary>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConsistencyRecord {
    pub function: String,
    pub lambda: f64,
    pub k: Vec<u32>,
    /// `sup |G_λ^{(k)}f - G_λf|` on the inner half-box, per `k`.
    pub distance: Vec<f64>,
    pub monotone: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SamplerStudy {
    pub function: String,
    pub levels: Vec<u32>,
    /// Sup distance at `t = 1` between consecutive levels.
    pub distances: Vec<f64>,
    pub monotone: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ParabolicSummary {
    pub schedule: ScheduleSummary,
    pub times: Vec<f64>,
    pub sup_checks: Vec<CheckRecord>,
    pub oracles: Vec<OracleRecord>,
    /// Largest weak-form residual per test function (informational).
    pub weak_residuals: Vec<f64>,
    pub sampler_studies: Vec<SamplerStudy>,
    /// `|R_n(sin 2πt)(s₀)|` per sampler level for wave coefficients (informational).
    pub riemann_errors: Vec<f64>,
    #[serde(skip)]
    pub trajectories: Vec<(String, Trajectory)>,
}

/// The full outcome of one scenario.
#[derive(Debug, Clone, Serialize)]
pub struct VerificationReport {
    pub scenario: Scenario,
    pub header: ReportHeader,
    pub grid: GridSummary,
    pub hypotheses: Hypotheses,
    pub variants: Vec<VariantReport>,
    pub regularization: Vec<ConsistencyRecord>,
    pub parabolic: Option<ParabolicSummary>,
    /// Identifiers of the gating checks that failed.
    pub failures: Vec<String>,
    pub pass: bool,
    /// 0 when every gating check passes, 2 otherwise.
    pub exit_code: i32,
}

impl VerificationReport {
    pub fn checks(&self) -> impl Iterator<Item = (&str, &CheckRecord)> {
        self.variants
            .iter()
            .flat_map(|v| v.checks.iter().map(move |c| (v.label.as_str(), c)))
            .chain(
                self.parabolic
                    .iter()
                    .flat_map(|p| p.sup_checks.iter().map(|c| ("parabolic", c))),
            )
    }
}

pub(crate) struct Prepared {
    pub grid: Grid,
    pub diffusion: DiffusionSpec,
    pub drift: VectorFieldSpec,
    pub hypotheses: Hypotheses,
}

fn is_identity(a: &DiffusionSpec) -> bool {
    let d = a.dim();
    (0..d).all(|i| (0..d).all(|j| a.entry(i, j) == if i == j { 1.0 } else { 0.0 }))
}

fn is_minus_identity(m: &[Vec<f64>]) -> bool {
    m.iter()
        .enumerate()
        .all(|(i, r)| r.iter().enumerate().all(|(j, &v)| v == if i == j { -1.0 } else { 0.0 }))
}

/// Validates the hypotheses and resolves the grid.
pub(crate) fn prepare(s: &Scenario) -> Result<Prepared, ScenarioError> {
    s.validate()?;
    let diffusion = s.diffusion_spec()?;
    let drift = s.drift_spec()?;
    if !drift.declared_dissipative() {
        return Err(ScenarioError::Hypothesis(
            "drift is not declared dissipative; set declared_dissipative = true only for dissipative fields".into(),
        ));
    }

    let lyapunov = LyapunovSpec::new(s.lyapunov.power)?;
    let truncation = if s.drift.is_tabulated() {
        None
    } else {
        Some(
            suggest_truncation(
                &lyapunov,
                &diffusion,
                &drift,
                s.lyapunov.theta,
                &TruncationOptions::default(),
            )
            .map_err(|e| ScenarioError::Hypothesis(format!("Lyapunov condition: {e}")))?,
        )
    };
    let radius = match &s.grid.radius {
        RadiusConfig::Fixed(r) => *r,
        RadiusConfig::Named(_) => {
            let r = truncation.expect("validated: auto radius needs a non-tabulated drift");
            2.0 * r.max(0.5)
        }
    };
    let grid = s.grid_with_radius(radius)?;
    if let Some(r) = drift.domain_radius() {
        if r < radius {
            return Err(ScenarioError::Config(format!(
                "grid.radius: {radius} exceeds the tabulated drift domain {r}"
            )));
        }
    }

    let pairs = sample_pairs(s.dimension, radius, s.checks.dissipativity_samples, s.seed);
    let dissipativity = check_dissipative(&drift, &pairs, s.tolerances.dissipativity)?;
    if !dissipativity.pass {
        return Err(ScenarioError::Hypothesis(format!(
            "drift failed the dissipativity sample: (b(x+h) - b(x), h) = {:e} at x = {:?}, h = {:?}",
            dissipativity.max_inner_product, dissipativity.witness.x, dissipativity.witness.h
        )));
    }

    let hypotheses = Hypotheses {
        diffusion: DiffusionSummary {
            min_eigenvalue: diffusion.min_eigenvalue(),
            max_eigenvalue: diffusion.max_eigenvalue(),
            bound: diffusion.bound(),
        },
        dissipativity,
        lyapunov: LyapunovSummary {
            power: s.lyapunov.power,
            theta: s.lyapunov.theta,
            truncation_radius: truncation,
            inner_box_covers: truncation.map(|r| r <= 0.5 * radius),
        },
    };
    Ok(Prepared {
        grid,
        diffusion,
        drift,
        hypotheses,
    })
}

fn steps_for(t: f64, per_unit: usize) -> usize {
    ((t * per_unit as f64).round() as usize).max(1)
}

fn sanitize(v: f64) -> String {
    format!("{v}").replace('.', "p").replace('-', "m")
}

fn function_label(i: usize, f: &TestFunction) -> String {
    format!("{}{i}", f.label())
}

fn sup_on_inner(grid: &Grid, a: &[f64], b: &[f64]) -> f64 {
    grid.inner_nodes()
        .into_iter()
        .map(|k| (a[k] - b[k]).abs())
        .fold(0.0, f64::max)
}

/// Drift variants: the given drift and/or its regularizations.
pub(crate) fn drift_variants(
    s: &Scenario,
    drift: &VectorFieldSpec,
) -> Result<Vec<(String, Option<u32>, VectorFieldSpec)>, ScenarioError> {
    let mut out = Vec::new();
    match &s.regularization {
        Some(r) => {
            if r.include_unregularized {
                out.push(("unregularized".to_string(), None, drift.clone()));
            }
            for &k in &r.k {
                out.push((format!("k={k}"), Some(k), regularized_drift(drift, k)?));
            }
        }
        None => out.push(("unregularized".to_string(), None, drift.clone())),
    }
    Ok(out)
}

enum Task {
    Semigroup {
        fi: usize,
        t: f64,
    },
    Resolvent {
        fi: usize,
        lambda: f64,
        form: ResolventForm,
    },
    SupSemigroup {
        fi: usize,
    },
    SupResolvent {
        fi: usize,
    },
}

struct VariantContext<'a> {
    scenario: &'a Scenario,
    grid: &'a Grid,
    diffusion: &'a DiffusionSpec,
    functions: &'a [Vec<f64>],
    tolerances: &'a [f64],
}

fn run_checks(cx: &VariantContext, cache: &OperatorCache, label: &str) -> Result<Vec<CheckRecord>, ScenarioError> {
    let s = cx.scenario;
    let mut tasks = Vec::new();
    for fi in 0..cx.functions.len() {
        for &t in &s.checks.times {
            tasks.push(Task::Semigroup { fi, t });
        }
        for &lambda in &s.checks.lambdas {
            tasks.push(Task::Resolvent {
                fi,
                lambda,
                form: ResolventForm::Lemma,
            });
            if s.checks.theorem_form != TheoremForm::Off {
                tasks.push(Task::Resolvent {
                    fi,
                    lambda,
                    form: ResolventForm::Theorem,
                });
            }
        }
        tasks.push(Task::SupSemigroup { fi });
        if !s.checks.lambdas.is_empty() {
            tasks.push(Task::SupResolvent { fi });
        }
    }
    let variant = label.replace('=', "");
    tasks
        .par_iter()
        .map(|task| {
            let (fi, report) = match *task {
                Task::Semigroup { fi, t } => (
                    fi,
                    check_semigroup_gradient_bound_in(
                        cache,
                        &cx.functions[fi],
                        t,
                        steps_for(t, s.checks.n_steps),
                        cx.tolerances[fi],
                    )?,
                ),
                Task::Resolvent { fi, lambda, form } => (
                    fi,
                    check_resolvent_gradient_bound_in(cache, &cx.functions[fi], lambda, form, cx.tolerances[fi])?,
                ),
                Task::SupSemigroup { fi } => (
                    fi,
                    check_sup_semigroup_bound_in(
                        cache,
                        &cx.functions[fi],
                        &s.checks.times,
                        s.checks.n_steps,
                        cx.tolerances[fi],
                    )?,
                ),
                Task::SupResolvent { fi } => (
                    fi,
                    check_sup_resolvent_bound_in(cache, &cx.functions[fi], &s.checks.lambdas, cx.tolerances[fi])?,
                ),
            };
            let function = function_label(fi, &s.test_functions[fi]);
            let theorem = report.kind == crate::verification::BoundKind::ResolventTheorem;
            let id = match report.parameter {
                Some(p) => format!("{}_{variant}_{function}_{}", report.kind.name(), sanitize(p)),
                None => format!("{}_{variant}_{function}", report.kind.name()),
            };
            Ok(CheckRecord {
                id,
                function,
                gating: !theorem || s.checks.theorem_form == TheoremForm::Gating,
                note: theorem.then_some(THEOREM_FORM_NOTE),
                report,
            })
        })
        .collect()
}

fn run_oracles(cx: &VariantContext, cache: &OperatorCache) -> Result<Vec<OracleRecord>, ScenarioError> {
    let s = cx.scenario;
    let grid = cx.grid;
    let h = grid.spacing();
    let inner = grid.inner_nodes();
    let points: Vec<Vec<f64>> = inner.iter().map(|&k| grid.point(k)).collect();
    let mut out = Vec::new();
    for (fi, f) in s.test_functions.iter().enumerate() {
        let supported = matches!(
            f,
            TestFunction::Linear { .. }
                | TestFunction::Sine { .. }
                | TestFunction::Constant { .. }
                | TestFunction::Quadratic
        );
        if !supported {
            continue;
        }
        let function = function_label(fi, f);
        for &t in &s.checks.times {
            let exact = ou_oracle(&OracleSpec::Semigroup { t, f: f.clone() }, &points)?;
            let u = cache.semigroup(t, steps_for(t, s.checks.n_steps), &cx.functions[fi])?;
            let error = inner
                .iter()
                .zip(&exact)
                .map(|(&k, e)| (u[k] - e).abs())
                .fold(0.0, f64::max);
            let tolerance = s.tolerances.oracle_semigroup;
            out.push(OracleRecord {
                id: format!("ou-semigroup_{function}_{}", sanitize(t)),
                function: function.clone(),
                oracle: "ou-semigroup",
                parameter: t,
                error,
                tolerance,
                pass: error <= tolerance,
            });
        }
        for &lambda in &s.checks.lambdas {
            let exact = ou_oracle(&OracleSpec::Resolvent { lambda, f: f.clone() }, &points)?;
            let (v, _) = cache.resolvent(lambda)?.apply(&cx.functions[fi])?;
            let error = inner
                .iter()
                .zip(&exact)
                .map(|(&k, e)| (v[k] - e).abs())
                .fold(0.0, f64::max);
            let tolerance = s.tolerances.oracle_resolvent_factor * h;
            out.push(OracleRecord {
                id: format!("ou-resolvent_{function}_{}", sanitize(lambda)),
                function: function.clone(),
                oracle: "ou-resolvent",
                parameter: lambda,
                error,
                tolerance,
                pass: error <= tolerance,
            });
        }
    }
    Ok(out)
}

fn run_refinement(
    cx: &VariantContext,
    drift: &VectorFieldSpec,
    label: &str,
) -> Result<Vec<RefinementRecord>, ScenarioError> {
    let s = cx.scenario;
    let levels = s.checks.refinement_levels;
    let mut grids = vec![cx.grid.clone()];
    for _ in 1..levels {
        let next = grids.last().unwrap().refined()?;
        grids.push(next);
    }
    let generators: Vec<DiscreteGenerator> = grids
        .iter()
        .map(|g| assemble_generator(g, cx.diffusion, drift, s.grid.boundary))
        .collect::<Result<_, _>>()?;
    let caches: Vec<OperatorCache> = generators.iter().map(OperatorCache::new).collect();
    let variant = label.replace('=', "");

    enum Probe {
        Semigroup(f64),
        Lemma(f64),
    }
    let mut probes = Vec::new();
    for fi in 0..s.test_functions.len() {
        for &t in &s.checks.times {
            probes.push((fi, Probe::Semigroup(t)));
        }
        for &lambda in &s.checks.lambdas {
            probes.push((fi, Probe::Lemma(lambda)));
        }
    }
    probes
        .par_iter()
        .map(|(fi, probe)| {
            let f = &s.test_functions[*fi];
            let mut slack_ok = true;
            let table = refinement_study(cx.grid, levels, |g, level| {
                let values = g.evaluate(|x| f.eval(x));
                let tol = scaled_tolerance(g, &values, s.tolerances.slack_factor)?;
                let cache = &caches[level];
                let report = match probe {
                    Probe::Semigroup(t) => {
                        check_semigroup_gradient_bound_in(cache, &values, *t, steps_for(*t, s.checks.n_steps), tol)?
                    }
                    Probe::Lemma(lambda) => {
                        check_resolvent_gradient_bound_in(cache, &values, *lambda, ResolventForm::Lemma, tol)?
                    }
                };
                slack_ok &= report.pass;
                Ok(report.max_violation)
            })?;
            let non_increasing = table.rows.windows(2).all(|w| w[1].value <= w[0].value + 1e-12);
            let function = function_label(*fi, f);
            let id = match probe {
                Probe::Semigroup(t) => format!("refine_semigroup-pointwise_{variant}_{function}_{}", sanitize(*t)),
                Probe::Lemma(l) => format!("refine_resolvent-lemma_{variant}_{function}_{}", sanitize(*l)),
            };
            Ok(RefinementRecord {
                id,
                function,
                pass: slack_ok && non_increasing,
                within_slack: slack_ok,
                non_increasing,
                table,
            })
        })
        .collect::<Result<Vec<_>, ScenarioError>>()
}

/// `Σ` solving `MΣ + ΣMᵀ + 2A = 0`, the covariance of the linear drift's
/// stationary Gaussian.
fn stationary_covariance(m: &[Vec<f64>], a: &DiffusionSpec) -> Option<DMatrix<f64>> {
    let d = m.len();
    let mm = DMatrix::from_fn(d, d, |i, j| m[i][j]);
    let id = DMatrix::<f64>::identity(d, d);
    let k = id.kronecker(&mm) + mm.kronecker(&id);
    let rhs = DMatrix::from_fn(d * d, 1, |r, _| -2.0 * a.entry(r % d, r / d));
    let v = k.lu().solve(&rhs)?;
    let sigma = DMatrix::from_fn(d, d, |i, j| v[(i + d * j, 0)]);
    let sym = (&sigma + sigma.transpose()) * 0.5;
    sym.clone().cholesky().map(|_| sym)
}

fn run_invariant(
    cx: &VariantContext,
    cache: &OperatorCache,
    drift: &VectorFieldSpec,
    linear: Option<&[Vec<f64>]>,
    gradient: bool,
    refine_duality: bool,
) -> Result<InvariantSummary, ScenarioError> {
    let s = cx.scenario;
    let grid = cx.grid;
    let h = grid.spacing();
    let inner = grid.inner_nodes();
    let density = stationary_density(cache.generator())?;
    let rho = density.values();

    let covariance = linear.and_then(|m| stationary_covariance(m, cx.diffusion));
    let reference = covariance.as_ref().map(|sigma| {
        let d = grid.dim();
        let inv = sigma.clone().try_inverse().expect("positive definite");
        let norm = (2.0 * std::f64::consts::PI).powf(-0.5 * d as f64) / sigma.determinant().sqrt();
        (0..grid.len())
            .map(|k| {
                let x = nalgebra::DVector::from_vec(grid.point(k));
                norm * (-0.5 * x.dot(&(&inv * &x))).exp()
            })
            .collect::<Vec<f64>>()
    });
    let oracle = reference.as_ref().map(|exact| {
        let err = inner
            .iter()
            .map(|&k| ((rho[k] - exact[k]) / exact[k]).abs())
            .fold(0.0, f64::max);
        ValueCheck::new(err, s.tolerances.density_factor * h)
    });

    let mut invariance = 0.0f64;
    for f in cx.functions {
        let base = density.integrate(f);
        for &t in &s.checks.times {
            let u = cache.semigroup(t, steps_for(t, s.checks.n_steps), f)?;
            let scale = f.iter().fold(1.0f64, |a, v| a.max(v.abs()));
            invariance = invariance.max((density.integrate(&u) - base).abs() / scale);
        }
    }

    let dual = dual_drift(&density, cx.diffusion, drift)?;
    let expected: Option<(&'static str, Box<dyn Fn(&[f64]) -> Vec<f64> + Sync>)> =
        if gradient && is_identity(cx.diffusion) {
            let b = drift.clone();
            Some((
                "reversible",
                Box::new(move |x: &[f64]| b.eval(x).unwrap_or_else(|_| vec![f64::NAN; x.len()])),
            ))
        } else if let (Some(m), Some(sigma)) = (linear, covariance.as_ref()) {
            let d = grid.dim();
            let a = DMatrix::from_fn(d, d, |i, j| cx.diffusion.entry(i, j));
            let mm = DMatrix::from_fn(d, d, |i, j| m[i][j]);
            let coeff = -2.0 * a * sigma.clone().try_inverse().expect("positive definite") - mm;
            Some((
                "gaussian",
                Box::new(move |x: &[f64]| {
                    (&coeff * nalgebra::DVector::from_column_slice(x))
                        .iter()
                        .copied()
                        .collect()
                }),
            ))
        } else {
            None
        };
    let dual_summary = match expected {
        Some((name, b_hat)) => {
            let mut err = 0.0f64;
            for &k in &inner {
                let x = grid.point(k);
                let got = dual.field.eval(&x)?;
                let want = b_hat(&x);
                let e = got
                    .iter()
                    .zip(&want)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                err = err.max(e);
            }
            DualDriftSummary {
                masked_nodes: dual.masked.len(),
                expectation: Some(name),
                error: Some(ValueCheck::new(err, s.tolerances.dual_drift_factor * h)),
            }
        }
        None => DualDriftSummary {
            masked_nodes: dual.masked.len(),
            expectation: None,
            error: None,
        },
    };

    let r = grid.radius();
    let mut offset = vec![0.0; grid.dim()];
    offset[0] = r / 8.0;
    let phi = TestFunction::Bump {
        center: vec![0.0; grid.dim()],
        radius: r / 4.0,
    };
    let psi = TestFunction::Bump {
        center: offset,
        radius: r / 4.0,
    };
    let duality_at = |g: &Grid| -> Result<f64, ScenarioError> {
        let gen = assemble_generator(g, cx.diffusion, drift, s.grid.boundary)?;
        let rho = stationary_density(&gen)?;
        let dual = dual_drift(&rho, cx.diffusion, drift)?;
        let dual_gen = assemble_generator(g, cx.diffusion, &dual.field, s.grid.boundary)?;
        Ok(duality_residual(
            &gen,
            &dual_gen,
            &rho,
            &g.evaluate(|x| phi.eval(x)),
            &g.evaluate(|x| psi.eval(x)),
        )?)
    };
    let (duality, duality_note) = if !dual.masked.is_empty() {
        (
            None,
            Some(format!(
                "{} nodes below the positivity floor; duality not evaluated",
                dual.masked.len()
            )),
        )
    } else if refine_duality {
        let mut failure = None;
        let table = refinement_study(grid, s.checks.refinement_levels.max(3), |g, _| {
            duality_at(g).map_err(|e| {
                failure = Some(e.to_string());
                VerificationError::InvalidInput("duality residual failed".into())
            })
        });
        match table {
            Ok(t) => (Some(t), None),
            Err(e) => (None, Some(failure.unwrap_or_else(|| e.to_string()))),
        }
    } else {
        let v = duality_at(grid)?;
        (
            Some(RefinementTable {
                rows: vec![crate::verification::RefinementRow {
                    h,
                    value: v,
                    order: None,
                }],
                summary: "single level".into(),
            }),
            None,
        )
    };

    Ok(InvariantSummary {
        mass: density.mass(),
        floor: density.floor(),
        stationary_residual: density.residual(),
        iterations: density.iterations(),
        density,
        reference,
        oracle,
        invariance: ValueCheck::new(invariance, 1e-8),
        dual_drift: dual_summary,
        duality,
        duality_note,
    })
}

fn run_variant(
    cx: &VariantContext,
    label: &str,
    k: Option<u32>,
    drift: &VectorFieldSpec,
    raw_drift: &VectorFieldSpec,
) -> Result<VariantReport, ScenarioError> {
    let s = cx.scenario;
    let generator = assemble_generator(cx.grid, cx.diffusion, drift, s.grid.boundary)?;
    if !generator.is_monotone() {
        return Err(ScenarioError::Config(format!(
            "grid: the {label} generator is not monotone; refine the grid or use a diagonally dominant diffusion"
        )));
    }
    let strong_dissipativity = match k {
        Some(k) => {
            let pairs = sample_pairs(
                s.dimension,
                cx.grid.radius(),
                s.checks.dissipativity_samples,
                s.seed ^ 0x5eed,
            );
            Some(check_strongly_dissipative(
                drift,
                &pairs,
                1.0 / k as f64,
                s.tolerances.dissipativity,
            )?)
        }
        None => None,
    };
    let cache = OperatorCache::new(&generator);
    let checks = run_checks(cx, &cache, label)?;
    let ou = k.is_none() && is_identity(cx.diffusion) && s.drift.linear_matrix().is_some_and(is_minus_identity);
    let oracles = if s.checks.oracle && ou {
        run_oracles(cx, &cache)?
    } else {
        Vec::new()
    };
    let refinement = if s.checks.refinement_levels >= 3 {
        run_refinement(cx, drift, label)?
    } else {
        Vec::new()
    };
    let markov = if s.checks.markov {
        Some(markov_structure(
            &generator,
            s.checks.lambdas.first().copied().unwrap_or(1.0),
            2.0 * s.checks.lambdas.first().copied().unwrap_or(1.0),
            s.checks.times.last().copied().unwrap_or(1.0),
            s.checks.n_steps.min(16),
            5,
            s.seed,
            s.tolerances.markov,
        )?)
    } else {
        None
    };
    let invariant_measure = if s.checks.invariant_measure {
        let linear = if k.is_none() { s.drift.linear_matrix() } else { None };
        let _ = raw_drift;
        Some(run_invariant(
            cx,
            &cache,
            drift,
            linear,
            s.drift.is_gradient(),
            k.is_none() && s.checks.refinement_levels >= 3,
        )?)
    } else {
        None
    };
    Ok(VariantReport {
        label: label.to_string(),
        generator: GeneratorSummary {
            monotone: generator.is_monotone(),
            nnz: generator.matrix().nnz(),
            max_row_sum: generator.matrix().row_sums().iter().fold(0.0, |a, v| a.max(v.abs())),
        },
        strong_dissipativity,
        checks,
        oracles,
        refinement,
        markov,
        invariant_measure,
    })
}

fn run_consistency(
    cx: &VariantContext,
    variants: &[(String, Option<u32>, VectorFieldSpec)],
) -> Result<Vec<ConsistencyRecord>, ScenarioError> {
    let s = cx.scenario;
    let Some(raw) = variants.iter().find(|v| v.1.is_none()) else {
        return Ok(Vec::new());
    };
    let regularized: Vec<_> = variants.iter().filter(|v| v.1.is_some()).collect();
    if regularized.len() < 2 {
        return Ok(Vec::new());
    }
    let gens: Vec<DiscreteGenerator> = std::iter::once(raw)
        .chain(regularized.iter().copied())
        .map(|v| assemble_generator(cx.grid, cx.diffusion, &v.2, s.grid.boundary))
        .collect::<Result<_, _>>()?;
    let mut out = Vec::new();
    for &lambda in &s.checks.lambdas {
        let solvers: Vec<Resolvent> = gens
            .iter()
            .map(|g| Resolvent::new(g, lambda, &SolverOptions::default()))
            .collect::<Result<_, _>>()?;
        for (fi, f) in cx.functions.iter().enumerate() {
            let (reference, _) = solvers[0].apply(f)?;
            let mut distance = Vec::new();
            for solver in &solvers[1..] {
                let (v, _) = solver.apply(f)?;
                distance.push(sup_on_inner(cx.grid, &v, &reference));
            }
            let monotone = distance.windows(2).all(|w| w[1] < w[0]);
            out.push(ConsistencyRecord {
                function: function_label(fi, &s.test_functions[fi]),
                lambda,
                k: regularized.iter().map(|v| v.1.unwrap()).collect(),
                distance,
                monotone,
            });
        }
    }
    Ok(out)
}

fn run_parabolic(cx: &VariantContext) -> Result<Option<ParabolicSummary>, ScenarioError> {
    let s = cx.scenario;
    let Some(p) = &s.parabolic else {
        return Ok(None);
    };
    let (schedule, summary) = build_schedule(s, p, p.sampler_level, cx.grid.radius())?;
    let options = ParabolicOptions {
        steps_per_interval: p.steps_per_interval,
        report_times: p.report_times.clone(),
        boundary: s.grid.boundary,
        solver: SolverOptions::default(),
    };
    let mut sup_checks = Vec::new();
    let mut oracles = Vec::new();
    let mut weak_residuals = Vec::new();
    let mut times = Vec::new();
    let mut trajectories = Vec::new();
    let rates = summary.ou_rates.clone();
    for (fi, f) in cx.functions.iter().enumerate() {
        let function = function_label(fi, &s.test_functions[fi]);
        let report = check_parabolic_sup_bound(&schedule, cx.grid, f, &options, cx.tolerances[fi])?;
        sup_checks.push(CheckRecord {
            id: format!("{}_{function}", report.kind.name()),
            function: function.clone(),
            gating: true,
            note: None,
            report,
        });
        let trajectory = parabolic_solve(&schedule, cx.grid, f, &options)?;
        times = trajectory.times.clone();
        weak_residuals.push(trajectory.weak_residuals.iter().fold(0.0, |a: f64, v| a.max(*v)));
        if let (Some(rates), TestFunction::Linear { slope }) = (&rates, &s.test_functions[fi]) {
            if s.checks.oracle {
                let inner = cx.grid.inner_nodes();
                let points: Vec<Vec<f64>> = inner.iter().map(|&k| cx.grid.point(k)).collect();
                let exact = ou_oracle(
                    &OracleSpec::ScheduledLinear {
                        breakpoints: schedule.breakpoints().to_vec(),
                        rates: rates.clone(),
                        t: 1.0,
                        slope: slope.clone(),
                    },
                    &points,
                )?;
                let u = trajectory.final_state();
                let error = inner
                    .iter()
                    .zip(&exact)
                    .map(|(&k, e)| (u[k] - e).abs())
                    .fold(0.0, f64::max);
                let tolerance = s.tolerances.oracle_semigroup;
                oracles.push(OracleRecord {
                    id: format!("scheduled-ou_{function}_1"),
                    function: function.clone(),
                    oracle: "scheduled-ou-parabolic",
                    parameter: 1.0,
                    error,
                    tolerance,
                    pass: error <= tolerance,
                });
            }
        }
        trajectories.push((function, trajectory));
    }

    let mut sampler_studies = Vec::new();
    let mut riemann_errors = Vec::new();
    if !p.sampler_levels.is_empty() {
        let mut levels = p.sampler_levels.clone();
        levels.sort_unstable();
        levels.dedup();
        let top = *levels.last().unwrap();
        let mut finals: Vec<Vec<Vec<f64>>> = Vec::new();
        for &n in &levels {
            let (sched, _) = build_schedule(s, p, Some(n), cx.grid.radius())?;
            let opts = ParabolicOptions {
                steps_per_interval: p.steps_per_interval << (top - n),
                report_times: Vec::new(),
                ..options.clone()
            };
            finals.push(
                cx.functions
                    .par_iter()
                    .map(|f| Ok(parabolic_solve(&sched, cx.grid, f, &opts)?.final_state().to_vec()))
                    .collect::<Result<_, ScenarioError>>()?,
            );
            if p.wave.is_some() {
                riemann_errors.push(riemann_sum(|t| (std::f64::consts::TAU * t).sin(), n, p.s0)?.abs());
            }
        }
        for fi in 0..cx.functions.len() {
            let distances: Vec<f64> = finals
                .windows(2)
                .map(|w| sup_on_inner(cx.grid, &w[0][fi], &w[1][fi]))
                .collect();
            sampler_studies.push(SamplerStudy {
                function: function_label(fi, &s.test_functions[fi]),
                levels: levels.clone(),
                monotone: distances.windows(2).all(|w| w[1] < w[0]),
                distances,
            });
        }
    }

    Ok(Some(ParabolicSummary {
        schedule: summary,
        times,
        sup_checks,
        oracles,
        weak_residuals,
        sampler_studies,
        riemann_errors,
        trajectories,
    }))
}

/// Validates the hypotheses, runs every requested check, and collects the verdict.
pub fn run_scenario(s: &Scenario) -> Result<VerificationReport, ScenarioError> {
    let prepared = prepare(s)?;
    let grid = &prepared.grid;
    let functions: Vec<Vec<f64>> = s.test_functions.iter().map(|f| grid.evaluate(|x| f.eval(x))).collect();
    let tolerances: Vec<f64> = functions
        .iter()
        .map(|f| scaled_tolerance(grid, f, s.tolerances.slack_factor))
        .collect::<Result<_, _>>()?;
    let cx = VariantContext {
        scenario: s,
        grid,
        diffusion: &prepared.diffusion,
        functions: &functions,
        tolerances: &tolerances,
    };
    let variants = drift_variants(s, &prepared.drift)?;
    let variant_reports = variants
        .iter()
        .map(|(label, k, drift)| run_variant(&cx, label, *k, drift, &prepared.drift))
        .collect::<Result<Vec<_>, _>>()?;
    let regularization = run_consistency(&cx, &variants)?;
    let parabolic = run_parabolic(&cx)?;

    let mut failures = Vec::new();
    for v in &variant_reports {
        let prefix = &v.label;
        if let Some(sd) = &v.strong_dissipativity {
            if !sd.pass {
                failures.push(format!("{prefix}: strong dissipativity"));
            }
        }
        for c in &v.checks {
            if c.gating && !c.report.pass {
                failures.push(format!("{prefix}: {}", c.id));
            }
        }
        for o in &v.oracles {
            if !o.pass {
                failures.push(format!("{prefix}: {}", o.id));
            }
        }
        for r in &v.refinement {
            if !r.pass {
                failures.push(format!("{prefix}: {}", r.id));
            }
        }
        if let Some(m) = &v.markov {
            if !m.pass {
                failures.push(format!("{prefix}: markov structure"));
            }
        }
        if let Some(inv) = &v.invariant_measure {
            if inv.oracle.as_ref().is_some_and(|o| !o.pass) {
                failures.push(format!("{prefix}: stationary density oracle"));
            }
            if !inv.invariance.pass {
                failures.push(format!("{prefix}: invariance under the semigroup"));
            }
            if inv.dual_drift.error.as_ref().is_some_and(|e| !e.pass) {
                failures.push(format!("{prefix}: dual drift"));
            }
        }
    }
    if let Some(p) = &parabolic {
        for c in &p.sup_checks {
            if !c.report.pass {
                failures.push(format!("parabolic: {}", c.id));
            }
        }
        for o in &p.oracles {
            if !o.pass {
                failures.push(format!("parabolic: {}", o.id));
            }
        }
        for st in &p.sampler_studies {
            if !st.monotone {
                failures.push(format!("parabolic: sampler convergence {}", st.function));
            }
        }
    }

    let mut gating = vec![
        "semigroup-pointwise",
        "resolvent-lemma",
        "sup-semigroup",
        "sup-resolvent",
        "parabolic-sup",
        "oracles",
        "refinement",
        "markov",
        "stationary-density",
        "dual-drift",
        "sampler-convergence",
    ];
    let mut informational = vec![
        "regularization-consistency",
        "duality-residual",
        "weak-residual",
        "riemann-sum",
    ];
    match s.checks.theorem_form {
        TheoremForm::Gating => gating.push("resolvent-theorem"),
        TheoremForm::Informational => informational.push("resolvent-theorem"),
        TheoremForm::Off => {}
    }

    Ok(VerificationReport {
        scenario: s.clone(),
        header: ReportHeader {
            gating,
            informational,
            theorem_form: s.checks.theorem_form,
            note: THEOREM_FORM_NOTE,
        },
        grid: GridSummary {
            dimension: grid.dim(),
            radius: grid.radius(),
            points: grid.points_per_axis(),
            spacing: grid.spacing(),
            nodes: grid.len(),
            boundary: s.grid.boundary,
        },
        hypotheses: prepared.hypotheses,
        pass: failures.is_empty(),
        exit_code: if failures.is_empty() { 0 } else { 2 },
        variants: variant_reports,
        regularization,
        parabolic,
        failures,
    })
}
