use std::io::Write;
use std::str::FromStr;

use serde::Serialize;

use super::config::{RadiusConfig, RegularizationConfig, Scenario};
use super::run::{prepare, run_scenario, VerificationReport};
use super::ScenarioError;
use crate::discretization::assemble_generator;
use crate::drift::regularized_drift;
use crate::solver::{Resolvent, SolverOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    /// Regularization index of `b_k`.
    K,
    /// Grid spacing; `n_steps` scales with `1/h` so `τ/h` stays fixed.
    H,
    NSteps,
    Lambda,
}

impl FromStr for SweepAxis {
    type Err = ScenarioError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "k" => Ok(Self::K),
            "h" => Ok(Self::H),
            "n_steps" => Ok(Self::NSteps),
            "lambda" | "λ" => Ok(Self::Lambda),
            other => Err(ScenarioError::Config(format!(
                "--axis: expected one of k, h, n_steps, lambda, got {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub h: f64,
    pub n_steps: usize,
    /// Largest violation over gating bound checks.
    pub max_violation: f64,
    /// Largest violation over theorem-form checks, if any ran.
    pub theorem_violation: Option<f64>,
    pub max_oracle_error: Option<f64>,
    /// `sup |G_λ^{(k)}f - G_λf|` for the first λ and test function (k axis only).
    pub distance_to_unregularized: Option<f64>,
    /// Same distance between this row and the previous one (k axis only).
    pub successive_distance: Option<f64>,
    /// Log-ratio order of the oracle error (or the violation) against the previous row.
    pub observed_order: Option<f64>,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepTable {
    pub axis: SweepAxis,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), ScenarioError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "value",
            "h",
            "n_steps",
            "max_violation",
            "theorem_violation",
            "max_oracle_error",
            "distance_to_unregularized",
            "successive_distance",
            "observed_order",
            "pass",
        ])?;
        let opt = |v: Option<f64>| v.map(|v| format!("{v:e}")).unwrap_or_default();
        for r in &self.rows {
            w.write_record([
                format!("{}", r.value),
                format!("{:e}", r.h),
                r.n_steps.to_string(),
                format!("{:e}", r.max_violation),
                opt(r.theorem_violation),
                opt(r.max_oracle_error),
                opt(r.distance_to_unregularized),
                opt(r.successive_distance),
                opt(r.observed_order),
                r.pass.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn column(&self, f: impl Fn(&SweepRow) -> Option<f64>) -> Vec<Option<f64>> {
        self.rows.iter().map(f).collect()
    }
}

fn row_from_report(value: f64, report: &VerificationReport, n_steps: usize) -> SweepRow {
    let mut max_violation = 0.0f64;
    let mut theorem: Option<f64> = None;
    for (_, c) in report.checks() {
        if c.report.kind == crate::verification::BoundKind::ResolventTheorem {
            theorem = Some(theorem.unwrap_or(0.0).max(c.report.max_violation));
        } else {
            max_violation = max_violation.max(c.report.max_violation);
        }
    }
    let oracle = report
        .variants
        .iter()
        .flat_map(|v| v.oracles.iter())
        .chain(report.parabolic.iter().flat_map(|p| p.oracles.iter()))
        .map(|o| o.error)
        .fold(None, |a: Option<f64>, e| Some(a.map_or(e, |a| a.max(e))));
    SweepRow {
        value,
        h: report.grid.spacing,
        n_steps,
        max_violation,
        theorem_violation: theorem,
        max_oracle_error: oracle,
        distance_to_unregularized: None,
        successive_distance: None,
        observed_order: None,
        pass: report.pass,
    }
}

fn validate_values(axis: SweepAxis, values: &[f64]) -> Result<(), ScenarioError> {
    if values.is_empty() {
        return Err(ScenarioError::Config("--values: the value list is empty".into()));
    }
    for &v in values {
        let ok = match axis {
            SweepAxis::K | SweepAxis::NSteps => v >= 1.0 && v.fract() == 0.0 && v <= u32::MAX as f64,
            SweepAxis::H | SweepAxis::Lambda => v > 0.0 && v.is_finite(),
        };
        if !ok {
            return Err(ScenarioError::Config(format!(
                "--values: {v} is not admissible on this axis"
            )));
        }
    }
    Ok(())
}

/// Reruns `base` once per axis value and tabulates the outcome.
pub fn run_sweep(base: &Scenario, axis: SweepAxis, values: &[f64]) -> Result<SweepTable, ScenarioError> {
    validate_values(axis, values)?;
    let prepared = prepare(base)?;
    let radius = prepared.grid.radius();
    let base_h = prepared.grid.spacing();

    let mut template = base.clone();
    template.grid.radius = RadiusConfig::Fixed(radius);
    template.checks.refinement_levels = 0;

    let mut rows = Vec::with_capacity(values.len());
    match axis {
        SweepAxis::K => {
            let f = prepared.grid.evaluate(|x| base.test_functions[0].eval(x));
            let lambda = base.checks.lambdas.first().copied().unwrap_or(1.0);
            let raw = assemble_generator(&prepared.grid, &prepared.diffusion, &prepared.drift, base.grid.boundary)?;
            let (reference, _) = Resolvent::new(&raw, lambda, &SolverOptions::default())?.apply(&f)?;
            let inner = prepared.grid.inner_nodes();
            let sup = |a: &[f64], b: &[f64]| inner.iter().map(|&k| (a[k] - b[k]).abs()).fold(0.0, f64::max);
            let mut previous: Option<Vec<f64>> = None;
            for &v in values {
                let k = v as u32;
                let mut s = template.clone();
                s.regularization = Some(RegularizationConfig {
                    k: vec![k],
                    include_unregularized: false,
                });
                s.checks.oracle = false;
                let report = run_scenario(&s)?;
                let mut row = row_from_report(v, &report, s.checks.n_steps);
                let bk = regularized_drift(&prepared.drift, k)?;
                let gen = assemble_generator(&prepared.grid, &prepared.diffusion, &bk, base.grid.boundary)?;
                let (u, _) = Resolvent::new(&gen, lambda, &SolverOptions::default())?.apply(&f)?;
                row.distance_to_unregularized = Some(sup(&u, &reference));
                row.successive_distance = previous.as_ref().map(|p| sup(&u, p));
                previous = Some(u);
                rows.push(row);
            }
        }
        SweepAxis::H => {
            for &h in values {
                let n = (2.0 * radius / h).round() as usize + 1;
                if n < 3 || n % 2 == 0 || ((2.0 * radius / (n - 1) as f64) - h).abs() > 1e-9 * h {
                    return Err(ScenarioError::Config(format!(
                        "--values: h = {h} does not give an odd node count on the box of radius {radius}"
                    )));
                }
                let mut s = template.clone();
                s.grid.points = n;
                s.checks.n_steps = ((base.checks.n_steps as f64) * base_h / h).round().max(1.0) as usize;
                let report = run_scenario(&s)?;
                rows.push(row_from_report(h, &report, s.checks.n_steps));
            }
        }
        SweepAxis::NSteps => {
            for &v in values {
                let mut s = template.clone();
                s.checks.n_steps = v as usize;
                let report = run_scenario(&s)?;
                rows.push(row_from_report(v, &report, s.checks.n_steps));
            }
        }
        SweepAxis::Lambda => {
            for &v in values {
                let mut s = template.clone();
                s.checks.lambdas = vec![v];
                let report = run_scenario(&s)?;
                rows.push(row_from_report(v, &report, s.checks.n_steps));
            }
        }
    }

    for i in 1..rows.len() {
        let pick = |r: &SweepRow| r.max_oracle_error.unwrap_or(r.max_violation);
        let (a, b) = (pick(&rows[i - 1]), pick(&rows[i]));
        let scale = match axis {
            SweepAxis::H => rows[i - 1].h / rows[i].h,
            SweepAxis::NSteps | SweepAxis::K => rows[i].value / rows[i - 1].value,
            SweepAxis::Lambda => rows[i].value / rows[i - 1].value,
        };
        rows[i].observed_order = (a > 0.0 && b > 0.0 && scale > 0.0 && scale != 1.0).then(|| (a / b).ln() / scale.ln());
    }
    Ok(SweepTable { axis, rows })
}
