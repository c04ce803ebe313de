use std::io::Write;

use serde::Serialize;

use super::VerificationError;
use crate::discretization::{discrete_gradient, DiscreteGenerator, Grid};
use crate::solver::{parabolic_solve, CoefficientSchedule, OperatorCache, ParabolicOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundKind {
    SemigroupPointwise,
    ResolventLemma,
    ResolventTheorem,
    SupSemigroup,
    SupResolvent,
    ParabolicSup,
}

impl BoundKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::SemigroupPointwise => "semigroup-pointwise",
            Self::ResolventLemma => "resolvent-lemma",
            Self::ResolventTheorem => "resolvent-theorem",
            Self::SupSemigroup => "sup-semigroup",
            Self::SupResolvent => "sup-resolvent",
            Self::ParabolicSup => "parabolic-sup",
        }
    }
}

/// Right-hand side used by the resolvent check: `G_λ|∇f|` or `λ⁻¹G_λ|∇f|`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ResolventForm {
    Lemma,
    Theorem,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarginEntry {
    pub coordinates: Vec<f64>,
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs - lhs`
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundCheckReport {
    pub kind: BoundKind,
    /// `t` for pointwise semigroup checks, `λ` for resolvent checks.
    pub parameter: Option<f64>,
    /// Names of the coordinate columns (`x0`, … or `t` or `lambda`).
    #[serde(skip)]
    pub coordinate_names: Vec<String>,
    /// Inner half-box nodes for pointwise checks, one entry per parameter
    /// value for sup-norm checks.
    #[serde(skip)]
    pub entries: Vec<MarginEntry>,
    pub min_margin: f64,
    pub max_violation: f64,
    pub witness: Option<MarginEntry>,
    /// Largest violation in the boundary layer outside the inner half-box.
    /// Logged only.
    pub boundary_max_violation: f64,
    /// Largest increase of the left side between consecutive entries, for
    /// checks that must be non-increasing.
    pub monotonicity_violation: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl BoundCheckReport {
    fn assemble(
        kind: BoundKind,
        parameter: Option<f64>,
        coordinate_names: Vec<String>,
        entries: Vec<MarginEntry>,
        boundary_max_violation: f64,
        monotonicity_violation: f64,
        tolerance: f64,
    ) -> Self {
        let mut min_margin = f64::INFINITY;
        let mut witness = None;
        for e in &entries {
            if e.margin < min_margin || witness.is_none() {
                min_margin = e.margin;
                witness = Some(e.clone());
            }
        }
        let max_violation = (-min_margin).max(0.0);
        let pass = max_violation <= tolerance && monotonicity_violation <= tolerance;
        Self {
            kind,
            parameter,
            coordinate_names,
            entries,
            min_margin,
            max_violation,
            witness,
            boundary_max_violation,
            monotonicity_violation,
            tolerance,
            pass,
        }
    }

    /// Columns: coordinates…, lhs, rhs, margin.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = self.coordinate_names.clone();
        header.extend(["lhs", "rhs", "margin"].map(String::from));
        w.write_record(&header)?;
        for e in &self.entries {
            let mut row: Vec<String> = e.coordinates.iter().map(|c| c.to_string()).collect();
            row.extend([e.lhs, e.rhs, e.margin].map(|v| format!("{v:e}")));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn pointwise(
    kind: BoundKind,
    parameter: f64,
    grid: &Grid,
    lhs: &[f64],
    rhs: &[f64],
    tolerance: f64,
) -> BoundCheckReport {
    let mut entries = Vec::new();
    let mut boundary = 0.0f64;
    for node in 0..grid.len() {
        let margin = rhs[node] - lhs[node];
        if grid.is_inner(node) {
            entries.push(MarginEntry {
                coordinates: grid.point(node),
                lhs: lhs[node],
                rhs: rhs[node],
                margin,
            });
        } else {
            boundary = boundary.max(-margin);
        }
    }
    let names = (0..grid.dim()).map(|k| format!("x{k}")).collect();
    BoundCheckReport::assemble(kind, Some(parameter), names, entries, boundary, 0.0, tolerance)
}

fn sup_report(
    kind: BoundKind,
    name: &str,
    params: &[f64],
    seminorms: &[f64],
    reference: f64,
    monotone: bool,
    tolerance: f64,
) -> BoundCheckReport {
    let entries = params
        .iter()
        .zip(seminorms)
        .map(|(&p, &s)| MarginEntry {
            coordinates: vec![p],
            lhs: s,
            rhs: reference,
            margin: reference - s,
        })
        .collect();
    let mut increase = 0.0f64;
    if monotone {
        let mut prev = reference;
        for &s in seminorms {
            increase = increase.max(s - prev);
            prev = s;
        }
    }
    BoundCheckReport::assemble(kind, None, vec![name.into()], entries, 0.0, increase, tolerance)
}

/// Largest `|∇_h u|` over the inner half-box.
pub fn lipschitz_seminorm(grid: &Grid, u: &[f64]) -> Result<f64, VerificationError> {
    let g = discrete_gradient(grid, u)?;
    Ok(grid.inner_nodes().into_iter().map(|k| g.norms()[k]).fold(0.0, f64::max))
}

/// Default slack factor `c` in `c·h·Lip_h(f)`.
pub const DEFAULT_SLACK_FACTOR: f64 = 10.0;
/// Absolute floor added to every slack so rounding in constant data passes.
pub const ROUNDING_FLOOR: f64 = 1e-9;

/// The slack `10·h·Lip_h(f) + 1e-9` used for gradient-bound checks.
pub fn default_tolerance(grid: &Grid, f: &[f64]) -> Result<f64, VerificationError> {
    scaled_tolerance(grid, f, DEFAULT_SLACK_FACTOR)
}

/// `factor·h·Lip_h(f) + 1e-9`.
pub fn scaled_tolerance(grid: &Grid, f: &[f64], factor: f64) -> Result<f64, VerificationError> {
    Ok(factor * grid.spacing() * lipschitz_seminorm(grid, f)? + ROUNDING_FLOOR)
}

fn require_monotone(generator: &DiscreteGenerator, f: &[f64]) -> Result<(), VerificationError> {
    if !generator.is_monotone() {
        return Err(VerificationError::InvalidInput(
            "gradient bounds need a monotone generator".into(),
        ));
    }
    if f.len() != generator.len() {
        return Err(VerificationError::InvalidInput(format!(
            "f has {} values for {} nodes",
            f.len(),
            generator.len()
        )));
    }
    Ok(())
}

/// `|∇_h T_t f| ≤ T_t|∇_h f|` with `T_t = (I - (t/n)L_h)^{-n}`.
pub fn check_semigroup_gradient_bound(
    generator: &DiscreteGenerator,
    f: &[f64],
    t: f64,
    n_steps: usize,
    tolerance: f64,
) -> Result<BoundCheckReport, VerificationError> {
    check_semigroup_gradient_bound_in(&OperatorCache::new(generator), f, t, n_steps, tolerance)
}

/// [`check_semigroup_gradient_bound`] reusing factored systems from `cache`.
pub fn check_semigroup_gradient_bound_in(
    cache: &OperatorCache,
    f: &[f64],
    t: f64,
    n_steps: usize,
    tolerance: f64,
) -> Result<BoundCheckReport, VerificationError> {
    let generator = cache.generator();
    require_monotone(generator, f)?;
    if !(t.is_finite() && t > 0.0) {
        return Err(VerificationError::InvalidInput(format!("t must be positive, got {t}")));
    }
    let grid = generator.grid();
    let grad_f = discrete_gradient(grid, f)?.into_norms();
    let u = cache.semigroup(t, n_steps, f)?;
    let rhs = cache.semigroup(t, n_steps, &grad_f)?;
    let lhs = discrete_gradient(grid, &u)?.into_norms();
    Ok(pointwise(BoundKind::SemigroupPointwise, t, grid, &lhs, &rhs, tolerance))
}

/// `|∇_h G_λ f| ≤ G_λ|∇_h f|` (lemma form) or `≤ λ⁻¹G_λ|∇_h f|` (theorem form).
pub fn check_resolvent_gradient_bound(
    generator: &DiscreteGenerator,
    f: &[f64],
    lambda: f64,
    form: ResolventForm,
    tolerance: f64,
) -> Result<BoundCheckReport, VerificationError> {
    check_resolvent_gradient_bound_in(&OperatorCache::new(generator), f, lambda, form, tolerance)
}

pub fn check_resolvent_gradient_bound_in(
    cache: &OperatorCache,
    f: &[f64],
    lambda: f64,
    form: ResolventForm,
    tolerance: f64,
) -> Result<BoundCheckReport, VerificationError> {
    let generator = cache.generator();
    require_monotone(generator, f)?;
    let grid = generator.grid();
    let resolvent = cache.resolvent(lambda)?;
    let grad_f = discrete_gradient(grid, f)?.into_norms();
    let (v, _) = resolvent.apply(f)?;
    let (mut rhs, _) = resolvent.apply(&grad_f)?;
    let kind = match form {
        ResolventForm::Lemma => BoundKind::ResolventLemma,
        ResolventForm::Theorem => {
            rhs.iter_mut().for_each(|r| *r /= lambda);
            BoundKind::ResolventTheorem
        }
    };
    let lhs = discrete_gradient(grid, &v)?.into_norms();
    Ok(pointwise(kind, lambda, grid, &lhs, &rhs, tolerance))
}

/// `Lip_h(T_t f) ≤ Lip_h(f)` at each requested `t`, and non-increasing in `t`.
///
/// Time advances by implicit-Euler steps of size `1/steps_per_unit`; each `t`
/// is reached after `max(1, round(t·steps_per_unit))` steps.
pub fn check_sup_semigroup_bound(
    generator: &DiscreteGenerator,
    f: &[f64],
    times: &[f64],
    steps_per_unit: usize,
    tolerance: f64,
) -> Result<BoundCheckReport, VerificationError> {
    check_sup_semigroup_bound_in(&OperatorCache::new(generator), f, times, steps_per_unit, tolerance)
}

pub fn check_sup_semigroup_bound_in(
    cache: &OperatorCache,
    f: &[f64],
    times: &[f64],
    steps_per_unit: usize,
    tolerance: f64,
) -> Result<BoundCheckReport, VerificationError> {
    let generator = cache.generator();
    require_monotone(generator, f)?;
    if times.is_empty() || times.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
        return Err(VerificationError::InvalidInput(
            "times must be positive and finite".into(),
        ));
    }
    if steps_per_unit == 0 {
        return Err(VerificationError::InvalidInput(
            "steps_per_unit must be positive".into(),
        ));
    }
    let grid = generator.grid();
    let mut sorted = times.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let tau = 1.0 / steps_per_unit as f64;
    let step = cache.euler_step(tau)?;
    let mut u = f.to_vec();
    let mut done = 0usize;
    let mut seminorms = Vec::with_capacity(sorted.len());
    for &t in &sorted {
        let target = ((t / tau).round() as usize).max(1);
        if target > done {
            u = step.apply_steps(&u, target - done)?;
            done = target;
        }
        seminorms.push(lipschitz_seminorm(grid, &u)?);
    }
    let reference = lipschitz_seminorm(grid, f)?;
    Ok(sup_report(
        BoundKind::SupSemigroup,
        "t",
        &sorted,
        &seminorms,
        reference,
        true,
        tolerance,
    ))
}

/// `λ·Lip_h(G_λ f) ≤ Lip_h(f)` for each `λ`.
pub fn check_sup_resolvent_bound(
    generator: &DiscreteGenerator,
    f: &[f64],
    lambdas: &[f64],
    tolerance: f64,
) -> Result<BoundCheckReport, VerificationError> {
    check_sup_resolvent_bound_in(&OperatorCache::new(generator), f, lambdas, tolerance)
}

pub fn check_sup_resolvent_bound_in(
    cache: &OperatorCache,
    f: &[f64],
    lambdas: &[f64],
    tolerance: f64,
) -> Result<BoundCheckReport, VerificationError> {
    let generator = cache.generator();
    require_monotone(generator, f)?;
    if lambdas.is_empty() {
        return Err(VerificationError::InvalidInput("no λ values".into()));
    }
    let grid = generator.grid();
    let mut seminorms = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let (v, _) = cache.resolvent(lambda)?.apply(f)?;
        seminorms.push(lambda * lipschitz_seminorm(grid, &v)?);
    }
    let reference = lipschitz_seminorm(grid, f)?;
    Ok(sup_report(
        BoundKind::SupResolvent,
        "lambda",
        lambdas,
        &seminorms,
        reference,
        false,
        tolerance,
    ))
}

/// `Lip_h(u(t)) ≤ Lip_h(f)` along a scheduled parabolic solve, non-increasing in `t`.
pub fn check_parabolic_sup_bound(
    schedule: &CoefficientSchedule,
    grid: &Grid,
    f: &[f64],
    options: &ParabolicOptions,
    tolerance: f64,
) -> Result<BoundCheckReport, VerificationError> {
    let trajectory = parabolic_solve(schedule, grid, f, options)?;
    let mut times = Vec::new();
    let mut seminorms = Vec::new();
    for (t, u) in trajectory.times.iter().zip(&trajectory.states).skip(1) {
        times.push(*t);
        seminorms.push(lipschitz_seminorm(grid, u)?);
    }
    let reference = lipschitz_seminorm(grid, f)?;
    Ok(sup_report(
        BoundKind::ParabolicSup,
        "t",
        &times,
        &seminorms,
        reference,
        true,
        tolerance,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::{assemble_generator, build_grid, BoundaryCondition, DiffusionSpec};
    use crate::drift::VectorFieldSpec;

    fn ou(radius: f64, n: usize) -> DiscreteGenerator {
        let g = build_grid(1, radius, n).unwrap();
        assemble_generator(
            &g,
            &DiffusionSpec::identity(1),
            &VectorFieldSpec::linear(vec![vec![-1.0]]).unwrap(),
            BoundaryCondition::Reflecting,
        )
        .unwrap()
    }

    #[test]
    fn seminorm_examples() {
        let g = build_grid(1, 2.0, 21).unwrap();
        assert_eq!(lipschitz_seminorm(&g, &vec![4.0; g.len()]).unwrap(), 0.0);
        assert!((lipschitz_seminorm(&g, &g.evaluate(|x| x[0])).unwrap() - 1.0).abs() < 1e-14);
        assert!((lipschitz_seminorm(&g, &g.evaluate(|x| x[0].abs())).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn ou_semigroup_margin() {
        let gen = ou(6.0, 401);
        let f = gen.grid().evaluate(|x| x[0]);
        let tol = default_tolerance(gen.grid(), &f).unwrap();
        let r = check_semigroup_gradient_bound(&gen, &f, 1.0, 64, tol).unwrap();
        assert!(r.pass);
        let expected = 1.0 - (-1f64).exp();
        assert!(
            r.entries.iter().all(|e| (e.margin - expected).abs() < 0.05),
            "{}",
            r.min_margin
        );
    }

    #[test]
    fn constant_function_has_zero_margin() {
        let gen = ou(3.0, 61);
        let f = vec![2.0; gen.len()];
        let tol = default_tolerance(gen.grid(), &f).unwrap();
        assert_eq!(tol, ROUNDING_FLOOR);
        let r = check_semigroup_gradient_bound(&gen, &f, 0.5, 8, tol).unwrap();
        assert!(r.pass && r.min_margin.abs() < 1e-12, "{}", r.min_margin);
        for form in [ResolventForm::Lemma, ResolventForm::Theorem] {
            let r = check_resolvent_gradient_bound(&gen, &f, 2.0, form, tol).unwrap();
            assert!(r.pass && r.min_margin.abs() < 1e-12);
        }
    }

    #[test]
    fn lemma_and_theorem_forms_at_lambda_four() {
        let gen = ou(6.0, 401);
        let h = gen.grid().spacing();
        let f = gen.grid().evaluate(|x| x[0]);
        // One h of slack: the default 10h would swallow the 0.1375 gap.
        let tol = scaled_tolerance(gen.grid(), &f, 1.0).unwrap();
        let lemma = check_resolvent_gradient_bound(&gen, &f, 4.0, ResolventForm::Lemma, tol).unwrap();
        let theorem = check_resolvent_gradient_bound(&gen, &f, 4.0, ResolventForm::Theorem, tol).unwrap();
        assert!(lemma.pass);
        assert!((lemma.min_margin - 0.05).abs() <= 5.0 * h, "{}", lemma.min_margin);
        assert!(!theorem.pass);
        assert!(
            (theorem.max_violation - 0.1375).abs() <= 5.0 * h,
            "{}",
            theorem.max_violation
        );
    }

    #[test]
    fn sup_bounds_for_sine() {
        let gen = ou(6.0, 201);
        let f = gen.grid().evaluate(|x| x[0].sin());
        let tol = default_tolerance(gen.grid(), &f).unwrap();
        let times: Vec<f64> = (1..=10).map(|k| k as f64 / 10.0).collect();
        let r = check_sup_semigroup_bound(&gen, &f, &times, 50, tol).unwrap();
        assert!(r.pass, "{r:?}");
        assert_eq!(r.entries.len(), 10);
        let r = check_sup_resolvent_bound(&gen, &f, &[0.5, 1.0, 4.0], tol).unwrap();
        assert!(r.pass);
    }

    #[test]
    fn csv_has_coordinate_columns() {
        let gen = ou(2.0, 9);
        let f = gen.grid().evaluate(|x| x[0]);
        let r = check_semigroup_gradient_bound(&gen, &f, 0.5, 4, 1.0).unwrap();
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("x0,lhs,rhs,margin\n"));
        assert_eq!(text.lines().count(), 1 + r.entries.len());
    }

    #[test]
    fn non_monotone_generator_is_rejected() {
        let g = build_grid(2, 1.0, 5).unwrap();
        let a = DiffusionSpec::new(vec![vec![1.0, 0.9], vec![0.9, 1.0]]).unwrap();
        let gen = assemble_generator(
            &g,
            &a,
            &VectorFieldSpec::constant(vec![0.0, 0.0]),
            BoundaryCondition::Reflecting,
        )
        .unwrap();
        assert!(!gen.is_monotone());
        let f = vec![0.0; g.len()];
        assert!(check_semigroup_gradient_bound(&gen, &f, 1.0, 1, 0.0).is_err());
    }
}
