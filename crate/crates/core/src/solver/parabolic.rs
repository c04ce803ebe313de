use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{CoefficientSchedule, EulerSemigroup, SolverError, SolverOptions};
use crate::discretization::{assemble_generator, BoundaryCondition, DiffusionSpec, Grid};
use crate::drift::VectorFieldSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParabolicOptions {
    /// Implicit-Euler substeps on each schedule interval.
    pub steps_per_interval: usize,
    /// Extra reporting times in `(0, 1)`; each is snapped to the nearest substep.
    pub report_times: Vec<f64>,
    pub boundary: BoundaryCondition,
    pub solver: SolverOptions,
}

impl Default for ParabolicOptions {
    fn default() -> Self {
        Self {
            steps_per_interval: 16,
            report_times: Vec::new(),
            boundary: BoundaryCondition::Reflecting,
            solver: SolverOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    /// Largest weak-form residual over the bump family at each reported time.
    pub weak_residuals: Vec<f64>,
}

impl Trajectory {
    pub fn final_state(&self) -> &[f64] {
        self.states.last().expect("trajectory holds the initial state")
    }

    /// One row per node: coordinates, then one column per reported time.
    pub fn write_csv<W: Write>(&self, grid: &Grid, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = (0..grid.dim()).map(|k| format!("x{k}")).collect();
        header.extend(self.times.iter().map(|t| format!("t={t}")));
        w.write_record(&header)?;
        for node in 0..grid.len() {
            let mut row: Vec<String> = grid.point(node).iter().map(|x| x.to_string()).collect();
            row.extend(self.states.iter().map(|s| format!("{:e}", s[node])));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Smooth compactly supported test function `(1 - |x-c|²/ρ²)⁴₊`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeakTestFunction {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl WeakTestFunction {
    pub fn value(&self, x: &[f64]) -> f64 {
        let s = self.scaled_square(x);
        if s >= 1.0 {
            0.0
        } else {
            (1.0 - s).powi(4)
        }
    }

    fn scaled_square(&self, x: &[f64]) -> f64 {
        x.iter().zip(&self.center).map(|(a, c)| (a - c) * (a - c)).sum::<f64>() / (self.radius * self.radius)
    }

    /// `L*φ = tr(A∇²φ) - b·∇φ - (div b)φ`, with `div b` by central differences.
    pub fn adjoint_value(
        &self,
        diffusion: &DiffusionSpec,
        drift: &VectorFieldSpec,
        x: &[f64],
    ) -> Result<f64, SolverError> {
        let s = self.scaled_square(x);
        if s >= 1.0 {
            return Ok(0.0);
        }
        let r2 = self.radius * self.radius;
        let y: Vec<f64> = x.iter().zip(&self.center).map(|(a, c)| a - c).collect();
        let g = -8.0 / r2 * (1.0 - s).powi(3);
        let hq = 48.0 / (r2 * r2) * (1.0 - s).powi(2);
        let d = x.len();
        let mut trace = 0.0;
        for i in 0..d {
            trace += diffusion.entry(i, i) * g;
            for j in 0..d {
                trace += diffusion.entry(i, j) * hq * y[i] * y[j];
            }
        }
        let b = drift.eval(x)?;
        let transport: f64 = b.iter().zip(&y).map(|(bi, yi)| bi * g * yi).sum();
        let mut div = 0.0;
        let mut z = x.to_vec();
        for i in 0..d {
            let delta = 1e-5 * x[i].abs().max(1.0);
            z[i] = x[i] + delta;
            let up = drift.eval(&z)?[i];
            z[i] = x[i] - delta;
            let down = drift.eval(&z)?[i];
            z[i] = x[i];
            div += (up - down) / (2.0 * delta);
        }
        Ok(trace - transport - div * (1.0 - s).powi(4))
    }
}

/// Bumps centred at the origin and at `±R/4` on each axis, radius `R/4`,
/// all supported in the inner half-box.
pub fn weak_test_functions(grid: &Grid) -> Vec<WeakTestFunction> {
    let d = grid.dim();
    let r = grid.radius() / 4.0;
    let mut out = vec![WeakTestFunction {
        center: vec![0.0; d],
        radius: r,
    }];
    for axis in 0..d {
        for sign in [-1.0, 1.0] {
            let mut center = vec![0.0; d];
            center[axis] = sign * r;
            out.push(WeakTestFunction { center, radius: r });
        }
    }
    out
}

/// Solves `∂_t u = L(t)u`, `u(0) = f`, on `[0, 1]` by composing implicit-Euler
/// semigroups interval by interval.
///
/// States are reported at `t = 0`, at every breakpoint, and at each requested
/// time (snapped to the substep grid). The weak residual at time `t` is
/// `h^d |Σ φ(u(t) - f) - Σ_m τ_m Σ u_{m+1} L_m*φ|` with `L_m*φ` computed from
/// the continuous coefficients.
pub fn parabolic_solve(
    schedule: &CoefficientSchedule,
    grid: &Grid,
    f: &[f64],
    options: &ParabolicOptions,
) -> Result<Trajectory, SolverError> {
    if f.len() != grid.len() {
        return Err(SolverError::InvalidInput(format!(
            "initial data has {} values for {} nodes",
            f.len(),
            grid.len()
        )));
    }
    if f.iter().any(|v| !v.is_finite()) {
        return Err(SolverError::InvalidInput("initial data is not finite".into()));
    }
    if schedule.dim() != grid.dim() {
        return Err(SolverError::InvalidInput("schedule and grid dimensions differ".into()));
    }
    if options.steps_per_interval == 0 {
        return Err(SolverError::InvalidInput(
            "steps_per_interval must be at least 1".into(),
        ));
    }
    if let Some(t) = options.report_times.iter().find(|t| !(**t > 0.0 && **t <= 1.0)) {
        return Err(SolverError::InvalidInput(format!("report time {t} outside (0, 1]")));
    }
    for (k, p) in schedule.pieces().iter().enumerate() {
        if !p.drift.declared_dissipative() {
            return Err(SolverError::InvalidInput(format!(
                "drift on interval {k} is not declared dissipative"
            )));
        }
    }

    let tests = weak_test_functions(grid);
    let weights: Vec<Vec<f64>> = tests.iter().map(|phi| grid.evaluate(|x| phi.value(x))).collect();
    let vol = grid.cell_volume();
    let pairing = |u: &[f64], w: &[f64]| u.iter().zip(w).map(|(a, b)| a * b).sum::<f64>();
    let base: Vec<f64> = weights.iter().map(|w| pairing(f, w)).collect();
    let mut integral = vec![0.0; tests.len()];

    let residual = |u: &[f64], integral: &[f64]| {
        weights
            .iter()
            .zip(&base)
            .zip(integral)
            .map(|((w, b0), acc)| ((pairing(u, w) - b0) - acc).abs() * vol)
            .fold(0.0, f64::max)
    };

    let mut times = vec![0.0];
    let mut states = vec![f.to_vec()];
    let mut weak_residuals = vec![0.0];
    let mut pending: Vec<f64> = options.report_times.clone();
    pending.sort_by(f64::total_cmp);
    pending.dedup();
    let mut pending = pending.into_iter().peekable();

    let mut u = f.to_vec();
    for (k, piece) in schedule.pieces().iter().enumerate() {
        let (t0, t1) = schedule.interval(k);
        let n = options.steps_per_interval;
        let tau = (t1 - t0) / n as f64;
        let generator = assemble_generator(grid, &piece.diffusion, &piece.drift, options.boundary)?;
        let step = EulerSemigroup::new(&generator, t1 - t0, n, &options.solver)?;
        let lphi: Vec<Vec<f64>> = tests
            .iter()
            .map(|phi| {
                (0..grid.len())
                    .map(|node| phi.adjoint_value(&piece.diffusion, &piece.drift, &grid.point(node)))
                    .collect::<Result<Vec<f64>, SolverError>>()
            })
            .collect::<Result<_, _>>()?;

        for m in 1..=n {
            u = step.step(&u)?;
            for (acc, lw) in integral.iter_mut().zip(&lphi) {
                *acc += tau * pairing(&u, lw);
            }
            let t = if m == n { t1 } else { t0 + m as f64 * tau };
            let mut record = m == n;
            while let Some(&r) = pending.peek() {
                // Snap to whichever substep lies nearest.
                if r < t + 0.5 * tau && r < t1 + 0.5 * tau {
                    if (r - t).abs() <= 0.5 * tau + 1e-15 {
                        record = true;
                    }
                    pending.next();
                } else {
                    break;
                }
            }
            if record && times.last() != Some(&t) {
                times.push(t);
                states.push(u.clone());
                weak_residuals.push(residual(&u, &integral));
            }
        }
    }

    Ok(Trajectory {
        times,
        states,
        weak_residuals,
    })
}
