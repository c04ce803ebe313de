//! Discrete stationary density of a generator, the dual drift
//! `b̂ = 2A∇ϱ/ϱ - b`, and the integration-by-parts residual.

use std::io::Write;

use serde::Serialize;
use thiserror::Error;

use crate::discretization::{
    discrete_gradient, BoundaryCondition, DiffusionSpec, DiscreteGenerator, DiscretizationError, Grid,
};
use crate::drift::{DriftError, VectorFieldSpec};
use crate::solver::{LinearSolver, SolverError, SolverKind, SolverOptions};

/// Shift of the inverse iteration on `L_hᵀ`.
pub const STATIONARY_SHIFT: f64 = 1e-8;
/// Required `‖L_hᵀϱ‖∞` after normalization.
pub const STATIONARY_TOL: f64 = 1e-9;
/// Relative positivity floor below which dual-drift nodes are masked.
pub const POSITIVITY_FLOOR: f64 = 1e-13;

const MAX_ITERATIONS: usize = 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InvariantMeasureError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("stationary iteration failed (residual {residual:e}, smallest value {min_value:e})")]
    Stationarity { residual: f64, min_value: f64 },
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Discretization(#[from] DiscretizationError),
    #[error(transparent)]
    Drift(#[from] DriftError),
}

/// Node values `ϱ ≥ 0` with `Σ ϱ_i h^d = 1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscreteDensity {
    #[serde(skip)]
    grid: Grid,
    values: Vec<f64>,
    floor: f64,
    residual: f64,
    iterations: usize,
}

impl DiscreteDensity {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Smallest node value.
    pub fn floor(&self) -> f64 {
        self.floor
    }

    /// `‖L_hᵀϱ‖∞` at return.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_volume()
    }

    /// `Σ ϱ_i u_i h^d`.
    pub fn integrate(&self, u: &[f64]) -> f64 {
        self.values.iter().zip(u).map(|(r, v)| r * v).sum::<f64>() * self.grid.cell_volume()
    }

    /// Coordinates, density, and an optional reference column.
    pub fn write_csv<W: Write>(&self, out: W, reference: Option<&[f64]>) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = (0..self.grid.dim()).map(|k| format!("x{k}")).collect();
        header.push("density".into());
        if reference.is_some() {
            header.push("reference".into());
        }
        w.write_record(&header)?;
        for node in 0..self.grid.len() {
            let mut row: Vec<String> = self.grid.point(node).iter().map(|x| x.to_string()).collect();
            row.push(format!("{:e}", self.values[node]));
            if let Some(r) = reference {
                row.push(format!("{:e}", r[node]));
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Stationary density of a monotone reflecting generator by shifted inverse
/// iteration `ϱ ← (σ - L_hᵀ)⁻¹ϱ` started from the uniform vector.
pub fn stationary_density(generator: &DiscreteGenerator) -> Result<DiscreteDensity, InvariantMeasureError> {
    if !generator.is_monotone() {
        return Err(InvariantMeasureError::InvalidInput(
            "stationary density needs a monotone generator".into(),
        ));
    }
    if generator.boundary() != BoundaryCondition::Reflecting {
        return Err(InvariantMeasureError::InvalidInput(
            "stationary density needs reflecting boundary conditions".into(),
        ));
    }
    let grid = generator.grid().clone();
    let transpose = generator.matrix().transpose();
    let system = transpose.shifted(STATIONARY_SHIFT, -1.0);
    // The shifted system is nearly singular by design; the growth of the
    // iterate is what we want, so the residual tolerance is not enforced.
    let solver = LinearSolver::new(
        system,
        SolverOptions {
            tol: f64::INFINITY,
            kind: SolverKind::Direct,
            ..SolverOptions::default()
        },
    )?;
    let vol = grid.cell_volume();
    let normalize = |v: &mut Vec<f64>| {
        let mass: f64 = v.iter().sum::<f64>() * vol;
        v.iter_mut().for_each(|x| *x /= mass);
    };
    let mut rho = vec![1.0; grid.len()];
    normalize(&mut rho);
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        rho = solver.solve(&rho)?.0;
        normalize(&mut rho);
        residual = inf_norm(&transpose.mul_vec(&rho));
        if residual <= STATIONARY_TOL {
            break;
        }
    }
    let max = rho.iter().fold(0.0f64, |a, &v| a.max(v));
    let min = rho.iter().fold(f64::INFINITY, |a, &v| a.min(v));
    if !(residual <= STATIONARY_TOL) || min < -1e-12 * max {
        return Err(InvariantMeasureError::Stationarity {
            residual,
            min_value: min,
        });
    }
    if min < 0.0 {
        rho.iter_mut().for_each(|v| *v = v.max(0.0));
        normalize(&mut rho);
        residual = inf_norm(&transpose.mul_vec(&rho));
    }
    let floor = rho.iter().fold(f64::INFINITY, |a, &v| a.min(v));
    Ok(DiscreteDensity {
        grid,
        values: rho,
        floor,
        residual,
        iterations,
    })
}

/// Tabulated dual drift together with the nodes where `ϱ` fell below the
/// positivity floor. Masked nodes hold NaN in the table.
#[derive(Debug, Clone)]
pub struct DualDrift {
    pub field: VectorFieldSpec,
    pub masked: Vec<usize>,
}

/// `b̂_i = 2(A∇_hϱ/ϱ)_i - b_i` at every node.
pub fn dual_drift(
    density: &DiscreteDensity,
    diffusion: &DiffusionSpec,
    drift: &VectorFieldSpec,
) -> Result<DualDrift, InvariantMeasureError> {
    let grid = density.grid();
    let d = grid.dim();
    if diffusion.dim() != d || drift.dim() != d {
        return Err(InvariantMeasureError::InvalidInput(format!(
            "dimension mismatch: grid {d}, diffusion {}, drift {}",
            diffusion.dim(),
            drift.dim()
        )));
    }
    let rho = density.values();
    let max = rho.iter().fold(0.0f64, |a, &v| a.max(v));
    let gradient = discrete_gradient(grid, rho)?;
    let mut masked = Vec::new();
    let mut values = Vec::with_capacity(grid.len());
    for node in 0..grid.len() {
        if rho[node] < POSITIVITY_FLOOR * max || rho[node] <= 0.0 {
            masked.push(node);
            values.push(vec![f64::NAN; d]);
            continue;
        }
        let score: Vec<f64> = gradient.at(node).iter().map(|g| g / rho[node]).collect();
        let a_score = diffusion.apply(&score);
        let b = drift.eval(&grid.point(node))?;
        values.push(a_score.iter().zip(&b).map(|(s, bi)| 2.0 * s - bi).collect());
    }
    Ok(DualDrift {
        field: VectorFieldSpec::tabulated(grid.clone(), values)?,
        masked,
    })
}

/// `h^d |Σ ψ (L_hφ) ϱ - Σ φ (L̂_hψ) ϱ|` for `φ, ψ` supported in the inner half-box.
pub fn duality_residual(
    generator: &DiscreteGenerator,
    dual_generator: &DiscreteGenerator,
    density: &DiscreteDensity,
    phi: &[f64],
    psi: &[f64],
) -> Result<f64, InvariantMeasureError> {
    let grid = density.grid();
    let n = grid.len();
    if generator.len() != n || dual_generator.len() != n || phi.len() != n || psi.len() != n {
        return Err(InvariantMeasureError::InvalidInput("inconsistent lengths".into()));
    }
    for (name, u) in [("φ", phi), ("ψ", psi)] {
        if let Some(node) = (0..n).find(|&k| u[k] != 0.0 && !grid.is_inner(k)) {
            return Err(InvariantMeasureError::InvalidInput(format!(
                "{name} is nonzero at node {node} outside the inner half-box"
            )));
        }
    }
    let l_phi = generator.apply(phi);
    let l_psi = dual_generator.apply(psi);
    let rho = density.values();
    let lhs: f64 = (0..n).map(|k| psi[k] * l_phi[k] * rho[k]).sum();
    let rhs: f64 = (0..n).map(|k| phi[k] * l_psi[k] * rho[k]).sum();
    Ok((lhs - rhs).abs() * grid.cell_volume())
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, x| a.max(x.abs()))
}
