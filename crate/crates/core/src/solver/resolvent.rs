use super::{LinearSolver, SolveReport, SolverError, SolverOptions};
use crate::discretization::DiscreteGenerator;

/// `G_λ = (λ - L_h)^{-1}` with the system factored once.
#[derive(Debug, Clone)]
pub struct Resolvent {
    lambda: f64,
    solver: LinearSolver,
}

impl Resolvent {
    pub fn new(generator: &DiscreteGenerator, lambda: f64, options: &SolverOptions) -> Result<Self, SolverError> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(SolverError::InvalidInput(format!("λ must be positive, got {lambda}")));
        }
        let system = generator.matrix().shifted(lambda, -1.0);
        Ok(Self {
            lambda,
            solver: LinearSolver::new(system, *options)?,
        })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn apply(&self, f: &[f64]) -> Result<(Vec<f64>, SolveReport), SolverError> {
        self.solver.solve(f)
    }
}

/// Solves `(λ - L_h) v = f` to relative residual `tol`.
pub fn resolvent_apply(
    generator: &DiscreteGenerator,
    lambda: f64,
    f: &[f64],
    tol: f64,
) -> Result<(Vec<f64>, SolveReport), SolverError> {
    let options = SolverOptions {
        tol,
        ..SolverOptions::default()
    };
    Resolvent::new(generator, lambda, &options)?.apply(f)
}

/// `T_t ≈ (I - (t/n) L_h)^{-n}`, the implicit-Euler product formula.
#[derive(Debug, Clone)]
pub struct EulerSemigroup {
    t: f64,
    n_steps: usize,
    step: LinearSolver,
}

impl EulerSemigroup {
    pub fn new(
        generator: &DiscreteGenerator,
        t: f64,
        n_steps: usize,
        options: &SolverOptions,
    ) -> Result<Self, SolverError> {
        if !(t.is_finite() && t > 0.0) {
            return Err(SolverError::InvalidInput(format!("t must be positive, got {t}")));
        }
        if n_steps == 0 {
            return Err(SolverError::InvalidInput("n_steps must be at least 1".into()));
        }
        let tau = t / n_steps as f64;
        let system = generator.matrix().shifted(1.0, -tau);
        Ok(Self {
            t,
            n_steps,
            step: LinearSolver::new(system, *options)?,
        })
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn step_size(&self) -> f64 {
        self.t / self.n_steps as f64
    }

    /// One implicit-Euler step `(I - τL_h)^{-1} u`.
    pub fn step(&self, u: &[f64]) -> Result<Vec<f64>, SolverError> {
        Ok(self.step.solve(u)?.0)
    }

    pub fn apply(&self, f: &[f64]) -> Result<Vec<f64>, SolverError> {
        self.apply_steps(f, self.n_steps)
    }

    /// `(I - τL_h)^{-k} f` for `k` steps of the fixed size.
    pub fn apply_steps(&self, f: &[f64], k: usize) -> Result<Vec<f64>, SolverError> {
        let mut u = f.to_vec();
        for _ in 0..k {
            u = self.step(&u)?;
        }
        Ok(u)
    }
}

pub fn semigroup_apply(
    generator: &DiscreteGenerator,
    t: f64,
    n_steps: usize,
    f: &[f64],
) -> Result<Vec<f64>, SolverError> {
    EulerSemigroup::new(generator, t, n_steps, &SolverOptions::default())?.apply(f)
}
