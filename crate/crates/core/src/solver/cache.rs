use std::sync::{Arc, Mutex};

use super::{EulerSemigroup, Resolvent, SolverError, SolverOptions};
use crate::discretization::DiscreteGenerator;

type Slot<T> = Arc<Mutex<Option<Arc<T>>>>;

/// Factored `(λ - L_h)` and `(I - τL_h)` systems of one generator, built on
/// first use and shared between threads.
#[derive(Debug)]
pub struct OperatorCache<'a> {
    generator: &'a DiscreteGenerator,
    options: SolverOptions,
    resolvents: Mutex<Vec<(u64, Slot<Resolvent>)>>,
    steps: Mutex<Vec<(u64, Slot<EulerSemigroup>)>>,
}

fn slot<T>(table: &Mutex<Vec<(u64, Slot<T>)>>, key: f64) -> Slot<T> {
    let mut table = table.lock().expect("cache lock");
    let bits = key.to_bits();
    if let Some((_, s)) = table.iter().find(|(k, _)| *k == bits) {
        return s.clone();
    }
    let s: Slot<T> = Arc::new(Mutex::new(None));
    table.push((bits, s.clone()));
    s
}

fn get_or_build<T>(slot: &Slot<T>, build: impl FnOnce() -> Result<T, SolverError>) -> Result<Arc<T>, SolverError> {
    // The per-key lock makes concurrent requests for the same system wait
    // for one factorization instead of repeating it.
    let mut guard = slot.lock().expect("cache slot lock");
    if let Some(v) = guard.as_ref() {
        return Ok(v.clone());
    }
    let v = Arc::new(build()?);
    *guard = Some(v.clone());
    Ok(v)
}

impl<'a> OperatorCache<'a> {
    pub fn new(generator: &'a DiscreteGenerator) -> Self {
        Self::with_options(generator, SolverOptions::default())
    }

    pub fn with_options(generator: &'a DiscreteGenerator, options: SolverOptions) -> Self {
        Self {
            generator,
            options,
            resolvents: Mutex::new(Vec::new()),
            steps: Mutex::new(Vec::new()),
        }
    }

    pub fn generator(&self) -> &'a DiscreteGenerator {
        self.generator
    }

    pub fn resolvent(&self, lambda: f64) -> Result<Arc<Resolvent>, SolverError> {
        let s = slot(&self.resolvents, lambda);
        get_or_build(&s, || Resolvent::new(self.generator, lambda, &self.options))
    }

    /// One implicit-Euler step of size `tau`.
    pub fn euler_step(&self, tau: f64) -> Result<Arc<EulerSemigroup>, SolverError> {
        let s = slot(&self.steps, tau);
        get_or_build(&s, || EulerSemigroup::new(self.generator, tau, 1, &self.options))
    }

    /// `(I - (t/n)L_h)^{-n} f`.
    pub fn semigroup(&self, t: f64, n_steps: usize, f: &[f64]) -> Result<Vec<f64>, SolverError> {
        if n_steps == 0 {
            return Err(SolverError::InvalidInput("n_steps must be at least 1".into()));
        }
        self.euler_step(t / n_steps as f64)?.apply_steps(f, n_steps)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::{assemble_generator, build_grid, BoundaryCondition, DiffusionSpec};
    use crate::drift::VectorFieldSpec;
    use crate::solver::semigroup_apply;

    #[test]
    fn cached_operators_match_fresh_ones() {
        let g = build_grid(1, 4.0, 81).unwrap();
        let gen = assemble_generator(
            &g,
            &DiffusionSpec::identity(1),
            &VectorFieldSpec::linear(vec![vec![-1.0]]).unwrap(),
            BoundaryCondition::Reflecting,
        )
        .unwrap();
        let cache = OperatorCache::new(&gen);
        let f = g.evaluate(|x| x[0].sin());
        let a = cache.semigroup(0.5, 32, &f).unwrap();
        let b = semigroup_apply(&gen, 0.5, 32, &f).unwrap();
        assert_eq!(a, b);
        let r1 = cache.resolvent(2.0).unwrap();
        let r2 = cache.resolvent(2.0).unwrap();
        assert!(Arc::ptr_eq(&r1, &r2));
        let s1 = cache.euler_step(1.0 / 64.0).unwrap();
        cache.semigroup(1.0, 64, &f).unwrap();
        assert!(Arc::ptr_eq(&s1, &cache.euler_step(1.0 / 64.0).unwrap()));
    }
}
