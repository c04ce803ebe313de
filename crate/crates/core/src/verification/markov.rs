use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::VerificationError;
use crate::discretization::DiscreteGenerator;
use crate::solver::{EulerSemigroup, Resolvent, SolverOptions};

/// Matrix-level Markov properties of a generator, each as a worst-case
/// defect that should vanish to rounding.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarkovReport {
    /// `max |Σ_j L_ij|`
    pub row_sum: f64,
    /// `‖λG_λ1 - 1‖∞`
    pub constants: f64,
    /// Largest negative value of `G_λf` and `T_tf` over nonnegative random `f`.
    pub positivity: f64,
    /// `‖G_λf - G_μf - (μ-λ)G_λG_μf‖∞`
    pub resolvent_identity: f64,
    /// Largest excess of `‖T_tf - T_tg‖∞` over `‖f - g‖∞`.
    pub contraction: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Runs the Markov-structure suite with `trials` random vectors per property.
pub fn markov_structure(
    generator: &DiscreteGenerator,
    lambda: f64,
    mu: f64,
    t: f64,
    n_steps: usize,
    trials: usize,
    seed: u64,
    tolerance: f64,
) -> Result<MarkovReport, VerificationError> {
    if !generator.is_monotone() {
        return Err(VerificationError::InvalidInput(
            "Markov checks need a monotone generator".into(),
        ));
    }
    let n = generator.len();
    let options = SolverOptions::default();
    let g_lambda = Resolvent::new(generator, lambda, &options)?;
    let g_mu = Resolvent::new(generator, mu, &options)?;
    let semigroup = EulerSemigroup::new(generator, t, n_steps, &options)?;
    let sup = |v: &[f64]| v.iter().fold(0.0f64, |a, x| a.max(x.abs()));

    let row_sum = sup(&generator.matrix().row_sums());
    let (ones, _) = g_lambda.apply(&vec![1.0; n])?;
    let constants = ones.iter().fold(0.0f64, |a, v| a.max((lambda * v - 1.0).abs()));

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut positivity = 0.0f64;
    let mut resolvent_identity = 0.0f64;
    let mut contraction = f64::NEG_INFINITY;
    for _ in 0..trials {
        let f: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let g: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();

        let (gf, _) = g_lambda.apply(&f)?;
        let tf = semigroup.apply(&f)?;
        let most_negative = gf.iter().chain(&tf).fold(0.0f64, |a, &v| a.min(v));
        positivity = positivity.max(-most_negative);

        let (gmf, _) = g_mu.apply(&f)?;
        let (glgmf, _) = g_lambda.apply(&gmf)?;
        let defect: Vec<f64> = (0..n).map(|i| gf[i] - gmf[i] - (mu - lambda) * glgmf[i]).collect();
        resolvent_identity = resolvent_identity.max(sup(&defect));

        let tg = semigroup.apply(&g)?;
        let out: Vec<f64> = tf.iter().zip(&tg).map(|(a, b)| a - b).collect();
        let inp: Vec<f64> = f.iter().zip(&g).map(|(a, b)| a - b).collect();
        contraction = contraction.max(sup(&out) - sup(&inp));
    }
    let contraction = contraction.max(0.0);
    let pass = [row_sum, constants, positivity, resolvent_identity, contraction]
        .iter()
        .all(|&v| v <= tolerance);
    Ok(MarkovReport {
        row_sum,
        constants,
        positivity,
        resolvent_identity,
        contraction,
        tolerance,
        pass,
    })
}
