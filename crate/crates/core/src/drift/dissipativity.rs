use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{DriftError, VectorFieldSpec};

/// Base point `x` and increment `h` of one sampled pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SamplePair {
    pub x: Vec<f64>,
    pub h: Vec<f64>,
}

impl SamplePair {
    pub fn new(x: Vec<f64>, h: Vec<f64>) -> Self {
        Self { x, h }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DissipativityReport {
    pub samples: usize,
    /// Maximum over the pairs of `(b(x+h) - b(x), h) + modulus·|h|²`.
    pub max_inner_product: f64,
    pub witness: SamplePair,
    /// Strong-dissipativity modulus tested; zero for plain dissipativity.
    pub modulus: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Checks `(b(x+h) - b(x), h) ≤ tolerance` on every pair.
pub fn check_dissipative(
    field: &VectorFieldSpec,
    pairs: &[SamplePair],
    tolerance: f64,
) -> Result<DissipativityReport, DriftError> {
    check_strongly_dissipative(field, pairs, 0.0, tolerance)
}

/// Checks `(b(x+h) - b(x), h) ≤ -modulus·|h|² + tolerance` on every pair.
pub fn check_strongly_dissipative(
    field: &VectorFieldSpec,
    pairs: &[SamplePair],
    modulus: f64,
    tolerance: f64,
) -> Result<DissipativityReport, DriftError> {
    if pairs.is_empty() {
        return Err(DriftError::InvalidInput("empty sample set".into()));
    }
    if !(tolerance >= 0.0) {
        return Err(DriftError::InvalidInput(format!(
            "tolerance must be nonnegative, got {tolerance}"
        )));
    }
    let d = field.dim();
    let mut best = f64::NEG_INFINITY;
    let mut witness = 0;
    let mut shifted = vec![0.0; d];
    for (k, pair) in pairs.iter().enumerate() {
        if pair.x.len() != d || pair.h.len() != d {
            return Err(DriftError::Dimension {
                expected: d,
                got: pair.x.len().max(pair.h.len()),
            });
        }
        for a in 0..d {
            shifted[a] = pair.x[a] + pair.h[a];
        }
        let b1 = field.eval(&shifted)?;
        let b0 = field.eval(&pair.x)?;
        let h2: f64 = pair.h.iter().map(|v| v * v).sum();
        let ip: f64 = (0..d).map(|a| (b1[a] - b0[a]) * pair.h[a]).sum::<f64>() + modulus * h2;
        if ip > best {
            best = ip;
            witness = k;
        }
    }
    Ok(DissipativityReport {
        samples: pairs.len(),
        max_inner_product: best,
        witness: pairs[witness].clone(),
        modulus,
        tolerance,
        pass: best <= tolerance,
    })
}

/// `count` pairs with `x` and `x + h` uniform in `[-radius, radius]^d`,
/// drawn from a seeded ChaCha stream.
pub fn sample_pairs(dim: usize, radius: f64, count: usize, seed: u64) -> Vec<SamplePair> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let x: Vec<f64> = (0..dim).map(|_| rng.random_range(-radius..=radius)).collect();
            let y: Vec<f64> = (0..dim).map(|_| rng.random_range(-radius..=radius)).collect();
            let h = x.iter().zip(&y).map(|(a, b)| b - a).collect();
            SamplePair { x, h }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(x: f64, h: f64) -> SamplePair {
        SamplePair::new(vec![x], vec![h])
    }

    #[test]
    fn negative_identity_passes() {
        let b = VectorFieldSpec::linear(vec![vec![-1.0]]).unwrap();
        let pairs = [pair(0.0, 1.0), pair(1.0, -2.0), pair(-3.0, 0.5)];
        let r = check_dissipative(&b, &pairs, 0.0).unwrap();
        assert!(r.pass);
        // max of -|h|^2 over h ∈ {1, -2, 0.5}
        assert_eq!(r.max_inner_product, -0.25);
        assert_eq!(r.witness, pair(-3.0, 0.5));
    }

    #[test]
    fn positive_identity_fails_with_witness() {
        let b = VectorFieldSpec::linear(vec![vec![1.0]]).unwrap();
        let r = check_dissipative(&b, &[pair(0.0, 1.0)], 0.0).unwrap();
        assert!(!r.pass);
        assert_eq!(r.max_inner_product, 1.0);
        assert_eq!(r.witness, pair(0.0, 1.0));
    }

    #[test]
    fn negative_cubic_passes_on_random_pairs() {
        let b = VectorFieldSpec::polynomial_gradient(1, vec![(0.25, vec![4])]).unwrap();
        let r = check_dissipative(&b, &sample_pairs(1, 3.0, 500, 11), 0.0).unwrap();
        assert!(r.pass, "{r:?}");
    }

    #[test]
    fn empty_sample_set_is_invalid() {
        let b = VectorFieldSpec::constant(vec![0.0]);
        assert!(matches!(
            check_dissipative(&b, &[], 0.0),
            Err(DriftError::InvalidInput(_))
        ));
    }

    #[test]
    fn sampled_points_stay_in_the_box() {
        for p in sample_pairs(3, 2.0, 100, 5) {
            for a in 0..3 {
                assert!(p.x[a].abs() <= 2.0 && (p.x[a] + p.h[a]).abs() <= 2.0 + 1e-12);
            }
        }
        assert_eq!(sample_pairs(2, 1.0, 10, 9), sample_pairs(2, 1.0, 10, 9));
    }
}
