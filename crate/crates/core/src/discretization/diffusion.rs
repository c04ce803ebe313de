use nalgebra::DMatrix;

use super::DiscretizationError;

/// Constant symmetric positive definite diffusion matrix `A`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionSpec {
    dim: usize,
    entries: Vec<f64>,
    min_eigenvalue: f64,
    max_eigenvalue: f64,
}

impl DiffusionSpec {
    /// Validates exact symmetry and strict positive definiteness.
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self, DiscretizationError> {
        let dim = rows.len();
        if dim == 0 || rows.iter().any(|r| r.len() != dim) {
            return Err(DiscretizationError::InvalidInput(
                "diffusion matrix must be square and non-empty".into(),
            ));
        }
        let entries: Vec<f64> = rows.into_iter().flatten().collect();
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(DiscretizationError::InvalidInput(
                "diffusion matrix has non-finite entries".into(),
            ));
        }
        for i in 0..dim {
            for j in 0..i {
                if entries[i * dim + j] != entries[j * dim + i] {
                    return Err(DiscretizationError::InvalidInput(format!(
                        "diffusion matrix is not symmetric at ({i},{j})"
                    )));
                }
            }
        }
        let eig = DMatrix::from_row_slice(dim, dim, &entries).symmetric_eigenvalues();
        let min_eigenvalue = eig.min();
        let max_eigenvalue = eig.max();
        if min_eigenvalue <= 0.0 {
            return Err(DiscretizationError::InvalidInput(format!(
                "diffusion matrix is not positive definite (smallest eigenvalue {min_eigenvalue:e})"
            )));
        }
        Ok(Self {
            dim,
            entries,
            min_eigenvalue,
            max_eigenvalue,
        })
    }

    pub fn identity(dim: usize) -> Self {
        Self::scalar(dim, 1.0)
    }

    /// `a·I`; panics unless `a > 0`.
    pub fn scalar(dim: usize, a: f64) -> Self {
        assert!(a > 0.0 && a.is_finite());
        let mut entries = vec![0.0; dim * dim];
        for i in 0..dim {
            entries[i * dim + i] = a;
        }
        Self {
            dim,
            entries,
            min_eigenvalue: a,
            max_eigenvalue: a,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.dim + j]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.entries.chunks(self.dim).map(<[f64]>::to_vec).collect()
    }

    pub fn is_diagonal(&self) -> bool {
        (0..self.dim).all(|i| (0..self.dim).all(|j| i == j || self.entry(i, j) == 0.0))
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.min_eigenvalue
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.max_eigenvalue
    }

    /// `‖A‖ + ‖A⁻¹‖` in the spectral norm.
    pub fn bound(&self) -> f64 {
        self.max_eigenvalue + 1.0 / self.min_eigenvalue
    }

    /// `A v`.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self.entry(i, j) * v[j]).sum())
            .collect()
    }

    /// `tr(A H)` for a symmetric `H` given row-major.
    pub fn trace_product(&self, h: &[f64]) -> f64 {
        let d = self.dim;
        (0..d)
            .flat_map(|i| (0..d).map(move |j| (i, j)))
            .map(|(i, j)| self.entry(i, j) * h[j * d + i])
            .sum()
    }
}
