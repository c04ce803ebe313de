use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{DiffusionSpec, DiscretizationError, Grid};
use crate::drift::VectorFieldSpec;
use crate::sparse::CsrMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryCondition {
    /// Mirror ghost nodes: the generator is conservative on the whole box.
    #[default]
    Reflecting,
    /// Boundary rows are zero, so boundary values are frozen.
    Absorbing,
}

/// Finite-difference approximation of `L` on a [`Grid`].
///
/// Every row sums to zero (up to rounding): reflecting rows by mirror
/// ghosts, absorbing rows because they are empty. `monotone` is the result
/// of scanning the assembled matrix for negative off-diagonal entries.
#[derive(Debug, Clone)]
pub struct DiscreteGenerator {
    grid: Grid,
    matrix: CsrMatrix,
    boundary: BoundaryCondition,
    monotone: bool,
}

impl DiscreteGenerator {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn boundary(&self) -> BoundaryCondition {
        self.boundary
    }

    /// True iff all off-diagonal entries are nonnegative.
    pub fn is_monotone(&self) -> bool {
        self.monotone
    }

    pub fn len(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.matrix.nrows() == 0
    }

    /// `L_h u`.
    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        self.matrix.mul_vec(u)
    }

    /// `L_hᵀ u`.
    pub fn apply_transpose(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        for i in 0..self.len() {
            for (j, v) in self.matrix.row(i) {
                out[j] += v * u[i];
            }
        }
        out
    }
}

/// Neighbor of `idx` shifted by `delta` along `axis`, mirrored at the box
/// faces (`-1 ↦ 1`, `n ↦ n-2`).
fn mirrored(grid: &Grid, idx: &[usize], shifts: &[(usize, isize)]) -> usize {
    let n = grid.points_per_axis() as isize;
    let mut node = 0;
    let mut moved = [0isize; super::MAX_DIM];
    for a in 0..grid.dim() {
        moved[a] = idx[a] as isize;
    }
    for &(axis, delta) in shifts {
        moved[axis] += delta;
    }
    for &m in moved.iter().take(grid.dim()) {
        let j = if m < 0 {
            -m
        } else if m > n - 1 {
            2 * (n - 1) - m
        } else {
            m
        };
        node = node * n + j;
    }
    node as usize
}

/// Assembles `L_h` for constant `A` and drift `b`:
///
/// * `a_ii ∂_i²` by the three-point central stencil,
/// * `a_ij ∂_i∂_j` (`i ≠ j`) by the four-point central cross stencil,
/// * `b_i ∂_i` by first-order upwinding on the sign of `b_i` at the node.
///
/// The diagonal is minus the sum of the off-diagonal entries.
pub fn assemble_generator(
    grid: &Grid,
    diffusion: &DiffusionSpec,
    drift: &VectorFieldSpec,
    boundary: BoundaryCondition,
) -> Result<DiscreteGenerator, DiscretizationError> {
    let d = grid.dim();
    if diffusion.dim() != d || drift.dim() != d {
        return Err(DiscretizationError::InvalidInput(format!(
            "dimension mismatch: grid {d}, diffusion {}, drift {}",
            diffusion.dim(),
            drift.dim()
        )));
    }
    let h = grid.spacing();
    let h2 = h * h;

    let rows: Result<Vec<Vec<(usize, f64)>>, DiscretizationError> = (0..grid.len())
        .into_par_iter()
        .map(|node| {
            if boundary == BoundaryCondition::Absorbing && grid.is_boundary(node) {
                return Ok(vec![(node, 0.0)]);
            }
            let idx = grid.multi_index(node);
            let x = grid.point(node);
            let b = drift
                .eval(&x)
                .map_err(|source| DiscretizationError::Drift { node, source })?;
            if b.iter().any(|v| !v.is_finite()) {
                return Err(DiscretizationError::Drift {
                    node,
                    source: crate::drift::DriftError::Domain { point: x },
                });
            }
            let mut row: Vec<(usize, f64)> = Vec::with_capacity(2 * d + 4 * d * d);
            for i in 0..d {
                let diff = diffusion.entry(i, i) / h2;
                let plus = mirrored(grid, &idx, &[(i, 1)]);
                let minus = mirrored(grid, &idx, &[(i, -1)]);
                row.push((plus, diff));
                row.push((minus, diff));
                if b[i] > 0.0 {
                    row.push((plus, b[i] / h));
                } else if b[i] < 0.0 {
                    row.push((minus, -b[i] / h));
                }
                for j in (i + 1)..d {
                    let c = diffusion.entry(i, j) / (2.0 * h2);
                    if c == 0.0 {
                        continue;
                    }
                    row.push((mirrored(grid, &idx, &[(i, 1), (j, 1)]), c));
                    row.push((mirrored(grid, &idx, &[(i, -1), (j, -1)]), c));
                    row.push((mirrored(grid, &idx, &[(i, 1), (j, -1)]), -c));
                    row.push((mirrored(grid, &idx, &[(i, -1), (j, 1)]), -c));
                }
            }
            row.sort_by_key(|&(c, _)| c);
            let mut merged: Vec<(usize, f64)> = Vec::with_capacity(row.len() + 1);
            for (c, v) in row {
                match merged.last_mut() {
                    Some(last) if last.0 == c => last.1 += v,
                    _ => merged.push((c, v)),
                }
            }
            merged.retain(|&(c, v)| c != node && v != 0.0);
            let diag = -merged.iter().map(|&(_, v)| v).sum::<f64>();
            merged.push((node, diag));
            Ok(merged)
        })
        .collect();

    let matrix = CsrMatrix::from_rows(grid.len(), rows?);
    let monotone = matrix.min_off_diagonal().is_none_or(|m| m >= 0.0);
    Ok(DiscreteGenerator {
        grid: grid.clone(),
        matrix,
        boundary,
        monotone,
    })
}
