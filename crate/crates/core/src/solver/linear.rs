//! Banded LU with partial pivoting and Jacobi-preconditioned BiCGSTAB.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{SolveReport, SolverError};
use crate::sparse::CsrMatrix;

/// Above this many unknowns the automatic choice switches to BiCGSTAB.
pub const DIRECT_SOLVE_LIMIT: usize = 40_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    #[default]
    Auto,
    Direct,
    Iterative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverTag {
    Direct,
    Iterative,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Relative residual `‖Mx - b‖∞ / ‖b‖∞` required on success.
    pub tol: f64,
    pub kind: SolverKind,
    pub max_iterations: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            kind: SolverKind::Auto,
            max_iterations: 20_000,
        }
    }
}

/// LU factors of a banded matrix, rows stored as windows
/// `[i - kl, i + kl + ku]` so pivoting fits without reallocation.
#[derive(Debug, Clone)]
struct BandLu {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    upper: Vec<f64>,
    lower: Vec<f64>,
    pivots: Vec<usize>,
}

impl BandLu {
    fn offset(&self, i: usize, j: usize) -> usize {
        // j ∈ [i - kl, i + kl + ku]
        i * self.width + (j + self.kl - i)
    }

    fn factor(m: &CsrMatrix) -> Result<Self, SolverError> {
        let n = m.nrows();
        let (kl, ku) = m.bandwidths();
        let width = 2 * kl + ku + 1;
        let mut lu = BandLu {
            n,
            kl,
            ku,
            width,
            upper: vec![0.0; n * width],
            lower: vec![0.0; n * kl.max(1)],
            pivots: vec![0; n],
        };
        for i in 0..n {
            for (j, v) in m.row(i) {
                let o = lu.offset(i, j);
                lu.upper[o] = v;
            }
        }
        let mut max_pivot: f64 = 0.0;
        let mut min_pivot = f64::INFINITY;
        let scale = lu.upper.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let last_col = (k + kl + ku).min(n - 1);
            let mut p = k;
            let mut best = lu.upper[lu.offset(k, k)].abs();
            for r in (k + 1)..=last_row {
                let v = lu.upper[lu.offset(r, k)].abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            lu.pivots[k] = p;
            if best <= f64::EPSILON * scale * 1e-6 || best == 0.0 {
                return Err(SolverError::Singular {
                    condition_estimate: if min_pivot.is_finite() && best > 0.0 {
                        max_pivot / best
                    } else {
                        f64::INFINITY
                    },
                });
            }
            max_pivot = max_pivot.max(best);
            min_pivot = min_pivot.min(best);
            if p != k {
                for c in k..=last_col {
                    let (a, b) = (lu.offset(k, c), lu.offset(p, c));
                    lu.upper.swap(a, b);
                }
            }
            let pivot = lu.upper[lu.offset(k, k)];
            let len = last_col - k;
            for r in (k + 1)..=last_row {
                let or = lu.offset(r, k);
                let factor = lu.upper[or] / pivot;
                lu.upper[or] = 0.0;
                lu.lower[k * kl + (r - k - 1)] = factor;
                if factor == 0.0 {
                    continue;
                }
                let src_start = lu.offset(k, k + 1);
                let dst_start = lu.offset(r, k + 1);
                let (head, tail) = lu.upper.split_at_mut(dst_start);
                let src = &head[src_start..src_start + len];
                for (d, s) in tail[..len].iter_mut().zip(src) {
                    *d -= factor * s;
                }
            }
        }
        Ok(lu)
    }

    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let kl = self.kl;
        let mut x = b.to_vec();
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                x.swap(k, p);
            }
            let xk = x[k];
            if xk != 0.0 {
                let last_row = (k + kl).min(n - 1);
                let l = &self.lower[k * kl..k * kl + (last_row - k)];
                for (xr, lr) in x[k + 1..=last_row].iter_mut().zip(l) {
                    *xr -= lr * xk;
                }
            }
        }
        for k in (0..n).rev() {
            let last_col = (k + self.kl + self.ku).min(n - 1);
            let start = self.offset(k, k + 1);
            let row = &self.upper[start..start + (last_col - k)];
            let s = x[k] - dot(row, &x[k + 1..=last_col]);
            x[k] = s / self.upper[self.offset(k, k)];
        }
        x
    }
}

/// Dot product with four partial sums so the loop vectorizes.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for i in 0..chunks {
        for j in 0..4 {
            acc[j] += a[4 * i + j] * b[4 * i + j];
        }
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in 4 * chunks..a.len() {
        s += a[i] * b[i];
    }
    s
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, x| a.max(x.abs()))
}

fn relative_residual(m: &CsrMatrix, x: &[f64], b: &[f64]) -> (Vec<f64>, f64) {
    let mx = m.mul_vec(x);
    let r: Vec<f64> = b.iter().zip(&mx).map(|(bi, mi)| bi - mi).collect();
    let bn = inf_norm(b);
    let rn = inf_norm(&r);
    (r, if bn == 0.0 { rn } else { rn / bn })
}

#[derive(Debug, Clone)]
enum Backend {
    Direct(BandLu),
    Iterative { diag_inv: Vec<f64> },
}

/// A factored (or preconditioned) square system, reusable across
/// right-hand sides.
#[derive(Debug, Clone)]
pub struct LinearSolver {
    matrix: CsrMatrix,
    backend: Backend,
    options: SolverOptions,
}

impl LinearSolver {
    pub fn new(matrix: CsrMatrix, options: SolverOptions) -> Result<Self, SolverError> {
        if matrix.nrows() != matrix.ncols() {
            return Err(SolverError::InvalidInput("system matrix is not square".into()));
        }
        let direct = match options.kind {
            SolverKind::Direct => true,
            SolverKind::Iterative => false,
            SolverKind::Auto => matrix.nrows() <= DIRECT_SOLVE_LIMIT,
        };
        let backend = if direct {
            Backend::Direct(BandLu::factor(&matrix)?)
        } else {
            let diag = matrix.diagonal();
            if diag.iter().any(|&d| d == 0.0) {
                return Err(SolverError::Singular {
                    condition_estimate: f64::INFINITY,
                });
            }
            Backend::Iterative {
                diag_inv: diag.iter().map(|d| 1.0 / d).collect(),
            }
        };
        Ok(Self {
            matrix,
            backend,
            options,
        })
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn tag(&self) -> SolverTag {
        match self.backend {
            Backend::Direct(_) => SolverTag::Direct,
            Backend::Iterative { .. } => SolverTag::Iterative,
        }
    }

    pub fn solve(&self, b: &[f64]) -> Result<(Vec<f64>, SolveReport), SolverError> {
        if b.len() != self.matrix.nrows() {
            return Err(SolverError::InvalidInput(format!(
                "right-hand side has length {}, system has {}",
                b.len(),
                self.matrix.nrows()
            )));
        }
        if b.iter().any(|v| !v.is_finite()) {
            return Err(SolverError::InvalidInput("right-hand side is not finite".into()));
        }
        let start = Instant::now();
        let (x, iterations, residual) = match &self.backend {
            Backend::Direct(lu) => {
                let mut x = lu.solve(b);
                let (mut r, mut rel) = relative_residual(&self.matrix, &x, b);
                let mut steps = 1;
                // iterative refinement
                while rel > self.options.tol && steps < 4 {
                    let dx = lu.solve(&r);
                    x.iter_mut().zip(&dx).for_each(|(xi, di)| *xi += di);
                    (r, rel) = relative_residual(&self.matrix, &x, b);
                    steps += 1;
                }
                (x, steps, rel)
            }
            Backend::Iterative { diag_inv } => self.bicgstab(diag_inv, b)?,
        };
        if !(residual <= self.options.tol) {
            return Err(SolverError::NotConverged { iterations, residual });
        }
        Ok((
            x,
            SolveReport {
                residual,
                iterations,
                wall_time: start.elapsed(),
                solver: self.tag(),
            },
        ))
    }

    fn bicgstab(&self, diag_inv: &[f64], b: &[f64]) -> Result<(Vec<f64>, usize, f64), SolverError> {
        let n = b.len();
        let a = &self.matrix;
        let bnorm = inf_norm(b);
        if bnorm == 0.0 {
            return Ok((vec![0.0; n], 0, 0.0));
        }
        let dot = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(x, y)| x * y).sum::<f64>();
        let precond = |v: &[f64]| v.iter().zip(diag_inv).map(|(x, d)| x * d).collect::<Vec<f64>>();
        let mut x: Vec<f64> = precond(b);
        let (mut r, mut rel) = relative_residual(a, &x, b);
        let r_hat = r.clone();
        let mut rho = 1.0;
        let mut alpha = 1.0;
        let mut omega = 1.0;
        let mut v = vec![0.0; n];
        let mut p = vec![0.0; n];
        let mut it = 0;
        while rel > 0.1 * self.options.tol && it < self.options.max_iterations {
            it += 1;
            let rho_new = dot(&r_hat, &r);
            if rho_new == 0.0 {
                break;
            }
            let beta = (rho_new / rho) * (alpha / omega);
            rho = rho_new;
            for i in 0..n {
                p[i] = r[i] + beta * (p[i] - omega * v[i]);
            }
            let p_hat = precond(&p);
            a.mul_vec_into(&p_hat, &mut v);
            alpha = rho / dot(&r_hat, &v);
            let s: Vec<f64> = r.iter().zip(&v).map(|(ri, vi)| ri - alpha * vi).collect();
            let s_hat = precond(&s);
            let t = a.mul_vec(&s_hat);
            let tt = dot(&t, &t);
            omega = if tt > 0.0 { dot(&t, &s) / tt } else { 0.0 };
            for i in 0..n {
                x[i] += alpha * p_hat[i] + omega * s_hat[i];
                r[i] = s[i] - omega * t[i];
            }
            rel = inf_norm(&r) / bnorm;
            if omega == 0.0 || !rel.is_finite() {
                break;
            }
        }
        // true residual, not the recurrence
        let (_, rel) = relative_residual(a, &x, b);
        Ok((x, it, rel))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tridiag(n: usize, lo: f64, d: f64, up: f64) -> CsrMatrix {
        let rows = (0..n)
            .map(|i| {
                let mut r = vec![(i, d)];
                if i > 0 {
                    r.push((i - 1, lo));
                }
                if i + 1 < n {
                    r.push((i + 1, up));
                }
                r
            })
            .collect();
        CsrMatrix::from_rows(n, rows)
    }

    #[test]
    fn direct_and_iterative_agree() {
        let m = tridiag(200, -1.0, 2.5, -1.2);
        let b: Vec<f64> = (0..200).map(|i| (i as f64 * 0.1).sin()).collect();
        let direct = LinearSolver::new(
            m.clone(),
            SolverOptions {
                kind: SolverKind::Direct,
                ..Default::default()
            },
        )
        .unwrap();
        let iter = LinearSolver::new(
            m,
            SolverOptions {
                kind: SolverKind::Iterative,
                ..Default::default()
            },
        )
        .unwrap();
        let (x1, r1) = direct.solve(&b).unwrap();
        let (x2, r2) = iter.solve(&b).unwrap();
        assert_eq!(r1.solver, SolverTag::Direct);
        assert_eq!(r2.solver, SolverTag::Iterative);
        assert!(r1.residual <= 1e-10 && r2.residual <= 1e-10);
        let diff = x1.iter().zip(&x2).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(diff < 1e-8);
    }

    #[test]
    fn pivoting_handles_zero_diagonal() {
        // [[0, 1], [1, 0]]
        let m = CsrMatrix::from_rows(2, vec![vec![(1, 1.0)], vec![(0, 1.0)]]);
        let s = LinearSolver::new(m, SolverOptions::default()).unwrap();
        let (x, _) = s.solve(&[2.0, 3.0]).unwrap();
        assert_eq!(x, vec![3.0, 2.0]);
    }

    #[test]
    fn wide_band_matches_dense() {
        // pentadiagonal with an asymmetric band
        let n = 30;
        let rows = (0..n)
            .map(|i| {
                let mut r = vec![(i, 6.0 + i as f64 * 0.01)];
                for (off, v) in [(-3isize, -1.0), (-1, 0.5), (1, -2.0), (2, 1.0)] {
                    let j = i as isize + off;
                    if (0..n as isize).contains(&j) {
                        r.push((j as usize, v));
                    }
                }
                r
            })
            .collect();
        let m = CsrMatrix::from_rows(n, rows);
        let b: Vec<f64> = (0..n).map(|i| 1.0 + i as f64).collect();
        let s = LinearSolver::new(m.clone(), SolverOptions::default()).unwrap();
        let (x, rep) = s.solve(&b).unwrap();
        let mx = m.mul_vec(&x);
        assert!(mx.iter().zip(&b).all(|(a, b)| (a - b).abs() < 1e-12 * 30.0));
        assert!(rep.residual < 1e-13);
    }

    #[test]
    fn singular_matrix_is_reported() {
        let m = CsrMatrix::from_rows(2, vec![vec![(0, 1.0), (1, 1.0)], vec![(0, 1.0), (1, 1.0)]]);
        match LinearSolver::new(m, SolverOptions::default()) {
            Err(SolverError::Singular { condition_estimate }) => assert!(condition_estimate > 1e10),
            other => panic!("expected singular, got {other:?}"),
        }
    }
}
