use super::{DriftError, MollifierSpec, YosidaOptions};
use crate::discretization::Grid;

/// One term `coeff · Π x_k^{powers[k]}` of a potential `P`.
#[derive(Debug, Clone, PartialEq)]
pub struct Monomial {
    pub coeff: f64,
    pub powers: Vec<u32>,
}

/// Node values of a drift on a grid, interpolated multilinearly. Nodes
/// holding NaN are masked: evaluation touching them is a domain error.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedField {
    grid: Grid,
    values: Vec<f64>,
}

impl TabulatedField {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Value at `node`.
    pub fn node_value(&self, node: usize) -> &[f64] {
        let d = self.grid.dim();
        &self.values[node * d..(node + 1) * d]
    }

    fn eval_into(&self, x: &[f64], out: &mut [f64]) -> Result<(), DriftError> {
        let d = self.grid.dim();
        let (base, frac) = self
            .grid
            .locate(x)
            .ok_or_else(|| DriftError::Domain { point: x.to_vec() })?;
        out.iter_mut().for_each(|v| *v = 0.0);
        let mut idx = [0usize; crate::discretization::MAX_DIM];
        for corner in 0..(1usize << d) {
            let mut w = 1.0;
            for a in 0..d {
                let up = (corner >> a) & 1 == 1;
                idx[a] = base[a] + up as usize;
                w *= if up { frac[a] } else { 1.0 - frac[a] };
            }
            if w == 0.0 {
                continue;
            }
            let node = self.grid.node(&idx);
            let v = self.node_value(node);
            if v.iter().any(|c| c.is_nan()) {
                return Err(DriftError::Domain { point: x.to_vec() });
            }
            for (o, c) in out.iter_mut().zip(v) {
                *o += w * c;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FieldKind {
    /// `b(x) = M x`, `M` row-major.
    Linear {
        matrix: Vec<f64>,
    },
    Constant {
        value: Vec<f64>,
    },
    /// `b(x) = -s x/|x|`, zero at the origin.
    Sign {
        strength: f64,
    },
    /// `b = -∇P` with `P = Σ` monomials.
    PolynomialGradient {
        terms: Vec<Monomial>,
    },
    Tabulated(TabulatedField),
    Sum(Vec<VectorFieldSpec>),
    /// `b ∗ σ`, evaluated by a fixed tensor Gauss–Legendre rule.
    Mollified {
        inner: Box<VectorFieldSpec>,
        mollifier: MollifierSpec,
    },
    /// `F_α(β) = β ∘ (I - αβ)^{-1}`.
    Yosida {
        inner: Box<VectorFieldSpec>,
        alpha: f64,
        options: YosidaOptions,
    },
    /// `b(x) - c x`.
    Shifted {
        inner: Box<VectorFieldSpec>,
        shift: f64,
    },
}

/// A drift `b: ℝ^d → ℝ^d` with a declared-dissipativity flag.
///
/// Built-in kinds are linear maps, constants, the sign field and negative
/// polynomial gradients; tabulated fields come from grid data, and
/// composite kinds (sums and the regularization wrappers) nest other specs.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorFieldSpec {
    dim: usize,
    kind: FieldKind,
    declared_dissipative: bool,
}

fn negative_semidefinite_symmetric_part(m: &[f64], d: usize) -> bool {
    let sym = nalgebra::DMatrix::from_fn(d, d, |i, j| 0.5 * (m[i * d + j] + m[j * d + i]));
    sym.symmetric_eigenvalues().max() <= 1e-14
}

impl VectorFieldSpec {
    /// `b(x) = M x`. Declared dissipative iff the symmetric part of `M` is
    /// negative semidefinite.
    pub fn linear(rows: Vec<Vec<f64>>) -> Result<Self, DriftError> {
        let d = rows.len();
        if d == 0 || rows.iter().any(|r| r.len() != d) {
            return Err(DriftError::InvalidInput("linear drift matrix must be square".into()));
        }
        let matrix: Vec<f64> = rows.into_iter().flatten().collect();
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(DriftError::InvalidInput("linear drift matrix is not finite".into()));
        }
        let declared = negative_semidefinite_symmetric_part(&matrix, d);
        Ok(Self {
            dim: d,
            kind: FieldKind::Linear { matrix },
            declared_dissipative: declared,
        })
    }

    pub fn constant(value: Vec<f64>) -> Self {
        Self {
            dim: value.len(),
            kind: FieldKind::Constant { value },
            declared_dissipative: true,
        }
    }

    /// `b(x) = -strength · x/|x|`; dissipative for `strength ≥ 0`.
    pub fn sign(dim: usize, strength: f64) -> Self {
        Self {
            dim,
            kind: FieldKind::Sign { strength },
            declared_dissipative: strength >= 0.0,
        }
    }

    /// `b = -∇P` for `P(x) = Σ coeff · Π x_k^{p_k}`. Dissipativity (convexity
    /// of `P`) is not inferred; the field is declared non-dissipative until
    /// [`with_declared_dissipative`](Self::with_declared_dissipative) says so.
    pub fn polynomial_gradient(dim: usize, terms: Vec<(f64, Vec<u32>)>) -> Result<Self, DriftError> {
        if terms.iter().any(|(_, p)| p.len() != dim) {
            return Err(DriftError::InvalidInput(format!(
                "every monomial needs {dim} exponents"
            )));
        }
        Ok(Self {
            dim,
            kind: FieldKind::PolynomialGradient {
                terms: terms
                    .into_iter()
                    .map(|(coeff, powers)| Monomial { coeff, powers })
                    .collect(),
            },
            declared_dissipative: false,
        })
    }

    /// Node values `values[node]` (each of length `d`) on `grid`. NaN entries
    /// mark masked nodes.
    pub fn tabulated(grid: Grid, values: Vec<Vec<f64>>) -> Result<Self, DriftError> {
        let d = grid.dim();
        if values.len() != grid.len() || values.iter().any(|v| v.len() != d) {
            return Err(DriftError::InvalidInput(format!(
                "tabulated drift needs {} node values of dimension {d}",
                grid.len()
            )));
        }
        Ok(Self {
            dim: d,
            kind: FieldKind::Tabulated(TabulatedField {
                grid,
                values: values.into_iter().flatten().collect(),
            }),
            declared_dissipative: false,
        })
    }

    /// Pointwise sum; dissipative if every part is.
    pub fn sum(parts: Vec<VectorFieldSpec>) -> Result<Self, DriftError> {
        let Some(first) = parts.first() else {
            return Err(DriftError::InvalidInput("empty composite drift".into()));
        };
        let dim = first.dim;
        if parts.iter().any(|p| p.dim != dim) {
            return Err(DriftError::InvalidInput("composite parts differ in dimension".into()));
        }
        let declared = parts.iter().all(|p| p.declared_dissipative);
        Ok(Self {
            dim,
            kind: FieldKind::Sum(parts),
            declared_dissipative: declared,
        })
    }

    pub(crate) fn wrap(dim: usize, kind: FieldKind, declared_dissipative: bool) -> Self {
        Self {
            dim,
            kind,
            declared_dissipative,
        }
    }

    pub fn with_declared_dissipative(mut self, declared: bool) -> Self {
        self.declared_dissipative = declared;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> &FieldKind {
        &self.kind
    }

    pub fn declared_dissipative(&self) -> bool {
        self.declared_dissipative
    }

    /// Box radius of the evaluation domain, `None` when unbounded.
    pub fn domain_radius(&self) -> Option<f64> {
        match &self.kind {
            FieldKind::Tabulated(t) => Some(t.grid.radius()),
            FieldKind::Sum(parts) => parts.iter().filter_map(VectorFieldSpec::domain_radius).reduce(f64::min),
            FieldKind::Mollified { inner, mollifier } => inner.domain_radius().map(|r| r - mollifier.width()),
            FieldKind::Yosida { inner, .. } | FieldKind::Shifted { inner, .. } => inner.domain_radius(),
            _ => None,
        }
    }

    /// Known jump discontinuities of a 1D field. Only built-in kinds report
    /// them; wrapped fields are treated as continuous.
    pub fn jump_points_1d(&self) -> Vec<f64> {
        if self.dim != 1 {
            return Vec::new();
        }
        match &self.kind {
            FieldKind::Sign { strength } if *strength != 0.0 => vec![0.0],
            FieldKind::Sum(parts) => {
                let mut pts: Vec<f64> = parts.iter().flat_map(|p| p.jump_points_1d()).collect();
                pts.sort_by(f64::total_cmp);
                pts.dedup();
                pts
            }
            _ => Vec::new(),
        }
    }

    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>, DriftError> {
        let mut out = vec![0.0; self.dim];
        self.eval_into(x, &mut out)?;
        Ok(out)
    }

    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) -> Result<(), DriftError> {
        let d = self.dim;
        if x.len() != d {
            return Err(DriftError::Dimension {
                expected: d,
                got: x.len(),
            });
        }
        match &self.kind {
            FieldKind::Linear { matrix } => {
                for (i, o) in out.iter_mut().enumerate() {
                    *o = (0..d).map(|j| matrix[i * d + j] * x[j]).sum();
                }
            }
            FieldKind::Constant { value } => out.copy_from_slice(value),
            FieldKind::Sign { strength } => {
                let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                for (o, xi) in out.iter_mut().zip(x) {
                    *o = if r == 0.0 { 0.0 } else { -strength * xi / r };
                }
            }
            FieldKind::PolynomialGradient { terms } => {
                out.iter_mut().for_each(|v| *v = 0.0);
                for t in terms {
                    for (i, o) in out.iter_mut().enumerate() {
                        let p = t.powers[i];
                        if p == 0 {
                            continue;
                        }
                        let mut term = t.coeff * p as f64 * x[i].powi(p as i32 - 1);
                        for (k, &pk) in t.powers.iter().enumerate() {
                            if k != i {
                                term *= x[k].powi(pk as i32);
                            }
                        }
                        *o -= term;
                    }
                }
            }
            FieldKind::Tabulated(t) => t.eval_into(x, out)?,
            FieldKind::Sum(parts) => {
                out.iter_mut().for_each(|v| *v = 0.0);
                let mut tmp = vec![0.0; d];
                for p in parts {
                    p.eval_into(x, &mut tmp)?;
                    out.iter_mut().zip(&tmp).for_each(|(o, v)| *o += v);
                }
            }
            FieldKind::Mollified { inner, mollifier } => mollifier.convolve_into(inner, x, out)?,
            FieldKind::Yosida { inner, alpha, options } => {
                let y = super::yosida_resolve_with(inner, *alpha, x, options)?;
                inner.eval_into(&y, out)?;
            }
            FieldKind::Shifted { inner, shift } => {
                inner.eval_into(x, out)?;
                out.iter_mut().zip(x).for_each(|(o, xi)| *o -= shift * xi);
            }
        }
        Ok(())
    }
}
