use std::f64::consts::PI;

use super::{DriftError, FieldKind, VectorFieldSpec};
use crate::quadrature::{gauss_legendre, integrate};

/// Gauss–Legendre points per axis in the convolution rule.
pub const MOLLIFIER_ORDER: usize = 16;

fn bump(r2: f64) -> f64 {
    if r2 < 1.0 {
        (-1.0 / (1.0 - r2)).exp()
    } else {
        0.0
    }
}

/// `∫_{|y|<1} exp(-1/(1-|y|²)) dy`, via the radial integral.
fn bump_mass(dim: usize) -> f64 {
    let sphere = match dim {
        1 => 2.0,
        2 => 2.0 * PI,
        3 => 4.0 * PI,
        _ => unreachable!("dimension checked by caller"),
    };
    sphere * integrate(|r| r.powi(dim as i32 - 1) * bump(r * r), 0.0, 1.0, 256, 16)
}

/// Radial bump `σ(y) ∝ exp(-1/(1-|y|²))` on the unit ball, rescaled to the
/// ball of radius `width` and normalized to unit mass.
///
/// The convolution rule is the tensor Gauss–Legendre product of order
/// [`MOLLIFIER_ORDER`] over `[-width, width]^d`, with kernel weights
/// renormalized to sum to one so constants are reproduced exactly. The
/// nodes are symmetric, so linear fields are reproduced exactly as well.
#[derive(Debug, Clone, PartialEq)]
pub struct MollifierSpec {
    dim: usize,
    width: f64,
    mass: f64,
    offsets: Vec<f64>,
    weights: Vec<f64>,
}

impl MollifierSpec {
    pub fn new(dim: usize, width: f64) -> Result<Self, DriftError> {
        if !(1..=3).contains(&dim) {
            return Err(DriftError::InvalidInput(format!("unsupported dimension {dim}")));
        }
        if !(width.is_finite() && width > 0.0) {
            return Err(DriftError::InvalidInput(format!(
                "mollifier width must be positive, got {width}"
            )));
        }
        let mass = bump_mass(dim);
        let (nodes, gw) = gauss_legendre(MOLLIFIER_ORDER);
        let mut offsets = Vec::new();
        let mut weights = Vec::new();
        // Flat index `k` and `total-1-k` are mirror nodes; only the first
        // half is stored and each evaluation visits both.
        let total = MOLLIFIER_ORDER.pow(dim as u32);
        for flat in 0..total / 2 {
            let mut rest = flat;
            let mut y = [0.0; 3];
            let mut w = 1.0;
            for a in 0..dim {
                let k = rest % MOLLIFIER_ORDER;
                rest /= MOLLIFIER_ORDER;
                y[a] = nodes[k];
                w *= gw[k];
            }
            let kernel = bump(y[..dim].iter().map(|v| v * v).sum());
            if kernel > 0.0 {
                offsets.extend(y[..dim].iter().map(|v| v * width));
                weights.push(w * kernel);
            }
        }
        let s: f64 = 2.0 * weights.iter().sum::<f64>();
        weights.iter_mut().for_each(|w| *w /= s);
        Ok(Self {
            dim,
            width,
            mass,
            offsets,
            weights,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Support radius (`1/j` for the `j`-th mollifier).
    pub fn width(&self) -> f64 {
        self.width
    }

    /// Kernel density `σ_j(y)`.
    pub fn profile(&self, y: &[f64]) -> f64 {
        let r2: f64 = y.iter().map(|v| v * v).sum::<f64>() / (self.width * self.width);
        bump(r2) / (self.mass * self.width.powi(self.dim as i32))
    }

    /// Total mass of [`profile`](Self::profile) by a composite tensor
    /// Gauss–Legendre rule with `panels` panels per axis.
    pub fn mass_by_quadrature(&self, panels: usize) -> f64 {
        let w = self.width;
        match self.dim {
            1 => integrate(|y| self.profile(&[y]), -w, w, panels, 16),
            2 => integrate(
                |y0| integrate(|y1| self.profile(&[y0, y1]), -w, w, panels, 16),
                -w,
                w,
                panels,
                16,
            ),
            _ => integrate(
                |y0| {
                    integrate(
                        |y1| integrate(|y2| self.profile(&[y0, y1, y2]), -w, w, panels, 16),
                        -w,
                        w,
                        panels,
                        16,
                    )
                },
                -w,
                w,
                panels,
                16,
            ),
        }
    }

    pub(crate) fn convolve_into(&self, field: &VectorFieldSpec, x: &[f64], out: &mut [f64]) -> Result<(), DriftError> {
        let d = self.dim;
        if d == 1 {
            let w = self.width;
            let mut cuts: Vec<f64> = field
                .jump_points_1d()
                .into_iter()
                .map(|p| x[0] - p)
                .filter(|&y| y > -w && y < w)
                .collect();
            if !cuts.is_empty() {
                cuts.sort_by(f64::total_cmp);
                return self.convolve_split_1d(field, x[0], &cuts, out);
            }
        }
        out.iter_mut().for_each(|v| *v = 0.0);
        let mut minus = vec![0.0; d];
        let mut plus = vec![0.0; d];
        let mut v_minus = vec![0.0; d];
        let mut v_plus = vec![0.0; d];
        for (q, &w) in self.weights.iter().enumerate() {
            for a in 0..d {
                minus[a] = x[a] - self.offsets[q * d + a];
                plus[a] = x[a] + self.offsets[q * d + a];
            }
            field.eval_into(&minus, &mut v_minus)?;
            field.eval_into(&plus, &mut v_plus)?;
            for a in 0..d {
                out[a] += w * (v_minus[a] + v_plus[a]);
            }
        }
        Ok(())
    }
}

impl MollifierSpec {
    /// 1D convolution with the kernel support cut at `cuts`, one
    /// Gauss–Legendre rule of order [`MOLLIFIER_ORDER`] per smooth piece.
    fn convolve_split_1d(
        &self,
        field: &VectorFieldSpec,
        x: f64,
        cuts: &[f64],
        out: &mut [f64],
    ) -> Result<(), DriftError> {
        let (nodes, gw) = gauss_legendre(MOLLIFIER_ORDER);
        let w = self.width;
        let mut edges = Vec::with_capacity(cuts.len() + 2);
        edges.push(-w);
        edges.extend_from_slice(cuts);
        edges.push(w);
        let mut total = 0.0;
        let mut mass = 0.0;
        for piece in edges.windows(2) {
            let (a, b) = (piece[0], piece[1]);
            let mid = 0.5 * (a + b);
            let half = 0.5 * (b - a);
            for (xi, wi) in nodes.iter().zip(&gw) {
                let y = mid + half * xi;
                let kw = wi * half * bump((y / w) * (y / w));
                if kw == 0.0 {
                    continue;
                }
                total += kw * field.eval(&[x - y])?[0];
                mass += kw;
            }
        }
        out[0] = total / mass;
        Ok(())
    }
}

/// `β_j = b ∗ σ_j` with kernel support radius `1/j`.
pub fn mollify(field: &VectorFieldSpec, j: f64) -> Result<VectorFieldSpec, DriftError> {
    if !(j.is_finite() && j > 0.0) {
        return Err(DriftError::InvalidInput(format!(
            "mollifier index must be positive, got {j}"
        )));
    }
    let mollifier = MollifierSpec::new(field.dim(), 1.0 / j)?;
    if let Some(r) = field.domain_radius() {
        if mollifier.width() >= r {
            return Err(DriftError::Domain {
                point: vec![mollifier.width(); field.dim()],
            });
        }
    }
    Ok(VectorFieldSpec::wrap(
        field.dim(),
        FieldKind::Mollified {
            inner: Box::new(field.clone()),
            mollifier,
        },
        field.declared_dissipative(),
    ))
}
