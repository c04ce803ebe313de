use super::{DiscretizationError, Grid};

/// Per-node discrete gradient and its Euclidean norm.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientField {
    dim: usize,
    components: Vec<f64>,
    norms: Vec<f64>,
}

impl GradientField {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Gradient vector at `node`.
    pub fn at(&self, node: usize) -> &[f64] {
        &self.components[node * self.dim..(node + 1) * self.dim]
    }

    pub fn norms(&self) -> &[f64] {
        &self.norms
    }

    pub fn into_norms(self) -> Vec<f64> {
        self.norms
    }
}

/// Central differences where both neighbors exist along an axis, one-sided
/// differences on the faces of the box.
pub fn discrete_gradient(grid: &Grid, u: &[f64]) -> Result<GradientField, DiscretizationError> {
    if u.len() != grid.len() {
        return Err(DiscretizationError::InvalidInput(format!(
            "node values have length {}, grid has {} nodes",
            u.len(),
            grid.len()
        )));
    }
    let d = grid.dim();
    let n = grid.points_per_axis();
    let h = grid.spacing();
    let mut components = vec![0.0; grid.len() * d];
    let mut norms = vec![0.0; grid.len()];
    for node in 0..grid.len() {
        let idx = grid.multi_index(node);
        let mut sq = 0.0;
        for axis in 0..d {
            let s = grid.stride(axis);
            let g = match idx[axis] {
                0 => (u[node + s] - u[node]) / h,
                i if i == n - 1 => (u[node] - u[node - s]) / h,
                _ => (u[node + s] - u[node - s]) / (2.0 * h),
            };
            components[node * d + axis] = g;
            sq += g * g;
        }
        norms[node] = sq.sqrt();
    }
    Ok(GradientField {
        dim: d,
        components,
        norms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::build_grid;

    #[test]
    fn constants_have_zero_gradient() {
        let g = build_grid(2, 1.0, 5).unwrap();
        let grad = discrete_gradient(&g, &vec![3.5; g.len()]).unwrap();
        assert!(grad.norms().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn linear_function_has_unit_slope() {
        let g = build_grid(1, 2.0, 9).unwrap();
        let u = g.evaluate(|x| x[0]);
        let grad = discrete_gradient(&g, &u).unwrap();
        for k in 0..g.len() {
            assert!((grad.at(k)[0] - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn central_difference_exact_on_quadratics() {
        let g = build_grid(1, 2.0, 9).unwrap();
        assert_eq!(g.spacing(), 0.5);
        let u = g.evaluate(|x| x[0] * x[0]);
        let grad = discrete_gradient(&g, &u).unwrap();
        let node = 6;
        assert_eq!(g.point(node), vec![1.0]);
        assert_eq!(grad.at(node)[0], 2.0);
    }

    #[test]
    fn norm_combines_axes() {
        let g = build_grid(2, 1.0, 5).unwrap();
        let u = g.evaluate(|x| 3.0 * x[0] - 4.0 * x[1]);
        let grad = discrete_gradient(&g, &u).unwrap();
        assert!(grad.norms().iter().all(|&v| (v - 5.0).abs() < 1e-13));
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let g = build_grid(1, 1.0, 5).unwrap();
        assert!(discrete_gradient(&g, &[1.0, 2.0]).is_err());
    }
}
