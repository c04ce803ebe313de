use super::DiscretizationError;

pub const MAX_DIM: usize = 3;

/// Uniform grid on the box `[-R, R]^d` with `n` points per axis.
///
/// Nodes are numbered row-major: the multi-index `(i_0, …, i_{d-1})` maps to
/// `Σ i_k n^{d-1-k}`, so the last axis varies fastest. Coordinate `i` along
/// any axis is `R (2i - (n-1)) / (n-1)`, which reproduces `±R` and `0`
/// exactly and is exactly antisymmetric under `i ↦ n-1-i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    dim: usize,
    radius: f64,
    points: usize,
    spacing: f64,
}

/// Builds a grid, validating `d ∈ {1,2,3}`, `R > 0` and odd `n ≥ 3`.
pub fn build_grid(dim: usize, radius: f64, points: usize) -> Result<Grid, DiscretizationError> {
    Grid::new(dim, radius, points)
}

impl Grid {
    pub fn new(dim: usize, radius: f64, points: usize) -> Result<Self, DiscretizationError> {
        if !(1..=MAX_DIM).contains(&dim) {
            return Err(DiscretizationError::InvalidInput(format!(
                "grid dimension must be 1, 2 or 3, got {dim}"
            )));
        }
        if !(radius.is_finite() && radius > 0.0) {
            return Err(DiscretizationError::InvalidInput(format!(
                "grid radius must be positive and finite, got {radius}"
            )));
        }
        if points < 3 || points % 2 == 0 {
            return Err(DiscretizationError::InvalidInput(format!(
                "grid points per axis must be odd and at least 3, got {points}"
            )));
        }
        if points.checked_pow(dim as u32).is_none() {
            return Err(DiscretizationError::InvalidInput("grid too large".into()));
        }
        Ok(Self {
            dim,
            radius,
            points,
            spacing: 2.0 * radius / (points - 1) as f64,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn points_per_axis(&self) -> usize {
        self.points
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Total node count `n^d`.
    pub fn len(&self) -> usize {
        self.points.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `h^d`, the volume attached to each node in discrete integrals.
    pub fn cell_volume(&self) -> f64 {
        self.spacing.powi(self.dim as i32)
    }

    /// Node stride along `axis`.
    pub fn stride(&self, axis: usize) -> usize {
        self.points.pow((self.dim - 1 - axis) as u32)
    }

    pub fn axis_coordinate(&self, i: usize) -> f64 {
        let n1 = (self.points - 1) as f64;
        self.radius * (2.0 * i as f64 - n1) / n1
    }

    pub fn multi_index(&self, node: usize) -> [usize; MAX_DIM] {
        let mut idx = [0; MAX_DIM];
        let mut rest = node;
        for axis in (0..self.dim).rev() {
            idx[axis] = rest % self.points;
            rest /= self.points;
        }
        idx
    }

    pub fn node(&self, idx: &[usize]) -> usize {
        idx[..self.dim].iter().fold(0, |acc, &i| acc * self.points + i)
    }

    pub fn point(&self, node: usize) -> Vec<f64> {
        let idx = self.multi_index(node);
        (0..self.dim).map(|a| self.axis_coordinate(idx[a])).collect()
    }

    pub fn points(&self) -> impl Iterator<Item = Vec<f64>> + '_ {
        (0..self.len()).map(|k| self.point(k))
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        let idx = self.multi_index(node);
        idx[..self.dim].iter().any(|&i| i == 0 || i == self.points - 1)
    }

    /// Whether the node lies in the reporting region `[-R/2, R/2]^d`.
    pub fn is_inner(&self, node: usize) -> bool {
        let half = 0.5 * self.radius * (1.0 + 1e-12);
        self.point(node).iter().all(|x| x.abs() <= half)
    }

    pub fn inner_nodes(&self) -> Vec<usize> {
        (0..self.len()).filter(|&k| self.is_inner(k)).collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        let r = self.radius * (1.0 + 1e-12);
        x.len() == self.dim && x.iter().all(|v| v.abs() <= r)
    }

    /// Tabulates `f` at every node.
    pub fn evaluate<F: Fn(&[f64]) -> f64>(&self, f: F) -> Vec<f64> {
        (0..self.len()).map(|k| f(&self.point(k))).collect()
    }

    /// Cell containing `x`: lower-corner multi-index and fractional offsets
    /// in `[0, 1]`. `None` outside the box.
    pub fn locate(&self, x: &[f64]) -> Option<([usize; MAX_DIM], [f64; MAX_DIM])> {
        if !self.contains(x) {
            return None;
        }
        let mut base = [0; MAX_DIM];
        let mut frac = [0.0; MAX_DIM];
        for a in 0..self.dim {
            let s = ((x[a] + self.radius) / self.spacing).clamp(0.0, (self.points - 1) as f64);
            let i = (s.floor() as usize).min(self.points - 2);
            base[a] = i;
            frac[a] = (s - i as f64).clamp(0.0, 1.0);
        }
        Some((base, frac))
    }

    /// Grid with the same box and `2(n-1)+1` points per axis.
    pub fn refined(&self) -> Result<Grid, DiscretizationError> {
        Grid::new(self.dim, self.radius, 2 * (self.points - 1) + 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smallest_grid() {
        let g = build_grid(1, 1.0, 3).unwrap();
        assert_eq!(g.len(), 3);
        assert_eq!(g.spacing(), 1.0);
        let xs: Vec<f64> = g.points().map(|p| p[0]).collect();
        assert_eq!(xs, vec![-1.0, 0.0, 1.0]);
    }

    #[test]
    fn two_dimensional_counts() {
        let g = build_grid(2, 2.0, 5).unwrap();
        assert_eq!(g.len(), 25);
        assert_eq!(g.spacing(), 1.0);
        assert_eq!(g.point(g.node(&[0, 4])), vec![-2.0, 2.0]);
        assert_eq!(g.point(12), vec![0.0, 0.0]);
    }

    #[test]
    fn node_four_of_seven() {
        let g = build_grid(1, 1.5, 7).unwrap();
        assert_eq!(g.spacing(), 0.5);
        assert_eq!(g.point(4), vec![0.5]);
    }

    #[test]
    fn rejects_even_or_tiny_point_counts() {
        assert!(matches!(
            build_grid(1, 1.0, 4),
            Err(DiscretizationError::InvalidInput(_))
        ));
        assert!(build_grid(1, 1.0, 1).is_err());
        assert!(build_grid(4, 1.0, 3).is_err());
        assert!(build_grid(2, -1.0, 3).is_err());
    }

    #[test]
    fn boundary_classification_matches_indices() {
        let g = build_grid(3, 1.0, 5).unwrap();
        for k in 0..g.len() {
            let idx = g.multi_index(k);
            assert_eq!(g.node(&idx), k);
            let expect = idx[..3].iter().any(|&i| i == 0 || i == 4);
            assert_eq!(g.is_boundary(k), expect);
        }
        assert_eq!(g.len() - (0..g.len()).filter(|&k| g.is_boundary(k)).count(), 27);
    }

    #[test]
    fn coordinates_are_exactly_symmetric() {
        let g = build_grid(1, 6.0, 401).unwrap();
        for i in 0..401 {
            assert_eq!(g.axis_coordinate(i), -g.axis_coordinate(400 - i));
        }
        assert_eq!(g.axis_coordinate(0), -6.0);
        assert_eq!(g.axis_coordinate(400), 6.0);
        assert_eq!(g.axis_coordinate(200), 0.0);
        assert_eq!(g.inner_nodes().len(), 201);
    }
}
