use super::SolverError;
use crate::discretization::DiffusionSpec;
use crate::drift::{check_dissipative, sample_pairs, DissipativityReport, VectorFieldSpec};

/// Coefficients on one interval `[t_{k-1}, t_k)`.
#[derive(Debug, Clone)]
pub struct SchedulePiece {
    pub diffusion: DiffusionSpec,
    pub drift: VectorFieldSpec,
}

/// Piecewise-constant-in-time coefficients on `[0, 1]`.
#[derive(Debug, Clone)]
pub struct CoefficientSchedule {
    breakpoints: Vec<f64>,
    pieces: Vec<SchedulePiece>,
}

impl CoefficientSchedule {
    pub fn new(breakpoints: Vec<f64>, pieces: Vec<SchedulePiece>) -> Result<Self, SolverError> {
        if breakpoints.len() < 2 {
            return Err(SolverError::InvalidInput(
                "a schedule needs at least two breakpoints".into(),
            ));
        }
        if breakpoints[0] != 0.0 || *breakpoints.last().unwrap() != 1.0 {
            return Err(SolverError::InvalidInput(
                "breakpoints must start at 0 and end at 1".into(),
            ));
        }
        if let Some(w) = breakpoints.windows(2).find(|w| !(w[0] < w[1])) {
            return Err(SolverError::InvalidInput(format!(
                "breakpoints must be strictly increasing ({} then {})",
                w[0], w[1]
            )));
        }
        if pieces.len() != breakpoints.len() - 1 {
            return Err(SolverError::InvalidInput(format!(
                "{} intervals but {} coefficient pieces",
                breakpoints.len() - 1,
                pieces.len()
            )));
        }
        let d = pieces[0].diffusion.dim();
        for (k, p) in pieces.iter().enumerate() {
            if p.diffusion.dim() != d || p.drift.dim() != d {
                return Err(SolverError::InvalidInput(format!(
                    "piece {k} has inconsistent dimension"
                )));
            }
        }
        Ok(Self { breakpoints, pieces })
    }

    /// Constant coefficients on the whole unit interval.
    pub fn constant(diffusion: DiffusionSpec, drift: VectorFieldSpec) -> Result<Self, SolverError> {
        Self::new(vec![0.0, 1.0], vec![SchedulePiece { diffusion, drift }])
    }

    /// Freezes time-dependent coefficients on each interval `[t_{l-1}, t_l)` at
    /// the right endpoint `t_l` (taken mod 1).
    pub fn from_sampler<F>(breakpoints: Vec<f64>, mut coefficients: F) -> Result<Self, SolverError>
    where
        F: FnMut(f64) -> Result<(DiffusionSpec, VectorFieldSpec), SolverError>,
    {
        let mut pieces = Vec::with_capacity(breakpoints.len().saturating_sub(1));
        for &t in breakpoints.iter().skip(1) {
            let (diffusion, drift) = coefficients(t.rem_euclid(1.0))?;
            pieces.push(SchedulePiece { diffusion, drift });
        }
        Self::new(breakpoints, pieces)
    }

    pub fn dim(&self) -> usize {
        self.pieces[0].diffusion.dim()
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn pieces(&self) -> &[SchedulePiece] {
        &self.pieces
    }

    pub fn interval(&self, k: usize) -> (f64, f64) {
        (self.breakpoints[k], self.breakpoints[k + 1])
    }

    /// `max_k (‖A_k‖ + ‖A_k⁻¹‖)`.
    pub fn diffusion_bound(&self) -> f64 {
        self.pieces.iter().map(|p| p.diffusion.bound()).fold(0.0, f64::max)
    }

    /// Sampled dissipativity check of every drift on the box of half-width `radius`.
    pub fn check_drifts(
        &self,
        radius: f64,
        samples: usize,
        seed: u64,
        tolerance: f64,
    ) -> Result<Vec<DissipativityReport>, SolverError> {
        let pairs = sample_pairs(self.dim(), radius, samples, seed);
        self.pieces
            .iter()
            .map(|p| Ok(check_dissipative(&p.drift, &pairs, tolerance)?))
            .collect()
    }
}

/// Sorted `{s₀ + l·2⁻ⁿ mod 1 : l = 0..2ⁿ-1} ∪ {0, 1}`.
pub fn time_sampler(n: u32, s0: f64) -> Result<Vec<f64>, SolverError> {
    if n == 0 || n > 30 {
        return Err(SolverError::InvalidInput(format!(
            "sampler level must be in 1..=30, got {n}"
        )));
    }
    if !(0.0..1.0).contains(&s0) {
        return Err(SolverError::InvalidInput(format!("s0 must lie in [0, 1), got {s0}")));
    }
    let mut points = sample_points(n, s0);
    points.push(0.0);
    points.push(1.0);
    points.sort_by(f64::total_cmp);
    points.dedup();
    Ok(points)
}

fn sample_points(n: u32, s0: f64) -> Vec<f64> {
    let step = (-(n as f64)).exp2();
    (0..1u64 << n)
        .map(|l| {
            let t = s0 + l as f64 * step;
            if t >= 1.0 {
                t - 1.0
            } else {
                t
            }
        })
        .collect()
}

/// `2⁻ⁿ Σ_l θ(t_{n,l})`.
pub fn riemann_sum<F: Fn(f64) -> f64>(theta: F, n: u32, s0: f64) -> Result<f64, SolverError> {
    time_sampler(n, s0)?;
    let points = sample_points(n, s0);
    Ok(points.iter().map(|&t| theta(t)).sum::<f64>() / points.len() as f64)
}
