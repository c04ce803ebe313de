use super::{DiffusionSpec, DiscretizationError};
use crate::drift::VectorFieldSpec;

/// `V(x) = |x|^{2m}`, nonnegative and coercive for every `m ≥ 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LyapunovSpec {
    power: u32,
}

impl LyapunovSpec {
    /// `V(x) = |x|^{2m}` with `m = power ≥ 1`.
    pub fn new(power: u32) -> Result<Self, DiscretizationError> {
        if power == 0 {
            return Err(DiscretizationError::InvalidInput(
                "Lyapunov power must be at least 1".into(),
            ));
        }
        Ok(Self { power })
    }

    pub fn quadratic() -> Self {
        Self { power: 1 }
    }

    pub fn power(&self) -> u32 {
        self.power
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        r2.powi(self.power as i32)
    }

    /// `L V(x) = tr(A ∇²V) + b·∇V`.
    pub fn generator_value(
        &self,
        diffusion: &DiffusionSpec,
        drift: &VectorFieldSpec,
        x: &[f64],
    ) -> Result<f64, DiscretizationError> {
        let d = x.len();
        let m = self.power as f64;
        let r2: f64 = x.iter().map(|v| v * v).sum();
        // ∇V = 2m r^{2m-2} x,  ∇²V = 2m r^{2m-2} I + 2m(2m-2) r^{2m-4} x xᵀ
        let c1 = 2.0 * m * r2.powi(self.power as i32 - 1);
        let c2 = if self.power >= 2 {
            2.0 * m * (2.0 * m - 2.0) * r2.powi(self.power as i32 - 2)
        } else {
            0.0
        };
        let mut hess = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                hess[i * d + j] = c2 * x[i] * x[j] + if i == j { c1 } else { 0.0 };
            }
        }
        let b = drift.eval(x)?;
        let transport: f64 = b.iter().zip(x).map(|(bi, xi)| bi * c1 * xi).sum();
        Ok(diffusion.trace_product(&hess) + transport)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TruncationOptions {
    /// Largest radius sampled; `L V > -θ` beyond it is a Lyapunov failure.
    pub cap: f64,
    /// Returned radii are rounded up to multiples of this step.
    pub lattice: f64,
}

impl Default for TruncationOptions {
    fn default() -> Self {
        Self {
            cap: 1.0e3,
            lattice: 1.0e-4,
        }
    }
}

fn ray_directions(d: usize) -> Vec<Vec<f64>> {
    let mut dirs = Vec::new();
    for a in 0..d {
        for s in [1.0, -1.0] {
            let mut v = vec![0.0; d];
            v[a] = s;
            dirs.push(v);
        }
    }
    match d {
        2 => {
            for k in 0..32 {
                let th = std::f64::consts::PI * k as f64 / 16.0;
                dirs.push(vec![th.cos(), th.sin()]);
            }
        }
        3 => {
            // Fibonacci sphere.
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            let count = 64;
            for k in 0..count {
                let z = 1.0 - 2.0 * (k as f64 + 0.5) / count as f64;
                let r = (1.0 - z * z).sqrt();
                let th = golden * k as f64;
                dirs.push(vec![r * th.cos(), r * th.sin(), z]);
            }
        }
        _ => {}
    }
    dirs
}

fn radial_samples(cap: f64) -> Vec<f64> {
    let mut rs: Vec<f64> = (0..=2000).map(|k| k as f64 * 0.01).collect();
    let mut r = 20.0;
    while r < cap {
        r *= 1.01;
        rs.push(r.min(cap));
    }
    rs
}

/// Smallest radius `R` (on the lattice of [`TruncationOptions`]) such that
/// `L V(x) ≤ -θ` at every sampled point with `|x| ≥ R`, sampling along a
/// fixed set of rays. The crossing on each ray is refined by bisection.
pub fn suggest_truncation(
    lyapunov: &LyapunovSpec,
    diffusion: &DiffusionSpec,
    drift: &VectorFieldSpec,
    threshold: f64,
    options: &TruncationOptions,
) -> Result<f64, DiscretizationError> {
    if !(threshold > 0.0) {
        return Err(DiscretizationError::InvalidInput(format!(
            "truncation threshold must be positive, got {threshold}"
        )));
    }
    let d = drift.dim();
    if diffusion.dim() != d {
        return Err(DiscretizationError::InvalidInput("dimension mismatch".into()));
    }
    let radii = radial_samples(options.cap);
    let lv = |dir: &[f64], r: f64| -> Result<f64, DiscretizationError> {
        let x: Vec<f64> = dir.iter().map(|v| v * r).collect();
        lyapunov.generator_value(diffusion, drift, &x)
    };
    let mut radius: f64 = 0.0;
    for dir in ray_directions(d) {
        let mut last_bad = None;
        for (k, &r) in radii.iter().enumerate() {
            if lv(&dir, r)? > -threshold {
                last_bad = Some(k);
            }
        }
        let Some(k) = last_bad else { continue };
        if k + 1 == radii.len() {
            return Err(DiscretizationError::LyapunovFailure {
                threshold,
                cap: options.cap,
            });
        }
        let (mut lo, mut hi) = (radii[k], radii[k + 1]);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if lv(&dir, mid)? > -threshold {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        radius = radius.max(hi);
    }
    let snapped = (radius / options.lattice).ceil() * options.lattice;
    Ok(snapped.max(options.lattice))
}
