use nalgebra::{DMatrix, DVector};

use super::{check_dissipative, mollify, sample_pairs, DriftError, FieldKind, VectorFieldSpec};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct YosidaOptions {
    /// Required bound on `|y - αβ(y) - x|`.
    pub tol: f64,
    pub max_iterations: usize,
}

impl Default for YosidaOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iterations: 200,
        }
    }
}

fn residual(beta: &VectorFieldSpec, alpha: f64, x: &[f64], y: &[f64], out: &mut [f64]) -> Result<f64, DriftError> {
    beta.eval_into(y, out)?;
    let mut norm2 = 0.0;
    for a in 0..x.len() {
        out[a] = y[a] - alpha * out[a] - x[a];
        norm2 += out[a] * out[a];
    }
    Ok(norm2.sqrt())
}

/// Solves `y - αβ(y) = x` to `options.tol` in the residual.
pub fn yosida_resolve(beta: &VectorFieldSpec, alpha: f64, x: &[f64], tol: f64) -> Result<Vec<f64>, DriftError> {
    yosida_resolve_with(
        beta,
        alpha,
        x,
        &YosidaOptions {
            tol,
            ..YosidaOptions::default()
        },
    )
}

/// Damped fixed-point iteration `y ← y - ω(y - αβ(y) - x)`, halving `ω`
/// whenever the residual fails to drop. If that stalls, 1D problems switch
/// to a safeguarded Newton/bisection on the bracket between `x` and
/// `x + αβ(x)`, and higher dimensions to Newton with a finite-difference
/// Jacobian and backtracking.
pub fn yosida_resolve_with(
    beta: &VectorFieldSpec,
    alpha: f64,
    x: &[f64],
    options: &YosidaOptions,
) -> Result<Vec<f64>, DriftError> {
    let d = beta.dim();
    if x.len() != d {
        return Err(DriftError::Dimension {
            expected: d,
            got: x.len(),
        });
    }
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(DriftError::InvalidInput(format!("α must be positive, got {alpha}")));
    }
    if !(options.tol > 0.0) {
        return Err(DriftError::InvalidInput("tolerance must be positive".into()));
    }
    let tol = options.tol;
    let mut y = x.to_vec();
    let mut r = vec![0.0; d];
    let mut res = residual(beta, alpha, x, &y, &mut r)?;
    if res <= tol {
        return Ok(y);
    }

    let mut iterations = 0;
    let mut omega = 1.0;
    let mut cand = vec![0.0; d];
    let mut rc = vec![0.0; d];
    let fixed_point_budget = options.max_iterations / 4;
    while iterations < fixed_point_budget && omega > 1e-3 {
        iterations += 1;
        for a in 0..d {
            cand[a] = y[a] - omega * r[a];
        }
        let res_c = residual(beta, alpha, x, &cand, &mut rc)?;
        if res_c < res {
            std::mem::swap(&mut y, &mut cand);
            std::mem::swap(&mut r, &mut rc);
            res = res_c;
            omega = (2.0 * omega).min(1.0);
            if res <= tol {
                return Ok(y);
            }
        } else {
            omega *= 0.5;
        }
    }

    if d == 1 {
        scalar_fallback(beta, alpha, x[0], y[0], iterations, options)
    } else {
        newton_fallback(beta, alpha, x, y, iterations, options)
    }
}

fn scalar_fallback(
    beta: &VectorFieldSpec,
    alpha: f64,
    x: f64,
    start: f64,
    mut iterations: usize,
    options: &YosidaOptions,
) -> Result<Vec<f64>, DriftError> {
    let g = |y: f64| -> Result<f64, DriftError> { Ok(y - alpha * beta.eval(&[y])?[0] - x) };
    let step = alpha * beta.eval(&[x])?[0];
    let (mut lo, mut hi) = if step >= 0.0 { (x, x + step) } else { (x + step, x) };
    let (mut g_lo, mut g_hi) = (g(lo)?, g(hi)?);
    if g_lo > 0.0 || g_hi < 0.0 {
        // Only possible when β is not dissipative.
        return Err(DriftError::Convergence {
            iterations,
            residual: g_lo.abs().min(g_hi.abs()),
        });
    }
    let mut y = start.clamp(lo, hi);
    let mut gy = g(y)?;
    let mut best = gy.abs();
    let mut width = 2.0 * (hi - lo);
    while iterations < options.max_iterations {
        if gy.abs() <= options.tol {
            return Ok(vec![y]);
        }
        iterations += 1;
        if gy < 0.0 {
            lo = y;
            g_lo = gy;
        } else {
            hi = y;
            g_hi = gy;
        }
        // Newton step from the secant slope of the bracket, else bisection.
        // Bisect as well when the bracket failed to halve, which keeps
        // one-sided secant stagnation from eating the budget.
        let halved = hi - lo <= 0.5 * width;
        width = hi - lo;
        let slope = (g_hi - g_lo) / (hi - lo);
        let newton = y - gy / slope;
        y = if halved && slope.is_finite() && slope > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= 4.0 * f64::EPSILON * (1.0 + x.abs()) {
            // A collapsed bracket pins the root to machine precision. Accept
            // it when the residual spread across it is evaluation noise
            // (quadrature-mollified fields) rather than a jump in β.
            if g_hi - g_lo <= 1e-8 * (1.0 + x.abs() + step.abs()) {
                return Ok(vec![y]);
            }
            break;
        }
        gy = g(y)?;
        best = best.min(gy.abs());
    }
    if gy.abs() <= options.tol {
        return Ok(vec![y]);
    }
    Err(DriftError::Convergence {
        iterations,
        residual: best,
    })
}

fn newton_fallback(
    beta: &VectorFieldSpec,
    alpha: f64,
    x: &[f64],
    mut y: Vec<f64>,
    mut iterations: usize,
    options: &YosidaOptions,
) -> Result<Vec<f64>, DriftError> {
    let d = x.len();
    let mut r = vec![0.0; d];
    let mut res = residual(beta, alpha, x, &y, &mut r)?;
    let mut probe = vec![0.0; d];
    let mut rc = vec![0.0; d];
    while iterations < options.max_iterations {
        if res <= options.tol {
            return Ok(y);
        }
        iterations += 1;
        let mut jac = DMatrix::<f64>::identity(d, d);
        for j in 0..d {
            let delta = 1e-7 * (1.0 + y[j].abs());
            probe.copy_from_slice(&y);
            probe[j] = y[j] + delta;
            let bp = beta.eval(&probe)?;
            probe[j] = y[j] - delta;
            let bm = beta.eval(&probe)?;
            for i in 0..d {
                jac[(i, j)] -= alpha * (bp[i] - bm[i]) / (2.0 * delta);
            }
        }
        let Some(step) = jac.lu().solve(&DVector::from_column_slice(&r)) else {
            break;
        };
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            for a in 0..d {
                probe[a] = y[a] - t * step[a];
            }
            let res_c = residual(beta, alpha, x, &probe, &mut rc)?;
            if res_c < res {
                y.copy_from_slice(&probe);
                r.copy_from_slice(&rc);
                res = res_c;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if res <= options.tol {
        return Ok(y);
    }
    Err(DriftError::Convergence {
        iterations,
        residual: res,
    })
}

fn spot_check(beta: &VectorFieldSpec) -> Result<(), DriftError> {
    if !beta.declared_dissipative() {
        return Err(DriftError::InvalidInput(
            "Yosida approximation requires a field declared dissipative".into(),
        ));
    }
    let radius = beta.domain_radius().map_or(1.0, |r| 0.5 * r);
    let pairs = sample_pairs(beta.dim(), radius, 32, 0x5eed);
    let report = check_dissipative(beta, &pairs, 1e-9)?;
    if !report.pass {
        return Err(DriftError::InvalidInput(format!(
            "field declared dissipative fails the spot check: (b(x+h)-b(x),h) = {:e} at x = {:?}, h = {:?}",
            report.max_inner_product, report.witness.x, report.witness.h
        )));
    }
    Ok(())
}

/// `F_α(β) = β ∘ (I - αβ)^{-1}`, evaluated lazily.
pub fn yosida_field(beta: &VectorFieldSpec, alpha: f64) -> Result<VectorFieldSpec, DriftError> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(DriftError::InvalidInput(format!("α must be positive, got {alpha}")));
    }
    spot_check(beta)?;
    Ok(VectorFieldSpec::wrap(
        beta.dim(),
        FieldKind::Yosida {
            inner: Box::new(beta.clone()),
            alpha,
            options: YosidaOptions::default(),
        },
        true,
    ))
}

/// `b_k = F_{1/k}(b ∗ σ_k) - I/k`: smooth, Lipschitz and strongly
/// dissipative with modulus `1/k`.
pub fn regularized_drift(b: &VectorFieldSpec, k: u32) -> Result<VectorFieldSpec, DriftError> {
    if k == 0 {
        return Err(DriftError::InvalidInput("k must be a positive integer".into()));
    }
    let inv_k = 1.0 / k as f64;
    let smoothed = mollify(b, k as f64)?;
    let yosida = yosida_field(&smoothed, inv_k)?;
    Ok(VectorFieldSpec::wrap(
        b.dim(),
        FieldKind::Shifted {
            inner: Box::new(yosida),
            shift: inv_k,
        },
        true,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drift::check_strongly_dissipative;

    fn cubic() -> VectorFieldSpec {
        VectorFieldSpec::polynomial_gradient(1, vec![(0.25, vec![4])])
            .unwrap()
            .with_declared_dissipative(true)
    }

    #[test]
    fn linear_resolve() {
        let b = VectorFieldSpec::linear(vec![vec![-1.0]]).unwrap();
        let y = yosida_resolve(&b, 0.5, &[3.0], 1e-12).unwrap();
        assert!((y[0] - 2.0).abs() < 1e-11);
    }

    #[test]
    fn zero_field_is_identity() {
        let b = VectorFieldSpec::constant(vec![0.0, 0.0]);
        assert_eq!(yosida_resolve(&b, 3.0, &[1.5, -2.0], 1e-10).unwrap(), vec![1.5, -2.0]);
        let f = yosida_field(&b, 3.0).unwrap();
        assert_eq!(f.eval(&[1.5, -2.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn cubic_resolve_and_yosida_value() {
        // root of y + y^3 = 2
        let y = yosida_resolve(&cubic(), 1.0, &[2.0], 1e-12).unwrap();
        assert!((y[0] - 1.0).abs() < 1e-11);
        let f = yosida_field(&cubic(), 1.0).unwrap();
        let v = f.eval(&[2.0]).unwrap()[0];
        assert!((v + 1.0).abs() < 1e-9);
        assert!(v.abs() <= cubic().eval(&[2.0]).unwrap()[0].abs());
    }

    #[test]
    fn linear_yosida_closed_form() {
        let b = VectorFieldSpec::linear(vec![vec![-1.0]]).unwrap();
        for alpha in [0.1, 0.5, 2.0] {
            let f = yosida_field(&b, alpha).unwrap();
            for x in [-2.0, 0.3, 4.0] {
                let v = f.eval(&[x]).unwrap()[0];
                assert!((v + x / (1.0 + alpha)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn two_dimensional_newton_path() {
        // β(y) = -y - y|y|^2 rotated: dissipative, nonlinear.
        let b = VectorFieldSpec::sum(vec![
            VectorFieldSpec::linear(vec![vec![-1.0, -3.0], vec![3.0, -1.0]]).unwrap(),
            VectorFieldSpec::polynomial_gradient(2, vec![(0.25, vec![4, 0]), (0.25, vec![0, 4])])
                .unwrap()
                .with_declared_dissipative(true),
        ])
        .unwrap();
        let x = [4.0, -3.0];
        let y = yosida_resolve(&b, 2.0, &x, 1e-10).unwrap();
        let by = b.eval(&y).unwrap();
        let res = ((y[0] - 2.0 * by[0] - x[0]).powi(2) + (y[1] - 2.0 * by[1] - x[1]).powi(2)).sqrt();
        assert!(res <= 1e-10);
    }

    #[test]
    fn non_dissipative_field_is_rejected() {
        let b = VectorFieldSpec::linear(vec![vec![1.0]]).unwrap();
        assert!(yosida_field(&b, 0.5).is_err());
        let lying = b.with_declared_dissipative(true);
        assert!(matches!(yosida_field(&lying, 0.5), Err(DriftError::InvalidInput(_))));
    }

    #[test]
    fn convergence_failure_carries_residual() {
        // y - α(-sign y) = x has no root for |x| < α.
        let b = VectorFieldSpec::sign(1, 1.0);
        match yosida_resolve(&b, 1.0, &[0.3], 1e-10) {
            Err(DriftError::Convergence { residual, .. }) => assert!(residual > 0.0),
            other => panic!("expected convergence error, got {other:?}"),
        }
    }

    #[test]
    fn regularized_linear_and_zero() {
        let b = VectorFieldSpec::linear(vec![vec![-1.0]]).unwrap();
        let b1 = regularized_drift(&b, 1).unwrap();
        for x in [-1.0, 0.5, 3.0] {
            assert!((b1.eval(&[x]).unwrap()[0] + 1.5 * x).abs() < 1e-9);
        }
        let zero = VectorFieldSpec::constant(vec![0.0]);
        let b2 = regularized_drift(&zero, 2).unwrap();
        assert!((b2.eval(&[3.0]).unwrap()[0] + 1.5).abs() < 1e-12);
    }

    #[test]
    fn regularized_cubic_is_strongly_dissipative() {
        let bk = regularized_drift(&cubic(), 4).unwrap();
        let pairs = sample_pairs(1, 2.0, 100, 21);
        let r = check_strongly_dissipative(&bk, &pairs, 0.25, 1e-8).unwrap();
        assert!(r.pass, "{r:?}");
    }

    #[test]
    fn yosida_converges_as_alpha_shrinks() {
        let beta = cubic();
        let xs: Vec<f64> = (0..=40).map(|k| -2.0 + 0.1 * k as f64).collect();
        let mut prev = f64::INFINITY;
        for alpha in [0.4, 0.2, 0.1, 0.05] {
            let f = yosida_field(&beta, alpha).unwrap();
            let err = xs
                .iter()
                .map(|&x| (f.eval(&[x]).unwrap()[0] - beta.eval(&[x]).unwrap()[0]).abs())
                .fold(0.0, f64::max);
            assert!(err < prev, "α = {alpha}: {err} ≥ {prev}");
            prev = err;
        }
    }
}
