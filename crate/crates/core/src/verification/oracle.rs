//! Closed forms for the Ornstein–Uhlenbeck operator `Δ - x·∇` in any
//! dimension: `T_t f(x) = E f(e^{-t}x + √(1 - e^{-2t}) Z)` with `Z`
//! standard Gaussian.

use serde::Serialize;

use super::{TestFunction, VerificationError};
use crate::quadrature::integrate;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "oracle", rename_all = "kebab-case")]
pub enum OracleSpec {
    /// `T_t f`; `t = ∞` gives the stationary mean.
    Semigroup { t: f64, f: TestFunction },
    /// `G_λ f = ∫ e^{-λt} T_t f dt`.
    Resolvent { lambda: f64, f: TestFunction },
    /// `(2π)^{-d/2} e^{-|x|²/2}`.
    StationaryDensity { dim: usize },
    /// `u(t)` for `A = 1` and drift `-c_k x` on `[t_{k-1}, t_k)`, linear `f`.
    ScheduledLinear {
        breakpoints: Vec<f64>,
        rates: Vec<f64>,
        t: f64,
        slope: Vec<f64>,
    },
}

fn unsupported(what: &str, f: &TestFunction) -> VerificationError {
    VerificationError::InvalidInput(format!("no closed form for {what} of a {} function", f.label()))
}

fn dot(a: &[f64], x: &[f64]) -> f64 {
    a.iter().zip(x).map(|(a, x)| a * x).sum()
}

fn norm2(a: &[f64]) -> f64 {
    a.iter().map(|v| v * v).sum()
}

fn check_slope(slope: &[f64], x: &[f64]) -> Result<(), VerificationError> {
    if slope.len() != x.len() {
        return Err(VerificationError::InvalidInput(format!(
            "slope has length {}, point has {}",
            slope.len(),
            x.len()
        )));
    }
    Ok(())
}

fn semigroup(t: f64, f: &TestFunction, x: &[f64]) -> Result<f64, VerificationError> {
    let decay = (-t).exp();
    let variance = if t.is_infinite() { 1.0 } else { -(-2.0 * t).exp_m1() };
    match f {
        TestFunction::Constant { value } => Ok(*value),
        TestFunction::Linear { slope } => {
            check_slope(slope, x)?;
            Ok(decay * dot(slope, x))
        }
        TestFunction::Sine { slope } => {
            check_slope(slope, x)?;
            Ok((decay * dot(slope, x)).sin() * (-0.5 * variance * norm2(slope)).exp())
        }
        TestFunction::Quadratic => Ok(decay * decay * norm2(x) + x.len() as f64 * variance),
        other => Err(unsupported("the semigroup", other)),
    }
}

fn resolvent(lambda: f64, f: &TestFunction, x: &[f64]) -> Result<f64, VerificationError> {
    match f {
        TestFunction::Constant { value } => Ok(value / lambda),
        TestFunction::Linear { slope } => {
            check_slope(slope, x)?;
            Ok(dot(slope, x) / (lambda + 1.0))
        }
        TestFunction::Quadratic => {
            let d = x.len() as f64;
            Ok(norm2(x) / (lambda + 2.0) + d * (1.0 / lambda - 1.0 / (lambda + 2.0)))
        }
        TestFunction::Sine { slope } => {
            check_slope(slope, x)?;
            // s = e^{-t}: ∫₀¹ s^{λ-1} sin(s⟨a,x⟩) e^{-|a|²(1-s²)/2} ds. For λ < 1
            // the substitution s = v^{1/λ} removes the endpoint singularity.
            let y = dot(slope, x);
            let a2 = norm2(slope);
            let g = |s: f64| (s * y).sin() * (-0.5 * a2 * (1.0 - s * s)).exp();
            Ok(if lambda < 1.0 {
                integrate(|v| g(v.powf(1.0 / lambda)) / lambda, 0.0, 1.0, 256, 16)
            } else {
                integrate(|s| s.powf(lambda - 1.0) * g(s), 0.0, 1.0, 256, 16)
            })
        }
        other => Err(unsupported("the resolvent", other)),
    }
}

pub fn ou_stationary_density(x: &[f64]) -> f64 {
    let d = x.len() as f64;
    (2.0 * std::f64::consts::PI).powf(-0.5 * d) * (-0.5 * norm2(x)).exp()
}

/// Evaluates the closed form selected by `spec` at each point.
pub fn ou_oracle(spec: &OracleSpec, points: &[Vec<f64>]) -> Result<Vec<f64>, VerificationError> {
    match spec {
        OracleSpec::Semigroup { t, f } => {
            if !(*t > 0.0) {
                return Err(VerificationError::InvalidInput(format!("t must be positive, got {t}")));
            }
            points.iter().map(|x| semigroup(*t, f, x)).collect()
        }
        OracleSpec::Resolvent { lambda, f } => {
            if !(lambda.is_finite() && *lambda > 0.0) {
                return Err(VerificationError::InvalidInput(format!(
                    "λ must be positive, got {lambda}"
                )));
            }
            points.iter().map(|x| resolvent(*lambda, f, x)).collect()
        }
        OracleSpec::StationaryDensity { dim } => {
            if let Some(x) = points.iter().find(|x| x.len() != *dim) {
                return Err(VerificationError::InvalidInput(format!(
                    "point of length {} for dimension {dim}",
                    x.len()
                )));
            }
            Ok(points.iter().map(|x| ou_stationary_density(x)).collect())
        }
        OracleSpec::ScheduledLinear {
            breakpoints,
            rates,
            t,
            slope,
        } => {
            if breakpoints.len() != rates.len() + 1 || !(*t >= 0.0 && *t <= 1.0) {
                return Err(VerificationError::InvalidInput(
                    "scheduled oracle needs one rate per interval and t in [0, 1]".into(),
                ));
            }
            let exponent: f64 = breakpoints
                .windows(2)
                .zip(rates)
                .map(|(w, c)| c * (w[1].min(*t) - w[0]).max(0.0))
                .sum();
            points
                .iter()
                .map(|x| {
                    check_slope(slope, x)?;
                    Ok((-exponent).exp() * dot(slope, x))
                })
                .collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one(spec: OracleSpec, x: &[f64]) -> f64 {
        ou_oracle(&spec, &[x.to_vec()]).unwrap()[0]
    }

    #[test]
    fn linear_semigroup_at_log_two() {
        let v = one(
            OracleSpec::Semigroup {
                t: 2f64.ln(),
                f: TestFunction::linear(vec![1.0]),
            },
            &[3.0],
        );
        assert!((v - 1.5).abs() < 1e-15);
    }

    #[test]
    fn stationary_variance() {
        let v = one(
            OracleSpec::Semigroup {
                t: f64::INFINITY,
                f: TestFunction::Quadratic,
            },
            &[7.0],
        );
        assert_eq!(v, 1.0);
    }

    #[test]
    fn constants() {
        let c = TestFunction::Constant { value: 1.0 };
        assert_eq!(one(OracleSpec::Semigroup { t: 0.3, f: c.clone() }, &[2.0]), 1.0);
        assert_eq!(one(OracleSpec::Resolvent { lambda: 4.0, f: c }, &[2.0]), 0.25);
    }

    #[test]
    fn resolvent_is_laplace_transform_of_semigroup() {
        // Independent route: integrate the semigroup closed form in time.
        for f in [
            TestFunction::sine(vec![1.3]),
            TestFunction::Quadratic,
            TestFunction::linear(vec![0.7]),
        ] {
            for lambda in [0.5, 1.0, 4.0] {
                let x = [0.8];
                let direct = one(OracleSpec::Resolvent { lambda, f: f.clone() }, &x);
                let laplace = integrate(
                    |t| (-lambda * t).exp() * semigroup(t.max(1e-300), &f, &x).unwrap(),
                    0.0,
                    60.0,
                    600,
                    16,
                );
                assert!((direct - laplace).abs() < 1e-9, "{direct} vs {laplace}");
            }
        }
    }

    #[test]
    fn two_rate_schedule() {
        let v = one(
            OracleSpec::ScheduledLinear {
                breakpoints: vec![0.0, 0.5, 1.0],
                rates: vec![1.0, 2.0],
                t: 1.0,
                slope: vec![1.0],
            },
            &[1.0],
        );
        assert!((v - (-1.5f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn rejects_unsupported() {
        let bump = TestFunction::Bump {
            center: vec![0.0],
            radius: 1.0,
        };
        assert!(ou_oracle(&OracleSpec::Semigroup { t: 1.0, f: bump }, &[vec![0.0]]).is_err());
        assert!(ou_oracle(
            &OracleSpec::Resolvent {
                lambda: 0.0,
                f: TestFunction::Quadratic
            },
            &[vec![0.0]]
        )
        .is_err());
    }
}
