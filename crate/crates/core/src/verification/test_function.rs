use serde::{Deserialize, Serialize};

/// Named test-function families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TestFunction {
    /// `⟨a, x⟩`
    Linear {
        slope: Vec<f64>,
    },
    /// `sin⟨a, x⟩`
    Sine {
        slope: Vec<f64>,
    },
    /// `⟨a, x⟩ ζ(x)` with `ζ = 1` on `|x| ≤ cutoff`, zero beyond
    /// `cutoff + width`, linear in `|x|` between.
    ClippedLinear {
        slope: Vec<f64>,
        cutoff: f64,
        width: f64,
    },
    Constant {
        value: f64,
    },
    /// `|x|²`
    Quadratic,
    /// `(1 - |x - c|²/r²)⁴₊`
    Bump {
        center: Vec<f64>,
        radius: f64,
    },
}

impl TestFunction {
    pub fn linear(slope: Vec<f64>) -> Self {
        Self::Linear { slope }
    }

    pub fn sine(slope: Vec<f64>) -> Self {
        Self::Sine { slope }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Self::Linear { .. } => "linear",
            Self::Sine { .. } => "sine",
            Self::ClippedLinear { .. } => "clipped-linear",
            Self::Constant { .. } => "constant",
            Self::Quadratic => "quadratic",
            Self::Bump { .. } => "bump",
        }
    }

    /// Checks parameter shapes against the dimension.
    pub fn validate(&self, dim: usize) -> Result<(), String> {
        let check_len = |name: &str, v: &[f64]| {
            if v.len() != dim {
                Err(format!(
                    "{} {name} has length {}, expected {dim}",
                    self.label(),
                    v.len()
                ))
            } else if v.iter().any(|c| !c.is_finite()) {
                Err(format!("{} {name} is not finite", self.label()))
            } else {
                Ok(())
            }
        };
        match self {
            Self::Linear { slope } | Self::Sine { slope } => check_len("slope", slope),
            Self::ClippedLinear { slope, cutoff, width } => {
                check_len("slope", slope)?;
                if !(*cutoff >= 0.0 && *width > 0.0) {
                    return Err("clipped-linear needs cutoff ≥ 0 and width > 0".into());
                }
                Ok(())
            }
            Self::Constant { value } if !value.is_finite() => Err("constant is not finite".into()),
            Self::Constant { .. } | Self::Quadratic => Ok(()),
            Self::Bump { center, radius } => {
                check_len("center", center)?;
                if !(*radius > 0.0) {
                    return Err("bump radius must be positive".into());
                }
                Ok(())
            }
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let dot = |a: &[f64]| a.iter().zip(x).map(|(a, x)| a * x).sum::<f64>();
        match self {
            Self::Linear { slope } => dot(slope),
            Self::Sine { slope } => dot(slope).sin(),
            Self::ClippedLinear { slope, cutoff, width } => {
                let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                dot(slope) * ((cutoff + width - r) / width).clamp(0.0, 1.0)
            }
            Self::Constant { value } => *value,
            Self::Quadratic => x.iter().map(|v| v * v).sum(),
            Self::Bump { center, radius } => {
                let s = x.iter().zip(center).map(|(a, c)| (a - c) * (a - c)).sum::<f64>() / (radius * radius);
                if s >= 1.0 {
                    0.0
                } else {
                    (1.0 - s).powi(4)
                }
            }
        }
    }
}
