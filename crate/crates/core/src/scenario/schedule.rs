use serde::Serialize;

use super::config::{ParabolicConfig, Scenario};
use super::ScenarioError;
use crate::discretization::DiffusionSpec;
use crate::drift::VectorFieldSpec;
use crate::solver::{time_sampler, CoefficientSchedule, SchedulePiece};

#[derive(Debug, Clone, Serialize)]
pub struct ScheduleSummary {
    pub intervals: usize,
    pub sampler_level: Option<u32>,
    /// `sup_t (‖A(t)‖ + ‖A(t)⁻¹‖)` over the frozen pieces.
    pub diffusion_bound: f64,
    /// Per-interval `c` when every frozen drift is `-c·x`.
    pub ou_rates: Option<Vec<f64>>,
}

/// `Some(-c)` when `m = c·I`.
fn scalar_rate(m: &[Vec<f64>]) -> Option<f64> {
    let c = m.first()?.first().copied()?;
    let scalar = m
        .iter()
        .enumerate()
        .all(|(i, r)| r.iter().enumerate().all(|(j, &v)| v == if i == j { c } else { 0.0 }));
    scalar.then_some(-c)
}

fn combine(m0: &[Vec<f64>], m1: &[Vec<f64>], w: f64) -> Vec<Vec<f64>> {
    m0.iter()
        .zip(m1)
        .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + w * y).collect())
        .collect()
}

/// Builds the coefficient schedule: an exact step function on the equal
/// partition, or frozen values on the dyadic sampler partition of `level`.
pub(crate) fn build_schedule(
    s: &Scenario,
    p: &ParabolicConfig,
    level: Option<u32>,
    radius: f64,
) -> Result<(CoefficientSchedule, ScheduleSummary), ScenarioError> {
    let d = s.dimension;
    let base = s.base_dir.as_deref();
    let mut rates: Option<Vec<f64>> = Some(Vec::new());

    let schedule = if let Some(w) = &p.wave {
        let level = level.ok_or_else(|| ScenarioError::Config("parabolic.sampler_level: required".into()))?;
        let breakpoints = time_sampler(level, p.s0)?;
        CoefficientSchedule::from_sampler(breakpoints, |t| {
            let wave = (std::f64::consts::TAU * t).sin();
            let a = DiffusionSpec::new(combine(&w.diffusion, &w.diffusion_wave, wave))?;
            let m = combine(&w.drift, &w.drift_wave, wave);
            let rate = scalar_rate(&m);
            rates = match (rates.take(), rate) {
                (Some(mut v), Some(c)) => {
                    v.push(c);
                    Some(v)
                }
                _ => None,
            };
            let b = VectorFieldSpec::linear(m)?;
            Ok((a, b))
        })?
    } else {
        let m = p.pieces.len();
        let mut frozen = Vec::with_capacity(m);
        for (i, piece) in p.pieces.iter().enumerate() {
            let a = match &piece.diffusion {
                Some(rows) => DiffusionSpec::new(rows.clone())
                    .map_err(|e| ScenarioError::Config(format!("parabolic.pieces[{i}].diffusion: {e}")))?,
                None => s.diffusion_spec()?,
            };
            let b = piece.drift.build(d, base)?;
            let rate = piece.drift.linear_matrix().and_then(scalar_rate);
            frozen.push((a, b, rate));
        }
        let piece_at = |t: f64| ((t * m as f64).floor() as usize).min(m - 1);
        match level {
            Some(level) => {
                let breakpoints = time_sampler(level, p.s0)?;
                CoefficientSchedule::from_sampler(breakpoints, |t| {
                    let (a, b, rate) = &frozen[piece_at(t)];
                    rates = match (rates.take(), rate) {
                        (Some(mut v), Some(c)) => {
                            v.push(*c);
                            Some(v)
                        }
                        _ => None,
                    };
                    Ok((a.clone(), b.clone()))
                })?
            }
            None => {
                let breakpoints: Vec<f64> = (0..=m).map(|k| k as f64 / m as f64).collect();
                rates = frozen.iter().map(|f| f.2).collect();
                CoefficientSchedule::new(
                    breakpoints,
                    frozen
                        .into_iter()
                        .map(|(diffusion, drift, _)| SchedulePiece { diffusion, drift })
                        .collect(),
                )?
            }
        }
    };

    let checks = schedule.check_drifts(
        radius,
        s.checks.dissipativity_samples,
        s.seed,
        s.tolerances.dissipativity,
    )?;
    if let Some((k, c)) = checks.iter().enumerate().find(|(_, c)| !c.pass) {
        return Err(ScenarioError::Hypothesis(format!(
            "parabolic drift on interval {k} failed the dissipativity sample: (b(x+h) - b(x), h) = {:e}",
            c.max_inner_product
        )));
    }
    let summary = ScheduleSummary {
        intervals: schedule.pieces().len(),
        sampler_level: level,
        diffusion_bound: schedule.diffusion_bound(),
        ou_rates: rates,
    };
    Ok((schedule, summary))
}
