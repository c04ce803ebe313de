use serde::Serialize;

use super::VerificationError;
use crate::discretization::Grid;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RefinementRow {
    pub h: f64,
    pub value: f64,
    /// `log(v_prev/v)/log(h_prev/h)`; absent on the first row or when a value is zero.
    pub order: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RefinementTable {
    pub rows: Vec<RefinementRow>,
    /// `"n/a, margin positive"` when every value is zero, otherwise the
    /// last observed order.
    pub summary: String,
}

impl RefinementTable {
    pub fn values(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.value).collect()
    }

    /// Successive ratios `v_k / v_{k-1}`.
    pub fn ratios(&self) -> Vec<f64> {
        self.rows.windows(2).map(|w| w[1].value / w[0].value).collect()
    }

    pub fn is_non_increasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].value <= w[0].value)
    }
}

/// Evaluates `measure` on `levels` grids, each halving the spacing of the
/// previous one, starting from `base`. `measure` receives the grid and the
/// level index and returns a nonnegative quantity (a violation, an oracle
/// error, a residual).
pub fn refinement_study<F>(base: &Grid, levels: usize, mut measure: F) -> Result<RefinementTable, VerificationError>
where
    F: FnMut(&Grid, usize) -> Result<f64, VerificationError>,
{
    if levels < 3 {
        return Err(VerificationError::InvalidInput(format!(
            "a refinement study needs at least 3 levels, got {levels}"
        )));
    }
    let mut grid = base.clone();
    let mut rows: Vec<RefinementRow> = Vec::with_capacity(levels);
    for level in 0..levels {
        if level > 0 {
            grid = grid.refined()?;
        }
        let value = measure(&grid, level)?;
        if !(value >= 0.0) {
            return Err(VerificationError::InvalidInput(format!(
                "refinement measure returned {value} at level {level}"
            )));
        }
        let order = rows.last().and_then(|prev| {
            (prev.value > 0.0 && value > 0.0).then(|| (prev.value / value).ln() / (prev.h / grid.spacing()).ln())
        });
        rows.push(RefinementRow {
            h: grid.spacing(),
            value,
            order,
        });
    }
    let summary = if rows.iter().all(|r| r.value == 0.0) {
        "n/a, margin positive".to_string()
    } else {
        match rows.last().and_then(|r| r.order) {
            Some(p) => format!("{p:.3}"),
            None => "n/a".to_string(),
        }
    };
    Ok(RefinementTable { rows, summary })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::{assemble_generator, build_grid, BoundaryCondition, DiffusionSpec};
    use crate::drift::VectorFieldSpec;
    use crate::solver::semigroup_apply;
    use crate::verification::{check_semigroup_gradient_bound, default_tolerance};

    fn ou_generator(grid: &Grid) -> crate::discretization::DiscreteGenerator {
        assemble_generator(
            grid,
            &DiffusionSpec::identity(1),
            &VectorFieldSpec::linear(vec![vec![-1.0]]).unwrap(),
            BoundaryCondition::Reflecting,
        )
        .unwrap()
    }

    #[test]
    fn degenerate_level_count() {
        let g = build_grid(1, 1.0, 5).unwrap();
        assert!(refinement_study(&g, 1, |_, _| Ok(1.0)).is_err());
        assert!(refinement_study(&g, 2, |_, _| Ok(1.0)).is_err());
    }

    #[test]
    fn strict_margin_reports_na() {
        let base = build_grid(1, 4.0, 41).unwrap();
        let table = refinement_study(&base, 3, |g, _| {
            let gen = ou_generator(g);
            let f = g.evaluate(|x| x[0].sin());
            let tol = default_tolerance(g, &f)?;
            Ok(check_semigroup_gradient_bound(&gen, &f, 1.0, 16, tol)?.max_violation)
        })
        .unwrap();
        assert_eq!(table.summary, "n/a, margin positive");
    }

    #[test]
    fn euler_error_halves() {
        // Linear f keeps the spatial error at rounding level, so the error
        // is temporal and n_steps doubles with each level.
        let base = build_grid(1, 6.0, 101).unwrap();
        let table = refinement_study(&base, 3, |g, level| {
            let gen = ou_generator(g);
            let u = semigroup_apply(&gen, 1.0, 16 << level, &g.evaluate(|x| x[0]))?;
            Ok(g.inner_nodes()
                .into_iter()
                .map(|k| (u[k] - (-1f64).exp() * g.point(k)[0]).abs())
                .fold(0.0, f64::max))
        })
        .unwrap();
        for r in table.ratios() {
            assert!((0.4..=0.7).contains(&r), "{:?}", table);
        }
        assert!((table.rows[2].order.unwrap() - 1.0).abs() < 0.2);
    }
}
