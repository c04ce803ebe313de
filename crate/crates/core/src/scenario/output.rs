use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use super::run::VerificationReport;
use super::ScenarioError;

/// Writes `summary.json`, one `margins_<id>.csv` per bound check,
/// `density.csv` when a stationary density was computed, and
/// `trajectory_<f>.csv` per parabolic solve. Returns the written paths.
pub fn write_outputs(report: &VerificationReport, dir: &Path) -> Result<Vec<PathBuf>, ScenarioError> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();

    let path = dir.join("summary.json");
    let json = serde_json::to_string_pretty(report).map_err(|e| ScenarioError::Io(e.to_string()))?;
    fs::write(&path, json + "\n")?;
    written.push(path);

    for (_, check) in report.checks() {
        let path = dir.join(format!("margins_{}.csv", check.id));
        check.report.write_csv(BufWriter::new(File::create(&path)?))?;
        written.push(path);
    }

    if let Some(inv) = report.variants.iter().find_map(|v| v.invariant_measure.as_ref()) {
        let path = dir.join("density.csv");
        inv.density
            .write_csv(BufWriter::new(File::create(&path)?), inv.reference.as_deref())?;
        written.push(path);
    }

    if let Some(p) = &report.parabolic {
        for (name, trajectory) in &p.trajectories {
            let path = dir.join(format!("trajectory_{name}.csv"));
            let grid = report_grid(report)?;
            trajectory.write_csv(&grid, BufWriter::new(File::create(&path)?))?;
            written.push(path);
        }
    }
    Ok(written)
}

fn report_grid(report: &VerificationReport) -> Result<crate::discretization::Grid, ScenarioError> {
    Ok(crate::discretization::build_grid(
        report.grid.dimension,
        report.grid.radius,
        report.grid.points,
    )?)
}
