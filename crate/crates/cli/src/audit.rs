//! Post-hoc audit of a run directory.
//!
//! Every snapshot is reloaded, its balance quantities are re-evaluated and
//! compared with the matching trajectory row, and both residual series are
//! recomputed from the trajectory and port columns.

use std::path::Path;

use iphs_core::constitutive::ThermoState;
use iphs_core::dynamics::{AuditPoint, IphsSystem};
use iphs_core::mesh::{MimeticGrid, ScalarField};
use serde::{Deserialize, Serialize};

use crate::scenario::Scenario;
use crate::{column, read_file, read_numeric_csv, write_file, CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditOutcome {
    pub snapshots_checked: usize,
    /// Largest relative mismatch between snapshot re-evaluation and trajectory rows.
    pub max_snapshot_mismatch: f64,
    /// Largest difference between stored and recomputed residual columns.
    pub max_residual_mismatch: f64,
    pub max_first_law_residual: f64,
    pub max_second_law_residual: f64,
    /// Residuals over snapshot times only, from the reloaded states.
    pub snapshot_first_law_residual: f64,
    pub snapshot_second_law_residual: f64,
    pub consistent: bool,
}

/// Relative tolerance for agreement between stored and recomputed values.
const AGREEMENT: f64 = 1e-12;

pub fn load_field(grid: &MimeticGrid, path: &Path) -> Result<ScalarField> {
    let (_, rows) = read_numeric_csv(path)?;
    let mut field = grid.zero_scalar();
    if rows.len() != grid.cell_count() {
        return Err(CliError::Parse(format!("{}: {} rows for {} cells", path.display(), rows.len(), grid.cell_count())));
    }
    for row in rows {
        let (i, j, v) = match row.as_slice() {
            [i, v] => (*i, 0.0, *v),
            [i, j, v] => (*i, *j, *v),
            _ => return Err(CliError::Parse(format!("{}: unexpected column count", path.display()))),
        };
        let cell = grid.cell_index(i as usize, j as usize);
        field.0[cell] = v;
    }
    Ok(field)
}

pub fn load_snapshot(system: &IphsSystem, dir: &Path, step: usize, time: f64) -> Result<ThermoState> {
    let snap = dir.join("snapshots");
    let entropy = load_field(&system.grid, &snap.join(format!("step_{step:06}_s.csv")))?;
    let concentrations = (0..system.n_species())
        .map(|i| load_field(&system.grid, &snap.join(format!("step_{step:06}_c{i}.csv"))))
        .collect::<Result<_>>()?;
    Ok(ThermoState::new(concentrations, entropy, time)?)
}

/// Snapshot `(step, time)` pairs listed in the run's index.
pub fn snapshot_index(dir: &Path) -> Result<Vec<(usize, f64)>> {
    let path = dir.join("snapshots").join("index.csv");
    let (_, rows) = read_numeric_csv(&path)?;
    Ok(rows.iter().map(|r| (r[0] as usize, r[1])).collect())
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

fn trapezoid_residual(time: &[f64], value: &[f64], rate: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(time.len());
    let mut integral = 0.0;
    for k in 0..time.len() {
        if k > 0 {
            integral += 0.5 * (time[k] - time[k - 1]) * (rate[k - 1] + rate[k]);
        }
        out.push(value[k] - value[0] - integral);
    }
    out
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn audit(dir: &Path) -> Result<AuditOutcome> {
    let scenario = Scenario::from_json(&read_file(&dir.join("scenario.json"))?)?;
    let (system, _, _) = scenario.build()?;

    let traj_path = dir.join("trajectory.csv");
    let (header, rows) = read_numeric_csv(&traj_path)?;
    let col = |name| column(&header, &rows, name, &traj_path);
    let (time, energy, entropy, power, production) =
        (col("time")?, col("H")?, col("S")?, col("boundary_power")?, col("entropy_production")?);
    let (stored_first, stored_second) = (col("first_law_residual")?, col("second_law_residual")?);

    let ports_path = dir.join("ports.csv");
    let (p_header, p_rows) = read_numeric_csv(&ports_path)?;
    let entropy_flow = column(&p_header, &p_rows, "entropy_flow", &ports_path)?;
    if entropy_flow.len() != time.len() {
        return Err(CliError::Parse(format!(
            "{} has {} rows, trajectory has {}",
            ports_path.display(),
            entropy_flow.len(),
            time.len()
        )));
    }

    let first = trapezoid_residual(&time, &energy, &power);
    let entropy_rate: Vec<f64> = production.iter().zip(&entropy_flow).map(|(a, b)| a + b).collect();
    let second = trapezoid_residual(&time, &entropy, &entropy_rate);
    let residual_mismatch = first
        .iter()
        .zip(&stored_first)
        .chain(second.iter().zip(&stored_second))
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));

    let mut snapshot_mismatch: f64 = 0.0;
    let mut points: Vec<AuditPoint> = Vec::new();
    let index = snapshot_index(dir)?;
    for &(step, t) in &index {
        let state = load_snapshot(&system, dir, step, t)?;
        let ev = system.evaluate(&state)?;
        let p = system.audit_point(&state, &ev)?;
        let row = step;
        if row >= time.len() {
            return Err(CliError::Parse(format!("snapshot step {step} has no trajectory row")));
        }
        for (a, b) in [(p.energy, energy[row]), (p.entropy, entropy[row]), (p.boundary_power, power[row]), (
            p.entropy_production,
            production[row],
        )] {
            snapshot_mismatch = snapshot_mismatch.max(rel(a, b));
        }
        points.push(p);
    }
    let ts: Vec<f64> = points.iter().map(|p| p.time).collect();
    let snap_first = trapezoid_residual(
        &ts,
        &points.iter().map(|p| p.energy).collect::<Vec<_>>(),
        &points.iter().map(|p| p.boundary_power).collect::<Vec<_>>(),
    );
    let snap_second = trapezoid_residual(
        &ts,
        &points.iter().map(|p| p.entropy).collect::<Vec<_>>(),
        &points.iter().map(|p| p.entropy_production + p.entropy_boundary).collect::<Vec<_>>(),
    );

    let outcome = AuditOutcome {
        snapshots_checked: index.len(),
        max_snapshot_mismatch: snapshot_mismatch,
        max_residual_mismatch: residual_mismatch,
        max_first_law_residual: max_abs(&first),
        max_second_law_residual: max_abs(&second),
        snapshot_first_law_residual: max_abs(&snap_first),
        snapshot_second_law_residual: max_abs(&snap_second),
        consistent: snapshot_mismatch <= AGREEMENT && residual_mismatch <= AGREEMENT * max_abs(&energy).max(1.0),
    };
    write_file(&dir.join("audit.json"), serde_json::to_string_pretty(&outcome).expect("audit serializes"))?;
    Ok(outcome)
}
