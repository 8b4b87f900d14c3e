//! Scenario execution and on-disk artifacts.
//!
//! A run directory holds `scenario.json` (the resolved scenario),
//! `trajectory.csv`, `ports.csv`, `snapshots/` with one CSV per field and
//! snapshot plus `snapshots/index.csv`, and `summary.json`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use iphs_core::constitutive::ThermoState;
use iphs_core::dynamics::{audit_first_law, audit_second_law, simulate, IphsSystem, PortRecord, Trajectory};
use serde::{Deserialize, Serialize};

use crate::scenario::{Scenario, SchemeSpec};
use crate::{write_file, CliError, Result};

pub const TRAJECTORY_HEADER: &str =
    "time,H,S,boundary_power,entropy_production,first_law_residual,second_law_residual,min_sigma";

/// Command-line overrides of scenario fields.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub dt: Option<f64>,
    pub t_end: Option<f64>,
    pub scheme: Option<SchemeSpec>,
    pub out: Option<PathBuf>,
}

impl Overrides {
    pub fn apply(&self, scenario: &mut Scenario) {
        if let Some(dt) = self.dt {
            scenario.integrator.dt = dt;
        }
        if let Some(t) = self.t_end {
            scenario.integrator.t_end = t;
        }
        if let Some(s) = self.scheme {
            scenario.integrator.scheme = s;
        }
        if let Some(out) = &self.out {
            scenario.output.directory = Some(out.display().to_string());
        }
    }
}

/// Run directory: the scenario's directory (or `runs/<name>`), joined onto
/// `root` when relative.
pub fn output_dir(scenario: &Scenario, root: Option<&Path>) -> PathBuf {
    let dir = match &scenario.output.directory {
        Some(d) => PathBuf::from(d),
        None => Path::new("runs").join(&scenario.name),
    };
    match root {
        Some(r) if dir.is_relative() => r.join(dir),
        _ => dir,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub scenario: String,
    /// `completed` or `failed`.
    pub status: String,
    pub error: Option<String>,
    pub steps: usize,
    pub final_time: f64,
    pub max_first_law_residual: f64,
    pub max_second_law_residual: f64,
    pub min_sigma: f64,
    /// Most negative step-to-step change of `S`.
    pub largest_entropy_decrease: f64,
    pub entropy_nondecreasing: bool,
    /// Largest relative drift of species totals.
    pub max_species_drift: f64,
    pub checks: BTreeMap<String, Check>,
    pub passed: bool,
}

/// Everything a run produced, kept in memory for callers that need more
/// than the files.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub summary: RunSummary,
    pub trajectory: Trajectory,
    pub ports: Vec<PortRecord>,
    pub final_state: ThermoState,
}

struct Snapshots<'a> {
    dir: PathBuf,
    system: &'a IphsSystem,
    index: String,
}

impl Snapshots<'_> {
    fn write(&mut self, step: usize, state: &ThermoState) -> Result<()> {
        let grid = &self.system.grid;
        let stem = format!("step_{step:06}");
        let coe = self.system.model.co_energy(state)?;
        let mut fields = vec![("s".to_string(), &state.entropy), ("T".to_string(), &coe.temperature)];
        for (i, c) in state.concentrations.iter().enumerate() {
            fields.push((format!("c{i}"), c));
        }
        for (i, m) in coe.potentials.iter().enumerate() {
            fields.push((format!("mu{i}"), m));
        }
        for (name, field) in fields {
            write_file(&self.dir.join(format!("{stem}_{name}.csv")), grid.field_csv(field)?)?;
        }
        let _ = writeln!(self.index, "{step},{:e}", state.time);
        Ok(())
    }
}

fn ports_csv(records: &[PortRecord], grid: &iphs_core::mesh::MimeticGrid) -> Result<String> {
    let width = records.first().map_or(0, |r| r.v.len());
    let mut s = String::from("time,energy_power,entropy_flow");
    for k in 0..width {
        let _ = write!(s, ",v{k}");
    }
    for k in 0..width {
        let _ = write!(s, ",y{k}");
    }
    s.push('\n');
    for r in records {
        let _ = write!(s, "{:e},{:e},{:e}", r.time, r.nd_pairs.energy_power(grid)?, r.nd_pairs.entropy_flow(grid)?);
        for v in r.v.iter().chain(&r.y) {
            let _ = write!(s, ",{v:e}");
        }
        s.push('\n');
    }
    Ok(s)
}

pub fn trajectory_csv(trajectory: &Trajectory) -> String {
    let mut s = String::from(TRAJECTORY_HEADER);
    s.push('\n');
    for r in trajectory.reports() {
        let _ = writeln!(
            s,
            "{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
            r.time,
            r.energy,
            r.entropy,
            r.boundary_power,
            r.entropy_production,
            r.first_law_residual,
            r.second_law_residual,
            r.min_sigma
        );
    }
    s
}

fn summarize(scenario: &Scenario, trajectory: &Trajectory, error: Option<String>) -> RunSummary {
    let tol = &scenario.tolerances;
    let first = audit_first_law(trajectory);
    let second = audit_second_law(trajectory);
    let mut drift: f64 = 0.0;
    if let Some(p0) = trajectory.points.first() {
        for p in &trajectory.points {
            for (a, b) in p.species_totals.iter().zip(&p0.species_totals) {
                drift = drift.max((a - b).abs() / b.abs().max(f64::MIN_POSITIVE));
            }
        }
    }
    let mut checks = BTreeMap::new();
    let mut check = |name: &str, value: f64, threshold: f64, passed: bool| {
        checks.insert(name.to_string(), Check { value, threshold, passed });
    };
    check("first_law", first.max_abs, tol.first_law, first.max_abs <= tol.first_law);
    check("second_law", second.residual.max_abs, tol.second_law, second.residual.max_abs <= tol.second_law);
    check("min_sigma", second.min_sigma, tol.min_sigma, second.min_sigma >= tol.min_sigma);
    if scenario.is_insulated() {
        check(
            "entropy_nondecreasing",
            second.largest_decrease,
            -tol.entropy_decrease,
            second.entropy_nondecreasing(tol.entropy_decrease),
        );
    }
    if scenario.species_closed() && scenario.n_species() > 0 {
        check("species_conservation", drift, tol.species_drift, drift <= tol.species_drift);
    }
    let completed = error.is_none();
    let passed = completed && checks.values().all(|c| c.passed);
    RunSummary {
        scenario: scenario.name.clone(),
        status: if completed { "completed" } else { "failed" }.into(),
        error,
        steps: trajectory.points.len().saturating_sub(1),
        final_time: trajectory.points.last().map_or(0.0, |p| p.time),
        max_first_law_residual: first.max_abs,
        max_second_law_residual: second.residual.max_abs,
        min_sigma: second.min_sigma,
        largest_entropy_decrease: second.largest_decrease,
        entropy_nondecreasing: second.entropy_nondecreasing(tol.entropy_decrease),
        max_species_drift: drift,
        checks,
        passed,
    }
}

/// Runs `scenario` and writes all artifacts into `dir`.
pub fn run(scenario: &Scenario, dir: &Path) -> Result<RunOutcome> {
    let (system, initial, integrator) = scenario.build()?;
    let snap_dir = dir.join("snapshots");
    std::fs::create_dir_all(&snap_dir).map_err(|e| CliError::io(&snap_dir, e))?;
    write_file(&dir.join("scenario.json"), scenario.to_json())?;

    let mut snaps = Snapshots { dir: snap_dir.clone(), system: &system, index: String::from("step,time\n") };
    snaps.write(0, &initial)?;
    let (_, first_ports) = system.observe(&initial)?;
    let mut ports = vec![first_ports];
    let steps = integrator.steps();
    let every = scenario.output.snapshot_every;
    let mut snapshot_error = None;
    let result = simulate(&system, initial, &integrator, |k, out| {
        ports.push(out.ports.clone());
        let due = (every > 0 && k % every == 0) || k == steps;
        if due && snapshot_error.is_none() {
            snapshot_error = snaps.write(k, &out.state).err();
        }
    });
    if let Some(e) = snapshot_error {
        return Err(e);
    }
    let (final_state, trajectory, error) = match result {
        Ok((state, traj)) => (Some(state), traj, None),
        Err((traj, e)) => (None, traj, Some(e)),
    };
    write_file(&snap_dir.join("index.csv"), &snaps.index)?;
    write_file(&dir.join("trajectory.csv"), trajectory_csv(&trajectory))?;
    write_file(&dir.join("ports.csv"), ports_csv(&ports, &system.grid)?)?;
    let summary = summarize(scenario, &trajectory, error.as_ref().map(|e| e.to_string()));
    write_file(&dir.join("summary.json"), serde_json::to_string_pretty(&summary).expect("summary serializes"))?;
    match (final_state, error) {
        (Some(final_state), None) => Ok(RunOutcome { dir: dir.to_path_buf(), summary, trajectory, ports, final_state }),
        (_, Some(e)) => {
            let time = trajectory.points.last().map_or(0.0, |p| p.time);
            log::error!("run `{}` failed at t = {time}: {e}", scenario.name);
            Err(CliError::RunFailed { time, dir: dir.to_path_buf(), source: e })
        }
        (None, None) => unreachable!("simulate returns a state or an error"),
    }
}
