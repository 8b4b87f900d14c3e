//! Scenario files: JSON description of grid, material, initial fields,
//! boundary conditions, integrator, outputs and pass/fail tolerances.

use std::collections::BTreeMap;
use std::path::Path;

use iphs_core::constitutive::{ConstitutiveModel, SpeciesParameters, ThermoState};
use iphs_core::dynamics::{BoundaryConditions, GroupBc, IphsSystem, Scheme, Signal, SpeciesBc, ThermalBc, TimeIntegrator};
use iphs_core::mesh::{MimeticGrid, ScalarField};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    pub grid: GridSpec,
    pub model: ModelSpec,
    pub initial: InitialSpec,
    /// Conditions per boundary group (`x_min`, `x_max`, `y_min`, `y_max`).
    pub boundary: BTreeMap<String, GroupSpec>,
    pub integrator: IntegratorSpec,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default)]
    pub tolerances: Tolerances,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    /// Cells per axis; the length sets the dimension.
    pub cells: Vec<usize>,
    /// `[low, high]` per axis.
    pub bounds: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub c_v: f64,
    pub t_ref: f64,
    pub lambda: f64,
    #[serde(default)]
    pub species: Vec<SpeciesSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeciesSpec {
    pub alpha: f64,
    pub diffusivity: f64,
}

/// Initial temperature and concentration profiles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSpec {
    pub temperature: Profile,
    #[serde(default)]
    pub concentrations: Vec<Profile>,
}

/// Named spatial profiles evaluated at cell centers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Profile {
    Uniform { value: f64 },
    /// `base + amplitude exp(-|x - center|^2 / width^2)`.
    GaussianBump { base: f64, amplitude: f64, center: Vec<f64>, width: f64 },
    /// `low` below `position` along `axis`, `high` above.
    Step { low: f64, high: f64, axis: usize, position: f64 },
    /// `base + amplitude * U(-1, 1)` per cell, drawn from the scenario seed.
    Random { base: f64, amplitude: f64 },
}

/// Constant value or piecewise-linear `[[t, value], ...]` table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SignalSpec {
    Constant(f64),
    Table(Vec<(f64, f64)>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ThermalSpec {
    DirichletTemperature { value: SignalSpec },
    /// Incoming heat flux.
    HeatFlux { value: SignalSpec },
    ZeroFlux,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SpeciesBcSpec {
    DirichletPotential { value: SignalSpec },
    ZeroFlux,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupSpec {
    pub thermal: ThermalSpec,
    /// One entry per species; omitted entries default to zero flux.
    #[serde(default)]
    pub species: Vec<SpeciesBcSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeSpec {
    ImplicitMidpoint,
    ExplicitRk4,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSpec {
    #[serde(default = "default_scheme")]
    pub scheme: SchemeSpec,
    pub dt: f64,
    pub t_end: f64,
    #[serde(default = "default_newton_tol")]
    pub newton_tol: f64,
    #[serde(default = "default_newton_iters")]
    pub max_newton_iters: usize,
}

fn default_scheme() -> SchemeSpec {
    SchemeSpec::ImplicitMidpoint
}

fn default_newton_tol() -> f64 {
    1e-12
}

fn default_newton_iters() -> usize {
    50
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    /// Field snapshots every this many steps (0 disables all but the first and last).
    #[serde(default = "default_snapshot_every")]
    pub snapshot_every: usize,
    /// Run directory; relative paths are resolved against the output root.
    #[serde(default)]
    pub directory: Option<String>,
}

fn default_snapshot_every() -> usize {
    10
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec { snapshot_every: default_snapshot_every(), directory: None }
    }
}

/// Pass/fail thresholds applied to a finished run.
///
/// | field              | default  | check                                            |
/// |--------------------|----------|--------------------------------------------------|
/// | `first_law`        | `1e-8`   | max abs first-law residual                       |
/// | `second_law`       | `1e-8`   | max abs entropy-balance residual                 |
/// | `min_sigma`        | `-1e-14` | smallest pointwise production at audited stages  |
/// | `entropy_decrease` | `1e-12`  | allowed drop of `S` per step on insulated runs   |
/// | `species_drift`    | `1e-12`  | relative drift of species totals on closed walls |
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub first_law: f64,
    pub second_law: f64,
    pub min_sigma: f64,
    pub entropy_decrease: f64,
    pub species_drift: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { first_law: 1e-8, second_law: 1e-8, min_sigma: -1e-14, entropy_decrease: 1e-12, species_drift: 1e-12 }
    }
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| CliError::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            CliError::Parse(msg) => CliError::Parse(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn n_species(&self) -> usize {
        self.model.species.len()
    }

    pub fn grid(&self) -> Result<MimeticGrid> {
        if self.grid.cells.len() != self.grid.bounds.len() {
            return Err(CliError::Validation(format!(
                "grid lists {} cell counts but {} bounds",
                self.grid.cells.len(),
                self.grid.bounds.len()
            )));
        }
        Ok(MimeticGrid::new(&self.grid.cells, &self.grid.bounds)?)
    }

    pub fn model(&self) -> Result<ConstitutiveModel> {
        let species = self
            .model
            .species
            .iter()
            .map(|s| SpeciesParameters { alpha: s.alpha, diffusivity: s.diffusivity })
            .collect();
        Ok(ConstitutiveModel::new(self.model.c_v, self.model.t_ref, self.model.lambda, species)?)
    }

    pub fn integrator(&self) -> Result<TimeIntegrator> {
        let i = &self.integrator;
        let integ = TimeIntegrator {
            scheme: match i.scheme {
                SchemeSpec::ImplicitMidpoint => Scheme::ImplicitMidpoint,
                SchemeSpec::ExplicitRk4 => Scheme::ExplicitRk4,
            },
            dt: i.dt,
            t_end: i.t_end,
            newton_tol: i.newton_tol,
            max_newton_iters: i.max_newton_iters,
        };
        integ.validate()?;
        Ok(integ)
    }

    pub fn boundary_conditions(&self, grid: &MimeticGrid) -> Result<BoundaryConditions> {
        let n = self.n_species();
        for group in grid.boundary_groups() {
            if !self.boundary.contains_key(group.name) {
                return Err(CliError::Validation(format!("boundary group `{}` has no condition", group.name)));
            }
        }
        let mut groups = Vec::new();
        for group in grid.boundary_groups() {
            let spec = &self.boundary[group.name];
            if spec.species.len() > n {
                return Err(CliError::Validation(format!(
                    "boundary group `{}` lists {} species conditions but the model has {n} species",
                    group.name,
                    spec.species.len()
                )));
            }
            let thermal = match &spec.thermal {
                ThermalSpec::DirichletTemperature { value } => ThermalBc::DirichletTemperature(signal(value, group.name)?),
                ThermalSpec::HeatFlux { value } => ThermalBc::HeatFlux(signal(value, group.name)?),
                ThermalSpec::ZeroFlux => ThermalBc::ZeroFlux,
            };
            let mut species = vec![SpeciesBc::ZeroFlux; n];
            for (slot, s) in species.iter_mut().zip(&spec.species) {
                if let SpeciesBcSpec::DirichletPotential { value } = s {
                    *slot = SpeciesBc::DirichletPotential(signal(value, group.name)?);
                }
            }
            groups.push((group.name.to_string(), GroupBc { thermal, species }));
        }
        for name in self.boundary.keys() {
            if grid.boundary_group(name).is_none() {
                return Err(CliError::Validation(format!("unknown boundary group `{name}` for a {}D grid", grid.dim())));
            }
        }
        Ok(BoundaryConditions { groups })
    }

    pub fn initial_state(&self, grid: &MimeticGrid, model: &ConstitutiveModel) -> Result<ThermoState> {
        let n = self.n_species();
        if self.initial.concentrations.len() != n {
            return Err(CliError::Validation(format!(
                "initial conditions list {} concentration profiles for {n} species",
                self.initial.concentrations.len()
            )));
        }
        let temperature = self.sample(&self.initial.temperature, grid, 0)?;
        let mut entropy = Vec::with_capacity(temperature.len());
        for (cell, &t) in temperature.0.iter().enumerate() {
            entropy.push(model.entropy_for_temperature(t).map_err(|_| {
                CliError::Validation(format!("initial temperature {t} in cell {cell} is not positive"))
            })?);
        }
        let concentrations =
            self.initial.concentrations.iter().enumerate().map(|(i, p)| self.sample(p, grid, i as u64 + 1)).collect::<Result<_>>()?;
        Ok(ThermoState::new(concentrations, ScalarField(entropy), 0.0)?)
    }

    fn sample(&self, profile: &Profile, grid: &MimeticGrid, stream: u64) -> Result<ScalarField> {
        let field = match profile {
            Profile::Uniform { value } => ScalarField::uniform(grid.cell_count(), *value),
            Profile::GaussianBump { base, amplitude, center, width } => {
                if center.len() != grid.dim() {
                    return Err(CliError::Validation(format!(
                        "gaussian_bump center has {} coordinates on a {}D grid",
                        center.len(),
                        grid.dim()
                    )));
                }
                if width.is_nan() || *width <= 0.0 {
                    return Err(CliError::Validation(format!("gaussian_bump width must be positive, got {width}")));
                }
                grid.sample_cells(|p| {
                    let r2: f64 = center.iter().enumerate().map(|(k, c)| (p[k] - c).powi(2)).sum();
                    base + amplitude * (-r2 / (width * width)).exp()
                })
            }
            Profile::Step { low, high, axis, position } => {
                if *axis >= grid.dim() {
                    return Err(CliError::Validation(format!("step axis {axis} out of range for a {}D grid", grid.dim())));
                }
                grid.sample_cells(|p| if p[*axis] < *position { *low } else { *high })
            }
            Profile::Random { base, amplitude } => {
                let mut rng = StdRng::seed_from_u64(self.seed.wrapping_add(stream.wrapping_mul(0x9e37_79b9_7f4a_7c15)));
                ScalarField((0..grid.cell_count()).map(|_| base + amplitude * rng.gen_range(-1.0..1.0)).collect())
            }
        };
        if !field.is_finite() {
            return Err(CliError::Validation("initial profile produced non-finite values".into()));
        }
        Ok(field)
    }

    /// Validates the scenario and builds the simulation inputs.
    pub fn build(&self) -> Result<(IphsSystem, ThermoState, TimeIntegrator)> {
        let grid = self.grid()?;
        let model = self.model()?;
        let bc = self.boundary_conditions(&grid)?;
        let integrator = self.integrator()?;
        let initial = self.initial_state(&grid, &model)?;
        let system = IphsSystem::new(grid, model, bc)?;
        Ok((system, initial, integrator))
    }

    /// Whether every wall is closed to heat and species.
    pub fn is_insulated(&self) -> bool {
        self.boundary.values().all(|g| {
            g.thermal == ThermalSpec::ZeroFlux && g.species.iter().all(|s| *s == SpeciesBcSpec::ZeroFlux)
        })
    }

    /// Whether every wall is impermeable to species.
    pub fn species_closed(&self) -> bool {
        self.boundary.values().all(|g| g.species.iter().all(|s| *s == SpeciesBcSpec::ZeroFlux))
    }
}

fn signal(spec: &SignalSpec, group: &str) -> Result<Signal> {
    match spec {
        SignalSpec::Constant(v) => {
            if v.is_finite() {
                Ok(Signal::constant(*v))
            } else {
                Err(CliError::Validation(format!("boundary group `{group}`: non-finite signal value")))
            }
        }
        SignalSpec::Table(points) => {
            Signal::new(points.clone()).map_err(|e| CliError::Validation(format!("boundary group `{group}`: {e}")))
        }
    }
}
