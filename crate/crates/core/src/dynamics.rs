//! Boundary conditions, time integration and thermodynamic balance audits.
//!
//! The default integrator is the implicit midpoint rule
//! `x' = x + dt F((x + x') / 2, t + dt/2)`, solved by damped Newton iterations
//! with finite-difference Jacobian-vector products and GMRES. Modulators are
//! frozen at the stage state, so each stage sees a skew-symmetric structure.
//! After convergence the new state is recomputed as `x + dt F(x_mid)`, which
//! keeps divergence-form invariants (species totals) exact to rounding.

use crate::constitutive::{total_entropy, CoEnergyFields, ConstitutiveModel, ThermoState};
use crate::linalg::gmres;
use crate::mesh::{MimeticGrid, Side};
use crate::operators::{
    apply_jglob, driving_forces, entropy_production, fluxes, modulators, DrivingForces, EntropyProduction, Fluxes,
    Modulators, StateRate, Traces,
};
use crate::ports::{modified_effort, nd_port_pairs, paired_xi, synthesize_ports, BoundaryPorts, PortSynthesis, StructureMatrices1D};
use crate::{Error, Result};

/// Piecewise-linear time signal, held constant outside its table.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    points: Vec<(f64, f64)>,
}

impl Signal {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidBoundary("signal table is empty".into()));
        }
        if points.iter().any(|(t, v)| !t.is_finite() || !v.is_finite()) {
            return Err(Error::InvalidBoundary("signal table has non-finite entries".into()));
        }
        if points.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::InvalidBoundary("signal times must be strictly increasing".into()));
        }
        Ok(Signal { points })
    }

    pub fn constant(v: f64) -> Self {
        Signal { points: vec![(0.0, v)] }
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn value(&self, t: f64) -> f64 {
        let p = &self.points;
        if t <= p[0].0 {
            return p[0].1;
        }
        for w in p.windows(2) {
            let ((t0, v0), (t1, v1)) = (w[0], w[1]);
            if t <= t1 {
                return v0 + (v1 - v0) * (t - t0) / (t1 - t0);
            }
        }
        p[p.len() - 1].1
    }
}

/// Thermal condition on a boundary group.
#[derive(Debug, Clone, PartialEq)]
pub enum ThermalBc {
    /// Prescribed temperature.
    DirichletTemperature(Signal),
    /// Prescribed incoming heat flux `-f_Q . n = lambda n . grad(T)`.
    HeatFlux(Signal),
    /// Insulated wall.
    ZeroFlux,
}

/// Condition on one species at a boundary group.
#[derive(Debug, Clone, PartialEq)]
pub enum SpeciesBc {
    /// Prescribed chemical potential.
    DirichletPotential(Signal),
    /// Impermeable wall.
    ZeroFlux,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupBc {
    pub thermal: ThermalBc,
    /// One entry per species.
    pub species: Vec<SpeciesBc>,
}

impl GroupBc {
    pub fn insulated(n_species: usize) -> Self {
        GroupBc { thermal: ThermalBc::ZeroFlux, species: vec![SpeciesBc::ZeroFlux; n_species] }
    }
}

/// Conditions for every boundary group of a grid (`x_min`, `x_max`, `y_min`, `y_max`).
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryConditions {
    pub groups: Vec<(String, GroupBc)>,
}

impl BoundaryConditions {
    /// All walls insulated and impermeable.
    pub fn insulated(grid: &MimeticGrid, n_species: usize) -> Self {
        BoundaryConditions {
            groups: grid.boundary_groups().iter().map(|g| (g.name.to_string(), GroupBc::insulated(n_species))).collect(),
        }
    }

    pub fn set(&mut self, name: &str, bc: GroupBc) {
        match self.groups.iter_mut().find(|(n, _)| n == name) {
            Some(slot) => slot.1 = bc,
            None => self.groups.push((name.to_string(), bc)),
        }
    }

    pub fn get(&self, name: &str) -> Option<&GroupBc> {
        self.groups.iter().find(|(n, _)| n == name).map(|(_, g)| g)
    }

    pub fn validate(&self, grid: &MimeticGrid, n_species: usize) -> Result<()> {
        for g in grid.boundary_groups() {
            let bc = self
                .get(g.name)
                .ok_or_else(|| Error::InvalidBoundary(format!("no condition for boundary group `{}`", g.name)))?;
            if bc.species.len() != n_species {
                return Err(Error::InvalidBoundary(format!(
                    "group `{}` lists {} species conditions, model has {n_species}",
                    g.name,
                    bc.species.len()
                )));
            }
        }
        for (name, _) in &self.groups {
            if grid.boundary_group(name).is_none() {
                return Err(Error::InvalidBoundary(format!("unknown boundary group `{name}` for a {}D grid", grid.dim())));
            }
        }
        Ok(())
    }

    /// Boundary traces of `T` and `mu_i` at time `t` for the co-energy `coe`.
    pub fn traces(&self, grid: &MimeticGrid, coe: &CoEnergyFields, model: &ConstitutiveModel, t: f64) -> Result<Traces> {
        let mut traces = Traces::adjacent(grid, coe)?;
        for group in grid.boundary_groups() {
            let bc = self
                .get(group.name)
                .ok_or_else(|| Error::InvalidBoundary(format!("no condition for boundary group `{}`", group.name)))?;
            let h = grid.spacing(group.axis);
            for b in group.faces.clone() {
                let adj = traces.temperature.0[b];
                traces.temperature.0[b] = match &bc.thermal {
                    ThermalBc::DirichletTemperature(s) => s.value(t),
                    ThermalBc::HeatFlux(s) => adj + s.value(t) * h / (2.0 * model.lambda),
                    ThermalBc::ZeroFlux => adj,
                };
                for (i, sbc) in bc.species.iter().enumerate() {
                    if let SpeciesBc::DirichletPotential(s) = sbc {
                        traces.potentials[i].0[b] = s.value(t);
                    }
                }
            }
        }
        Ok(traces)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    ExplicitRk4,
    ImplicitMidpoint,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeIntegrator {
    pub scheme: Scheme,
    pub dt: f64,
    pub t_end: f64,
    pub newton_tol: f64,
    pub max_newton_iters: usize,
}

impl TimeIntegrator {
    pub fn midpoint(dt: f64, t_end: f64) -> Self {
        TimeIntegrator { scheme: Scheme::ImplicitMidpoint, dt, t_end, newton_tol: 1e-12, max_newton_iters: 50 }
    }

    pub fn rk4(dt: f64, t_end: f64) -> Self {
        TimeIntegrator { scheme: Scheme::ExplicitRk4, ..Self::midpoint(dt, t_end) }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::InvalidIntegrator(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_end.is_finite() && self.t_end >= 0.0) {
            return Err(Error::InvalidIntegrator(format!("t_end must be non-negative, got {}", self.t_end)));
        }
        if self.newton_tol.is_nan() || self.newton_tol <= 0.0 || self.max_newton_iters == 0 {
            return Err(Error::InvalidIntegrator("newton tolerance and iteration cap must be positive".into()));
        }
        Ok(())
    }

    /// Number of steps to reach `t_end`; the last step is shortened if needed.
    pub fn steps(&self) -> usize {
        let n = self.t_end / self.dt;
        let r = n.round();
        if (n - r).abs() <= 1e-9 * n.max(1.0) {
            r as usize
        } else {
            n.ceil() as usize
        }
    }
}

/// Everything the operators produce at one state.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub coe: CoEnergyFields,
    pub traces: Traces,
    pub forces: DrivingForces,
    pub mods: Modulators,
    pub rate: StateRate,
    pub production: EntropyProduction,
    pub fluxes: Fluxes,
}

/// Per-state balance quantities.
#[derive(Debug, Clone, PartialEq)]
pub struct AuditPoint {
    pub time: f64,
    /// Total energy `U`.
    pub energy: f64,
    /// Total entropy `S`.
    pub entropy: f64,
    /// Energy entering through the ports.
    pub boundary_power: f64,
    /// `int sigma` over the domain.
    pub entropy_production: f64,
    /// Entropy entering through the boundary, `int g_s r_s.n T`.
    pub entropy_boundary: f64,
    /// Smallest cell production seen at this state and at the stages leading to it.
    pub min_sigma: f64,
    pub species_totals: Vec<f64>,
}

/// Boundary port values at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct PortRecord {
    pub time: f64,
    /// 1D inputs `v = W_B [e(b); e(a)]` (empty in 2D).
    pub v: Vec<f64>,
    /// 1D outputs `y = W_C [e(b); e(a)]` (empty in 2D).
    pub y: Vec<f64>,
    pub nd_pairs: BoundaryPorts,
}

/// A boundary-controlled conduction-diffusion system on a grid.
#[derive(Debug, Clone)]
pub struct IphsSystem {
    pub grid: MimeticGrid,
    pub model: ConstitutiveModel,
    pub bc: BoundaryConditions,
    ports_1d: Option<(StructureMatrices1D, PortSynthesis)>,
}

impl IphsSystem {
    pub fn new(grid: MimeticGrid, model: ConstitutiveModel, bc: BoundaryConditions) -> Result<Self> {
        model.validate()?;
        bc.validate(&grid, model.n_species())?;
        let ports_1d = if grid.dim() == 1 {
            let sm = StructureMatrices1D::conduction_diffusion(model.n_species());
            let (xi1, xi2) = paired_xi(model.n_species() + 1);
            let ps = synthesize_ports(&sm, &xi1, &xi2)?;
            Some((sm, ps))
        } else {
            None
        };
        Ok(IphsSystem { grid, model, bc, ports_1d })
    }

    pub fn n_species(&self) -> usize {
        self.model.n_species()
    }

    /// 1D port synthesis used for `v`, `y` (None in 2D).
    pub fn port_synthesis(&self) -> Option<&PortSynthesis> {
        self.ports_1d.as_ref().map(|(_, p)| p)
    }

    pub fn evaluate(&self, state: &ThermoState) -> Result<Evaluation> {
        let coe = self.model.co_energy(state)?;
        let traces = self.bc.traces(&self.grid, &coe, &self.model, state.time)?;
        let forces = driving_forces(&self.grid, &coe, &traces)?;
        let mods = modulators(&self.grid, &coe, &forces, &traces, &self.model)?;
        let rate = apply_jglob(&self.grid, &coe, &traces, &mods)?;
        let production = entropy_production(&self.grid, &forces, &mods)?;
        let fluxes = fluxes(&forces, &mods, &self.model)?;
        Ok(Evaluation { coe, traces, forces, mods, rate, production, fluxes })
    }

    fn rate_vector(&self, x: &[f64], t: f64) -> Result<Vec<f64>> {
        let state = ThermoState::from_vector(x, self.n_species(), t)?;
        let coe = self.model.co_energy(&state)?;
        let traces = self.bc.traces(&self.grid, &coe, &self.model, t)?;
        let forces = driving_forces(&self.grid, &coe, &traces)?;
        let mods = modulators(&self.grid, &coe, &forces, &traces, &self.model)?;
        Ok(apply_jglob(&self.grid, &coe, &traces, &mods)?.to_vector())
    }

    fn min_sigma_at(&self, x: &[f64], t: f64) -> Result<f64> {
        let state = ThermoState::from_vector(x, self.n_species(), t)?;
        Ok(self.evaluate(&state)?.production.min_cell())
    }

    pub fn boundary_ports(&self, ev: &Evaluation) -> Result<BoundaryPorts> {
        nd_port_pairs(&self.grid, &ev.coe, &ev.traces, &ev.fluxes)
    }

    pub fn port_record(&self, state: &ThermoState, ev: &Evaluation) -> Result<PortRecord> {
        let nd_pairs = self.boundary_ports(ev)?;
        let (v, y) = match &self.ports_1d {
            Some((sm, ps)) => {
                let e_b = modified_effort(&self.grid, &ev.coe, &ev.traces, &ev.mods, Side::High)?.stack(sm)?;
                let e_a = modified_effort(&self.grid, &ev.coe, &ev.traces, &ev.mods, Side::Low)?.stack(sm)?;
                (ps.inputs(&e_b, &e_a)?.iter().copied().collect(), ps.outputs(&e_b, &e_a)?.iter().copied().collect())
            }
            None => (Vec::new(), Vec::new()),
        };
        Ok(PortRecord { time: state.time, v, y, nd_pairs })
    }

    pub fn audit_point(&self, state: &ThermoState, ev: &Evaluation) -> Result<AuditPoint> {
        let ports = self.boundary_ports(ev)?;
        Ok(AuditPoint {
            time: state.time,
            energy: self.model.total_energy(state, &self.grid)?,
            entropy: total_entropy(state, &self.grid)?,
            boundary_power: ports.energy_power(&self.grid)?,
            entropy_production: self.grid.integrate(&ev.production.total())?,
            entropy_boundary: ports.entropy_flow(&self.grid)?,
            min_sigma: ev.production.min_cell(),
            species_totals: state.concentrations.iter().map(|c| self.grid.integrate(c)).collect::<Result<_>>()?,
        })
    }

    /// Audit and port data of a state, as recorded before the first step.
    pub fn observe(&self, state: &ThermoState) -> Result<(AuditPoint, PortRecord)> {
        let ev = self.evaluate(state)?;
        Ok((self.audit_point(state, &ev)?, self.port_record(state, &ev)?))
    }

    /// Upper bound on the spectral radius of the linearized diffusion
    /// operator: `sum_axes 4/h^2` times the largest effective diffusivity
    /// (`lambda / c_v` for heat, `alpha_i d_i` for species) inflated by the
    /// temperature spread.
    pub fn stiffness_bound(&self, state: &ThermoState) -> Result<f64> {
        let coe = self.model.co_energy(state)?;
        let t = &coe.temperature.0;
        let (tmin, tmax) = t.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
        let spread = tmax / tmin;
        let mut kappa = self.model.lambda / self.model.c_v;
        for sp in &self.model.species {
            kappa = kappa.max(sp.alpha * sp.diffusivity);
        }
        let geom: f64 = (0..self.grid.dim()).map(|a| 4.0 / self.grid.spacing(a).powi(2)).sum();
        Ok(geom * kappa * spread)
    }

    /// Largest explicit RK4 step allowed at `state`. RK4 is stable on the
    /// negative real axis up to |z| ~ 2.78; the guard keeps `dt * rho <= 2`.
    pub fn rk4_dt_limit(&self, state: &ThermoState) -> Result<f64> {
        Ok(RK4_STABILITY_MARGIN / self.stiffness_bound(state)?)
    }
}

const RK4_STABILITY_MARGIN: f64 = 2.0;

/// Result of one step.
#[derive(Debug, Clone)]
pub struct StepOutput {
    pub state: ThermoState,
    pub ports: PortRecord,
    pub audit: AuditPoint,
    pub newton_iterations: usize,
    /// Number of RK4 substeps after the stability guard (1 for midpoint).
    pub substeps: usize,
}

/// Advances `state` by `dt` (which may be shorter than `integrator.dt` on the last step).
pub fn step(system: &IphsSystem, state: &ThermoState, integrator: &TimeIntegrator, dt: f64) -> Result<StepOutput> {
    let x0 = state.to_vector();
    let t0 = state.time;
    let reject = |e: Error| match e {
        e @ Error::NewtonDivergence { .. } => e,
        other => Error::StepRejected { time: t0, reason: other.to_string() },
    };
    let (x1, stage_min, iters, substeps) = match integrator.scheme {
        Scheme::ImplicitMidpoint => midpoint_step(system, &x0, t0, dt, integrator).map_err(reject)?,
        Scheme::ExplicitRk4 => {
            let limit = system.rk4_dt_limit(state).map_err(reject)?;
            let substeps = if dt > limit { (dt / limit).ceil() as usize } else { 1 };
            if substeps > 1 {
                log::warn!("dt = {dt:e} exceeds the RK4 stability bound {limit:e}; using {substeps} substeps");
            }
            let h = dt / substeps as f64;
            let mut x = x0.clone();
            let mut min_sigma = f64::INFINITY;
            for k in 0..substeps {
                let (xn, m) = rk4_step(system, &x, t0 + k as f64 * h, h).map_err(reject)?;
                x = xn;
                min_sigma = min_sigma.min(m);
            }
            (x, min_sigma, 0, substeps)
        }
    };
    let new_state = ThermoState::from_vector(&x1, system.n_species(), t0 + dt).map_err(reject)?;
    let ev = system.evaluate(&new_state).map_err(reject)?;
    let mut audit = system.audit_point(&new_state, &ev).map_err(reject)?;
    audit.min_sigma = audit.min_sigma.min(stage_min);
    let ports = system.port_record(&new_state, &ev).map_err(reject)?;
    Ok(StepOutput { state: new_state, ports, audit, newton_iterations: iters, substeps })
}

fn axpy(x: &[f64], a: f64, y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(xi, yi)| xi + a * yi).collect()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn rk4_step(system: &IphsSystem, x: &[f64], t: f64, h: f64) -> Result<(Vec<f64>, f64)> {
    let k1 = system.rate_vector(x, t)?;
    let x2 = axpy(x, 0.5 * h, &k1);
    let k2 = system.rate_vector(&x2, t + 0.5 * h)?;
    let x3 = axpy(x, 0.5 * h, &k2);
    let k3 = system.rate_vector(&x3, t + 0.5 * h)?;
    let x4 = axpy(x, h, &k3);
    let k4 = system.rate_vector(&x4, t + h)?;
    let mut min_sigma = system.min_sigma_at(x, t)?;
    min_sigma = min_sigma.min(system.min_sigma_at(&x2, t + 0.5 * h)?);
    min_sigma = min_sigma.min(system.min_sigma_at(&x3, t + 0.5 * h)?);
    min_sigma = min_sigma.min(system.min_sigma_at(&x4, t + h)?);
    let out = (0..x.len())
        .map(|i| x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect();
    Ok((out, min_sigma))
}

fn midpoint_step(
    system: &IphsSystem,
    x0: &[f64],
    t0: f64,
    dt: f64,
    integrator: &TimeIntegrator,
) -> Result<(Vec<f64>, f64, usize, usize)> {
    let t_mid = t0 + 0.5 * dt;
    let scale = max_abs(x0).max(1.0);
    let tol = integrator.newton_tol * scale;
    let residual = |delta: &[f64]| -> Result<(Vec<f64>, Vec<f64>)> {
        let x_mid = axpy(x0, 0.5, delta);
        let f = system.rate_vector(&x_mid, t_mid)?;
        let g = delta.iter().zip(&f).map(|(d, fi)| d - dt * fi).collect();
        Ok((g, f))
    };

    let mut delta: Vec<f64> = system.rate_vector(x0, t0)?.iter().map(|f| dt * f).collect();
    let (mut g, mut f_mid) = match residual(&delta) {
        Ok(r) => r,
        Err(_) => {
            delta = vec![0.0; x0.len()];
            residual(&delta)?
        }
    };
    let mut g_norm = max_abs(&g);
    let mut iters = 0;
    while g_norm > tol {
        if iters >= integrator.max_newton_iters {
            return Err(Error::NewtonDivergence { iterations: iters, residual: g_norm });
        }
        iters += 1;
        let x_mid = axpy(x0, 0.5, &delta);
        let x_mid_norm = x_mid.iter().map(|v| v * v).sum::<f64>().sqrt();
        let jvp = |v: &[f64]| -> Vec<f64> {
            let v_norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            if v_norm == 0.0 {
                return vec![0.0; v.len()];
            }
            let eps = f64::EPSILON.sqrt() * (1.0 + x_mid_norm) / v_norm;
            match system.rate_vector(&axpy(&x_mid, eps, v), t_mid) {
                Ok(fp) => v
                    .iter()
                    .zip(fp.iter().zip(&f_mid))
                    .map(|(vi, (a, b))| vi - 0.5 * dt * (a - b) / eps)
                    .collect(),
                Err(_) => v.to_vec(),
            }
        };
        let rhs: Vec<f64> = g.iter().map(|v| -v).collect();
        let mut correction = vec![0.0; x0.len()];
        gmres(jvp, &rhs, &mut correction, 1e-10, 60, 600);

        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..12 {
            let trial = axpy(&delta, lambda, &correction);
            if let Ok((gt, ft)) = residual(&trial) {
                let n = max_abs(&gt);
                if n < g_norm {
                    delta = trial;
                    g = gt;
                    f_mid = ft;
                    g_norm = n;
                    accepted = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !accepted {
            return Err(Error::NewtonDivergence { iterations: iters, residual: g_norm });
        }
    }
    let x_mid = axpy(x0, 0.5, &delta);
    let min_sigma = system.min_sigma_at(&x_mid, t_mid)?;
    Ok((axpy(x0, dt, &f_mid), min_sigma, iters, 1))
}

/// Recorded audit points of a run, starting with the initial state.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    pub points: Vec<AuditPoint>,
}

/// Residual time series of a balance law.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualSeries {
    pub series: Vec<f64>,
    pub max_abs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SecondLawAudit {
    pub residual: ResidualSeries,
    /// Smallest pointwise production over the run.
    pub min_sigma: f64,
    /// Most negative step-to-step change of `S` (0 if none).
    pub largest_decrease: f64,
}

impl SecondLawAudit {
    /// Whether `S(t)` never drops by more than `tolerance`.
    pub fn entropy_nondecreasing(&self, tolerance: f64) -> bool {
        self.largest_decrease >= -tolerance
    }
}

fn trapezoid_residual(points: &[AuditPoint], value: impl Fn(&AuditPoint) -> f64, rate: impl Fn(&AuditPoint) -> f64) -> ResidualSeries {
    let mut series = Vec::with_capacity(points.len());
    let mut integral = 0.0;
    for (k, p) in points.iter().enumerate() {
        if k > 0 {
            let q = &points[k - 1];
            integral += 0.5 * (p.time - q.time) * (rate(q) + rate(p));
        }
        series.push(value(p) - value(&points[0]) - integral);
    }
    let max_abs = series.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
    ResidualSeries { series, max_abs }
}

/// `r(t) = U(t) - U(0) - int_0^t P dtau` with the trapezoid rule in time.
pub fn audit_first_law(trajectory: &Trajectory) -> ResidualSeries {
    trapezoid_residual(&trajectory.points, |p| p.energy, |p| p.boundary_power)
}

/// `r(t) = S(t) - S(0) - int_0^t (int sigma + int_Gamma g_s r_s.n T) dtau`.
pub fn audit_second_law(trajectory: &Trajectory) -> SecondLawAudit {
    let pts = &trajectory.points;
    let residual = trapezoid_residual(pts, |p| p.entropy, |p| p.entropy_production + p.entropy_boundary);
    let min_sigma = pts.iter().fold(f64::INFINITY, |m, p| m.min(p.min_sigma));
    let largest_decrease = pts.windows(2).fold(0.0f64, |m, w| m.min(w[1].entropy - w[0].entropy));
    SecondLawAudit { residual, min_sigma, largest_decrease }
}

/// One audited row of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct AuditReport {
    pub time: f64,
    pub energy: f64,
    pub entropy: f64,
    pub boundary_power: f64,
    pub entropy_production: f64,
    pub entropy_boundary: f64,
    pub first_law_residual: f64,
    pub second_law_residual: f64,
    pub min_sigma: f64,
}

impl Trajectory {
    pub fn push(&mut self, p: AuditPoint) {
        self.points.push(p);
    }

    pub fn reports(&self) -> Vec<AuditReport> {
        let first = audit_first_law(self);
        let second = audit_second_law(self);
        self.points
            .iter()
            .enumerate()
            .map(|(k, p)| AuditReport {
                time: p.time,
                energy: p.energy,
                entropy: p.entropy,
                boundary_power: p.boundary_power,
                entropy_production: p.entropy_production,
                entropy_boundary: p.entropy_boundary,
                first_law_residual: first.series[k],
                second_law_residual: second.residual.series[k],
                min_sigma: p.min_sigma,
            })
            .collect()
    }
}

/// Integrates from `initial` to `integrator.t_end`, calling `observe` after
/// every step. Returns the final state and the trajectory; on failure the
/// trajectory recorded so far is returned with the error.
pub fn simulate(
    system: &IphsSystem,
    initial: ThermoState,
    integrator: &TimeIntegrator,
    mut observe: impl FnMut(usize, &StepOutput),
) -> std::result::Result<(ThermoState, Trajectory), (Trajectory, Error)> {
    let mut traj = Trajectory::default();
    if let Err(e) = integrator.validate() {
        return Err((traj, e));
    }
    match system.observe(&initial) {
        Ok((p, _)) => traj.push(p),
        Err(e) => return Err((traj, e)),
    }
    let steps = integrator.steps();
    let t_start = initial.time;
    let mut state = initial;
    for k in 0..steps {
        let t_next = (t_start + (k + 1) as f64 * integrator.dt).min(t_start + integrator.t_end);
        let dt = t_next - state.time;
        match step(system, &state, integrator, dt) {
            Ok(out) => {
                observe(k + 1, &out);
                traj.push(out.audit.clone());
                state = out.state;
            }
            Err(e) => return Err((traj, e)),
        }
    }
    Ok((state, traj))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constitutive::SpeciesParameters;
    use crate::mesh::ScalarField;

    fn heat_system(cells: usize) -> IphsSystem {
        let grid = MimeticGrid::new_1d(cells, 0.0, 1.0).unwrap();
        let model = ConstitutiveModel::new(1.0, 1.0, 0.05, vec![]).unwrap();
        let bc = BoundaryConditions::insulated(&grid, 0);
        IphsSystem::new(grid, model, bc).unwrap()
    }

    #[test]
    fn signal_interpolation() {
        let s = Signal::new(vec![(0.0, 1.0), (2.0, 3.0), (3.0, 0.0)]).unwrap();
        assert_eq!(s.value(-1.0), 1.0);
        assert_eq!(s.value(1.0), 2.0);
        assert_eq!(s.value(2.5), 1.5);
        assert_eq!(s.value(9.0), 0.0);
        assert!(Signal::new(vec![(1.0, 0.0), (1.0, 1.0)]).is_err());
        assert!(Signal::new(vec![]).is_err());
    }

    #[test]
    fn missing_group_is_named() {
        let grid = MimeticGrid::new_2d([3, 3], [[0.0, 1.0], [0.0, 1.0]]).unwrap();
        let mut bc = BoundaryConditions::insulated(&grid, 0);
        bc.groups.retain(|(n, _)| n != "y_max");
        let err = bc.validate(&grid, 0).unwrap_err().to_string();
        assert!(err.contains("y_max"), "{err}");
    }

    #[test]
    fn heat_flux_trace_matches_flux() {
        let grid = MimeticGrid::new_1d(4, 0.0, 1.0).unwrap();
        let model = ConstitutiveModel::new(1.0, 1.0, 0.5, vec![]).unwrap();
        let mut bc = BoundaryConditions::insulated(&grid, 0);
        bc.set("x_max", GroupBc { thermal: ThermalBc::HeatFlux(Signal::constant(3.0)), species: vec![] });
        bc.set("x_min", GroupBc { thermal: ThermalBc::HeatFlux(Signal::constant(-1.0)), species: vec![] });
        let sys = IphsSystem::new(grid, model, bc).unwrap();
        let st = ThermoState::new(vec![], ScalarField(vec![0.1, 0.2, 0.0, 0.3]), 0.0).unwrap();
        let ev = sys.evaluate(&st).unwrap();
        let q = sys.grid.normal_trace(&ev.fluxes.heat).unwrap();
        assert!((-q.0[0] - -1.0).abs() < 1e-12);
        assert!((-q.0[1] - 3.0).abs() < 1e-12);
        let p = sys.boundary_ports(&ev).unwrap();
        assert!((p.energy_power(&sys.grid).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn semi_discrete_balances_are_exact() {
        let grid = MimeticGrid::new_2d([5, 4], [[0.0, 1.0], [0.0, 0.8]]).unwrap();
        let sp = vec![SpeciesParameters { alpha: 2.0, diffusivity: 0.3 }, SpeciesParameters { alpha: 0.5, diffusivity: 1.1 }];
        let model = ConstitutiveModel::new(1.5, 2.0, 0.7, sp).unwrap();
        let mut bc = BoundaryConditions::insulated(&grid, 2);
        bc.set(
            "x_min",
            GroupBc {
                thermal: ThermalBc::DirichletTemperature(Signal::constant(2.5)),
                species: vec![SpeciesBc::DirichletPotential(Signal::constant(0.4)), SpeciesBc::ZeroFlux],
            },
        );
        bc.set(
            "y_max",
            GroupBc {
                thermal: ThermalBc::HeatFlux(Signal::constant(0.3)),
                species: vec![SpeciesBc::ZeroFlux, SpeciesBc::DirichletPotential(Signal::constant(-0.2))],
            },
        );
        let sys = IphsSystem::new(grid, model, bc).unwrap();
        let g = &sys.grid;
        let st = ThermoState::new(
            vec![g.sample_cells(|p| (3.0 * p[0]).sin() * p[1]), g.sample_cells(|p| 0.2 + p[0] * p[0])],
            g.sample_cells(|p| 0.3 * (2.0 * p[1]).cos() - 0.1 * p[0]),
            0.0,
        )
        .unwrap();
        let ev = sys.evaluate(&st).unwrap();
        let ports = sys.boundary_ports(&ev).unwrap();
        // dU/dt = <mu, dc/dt> + <T, ds/dt>
        let mut du = g.cell_inner(&ev.coe.temperature, &ev.rate.entropy).unwrap();
        for (mu, dc) in ev.coe.potentials.iter().zip(&ev.rate.concentrations) {
            du += g.cell_inner(mu, dc).unwrap();
        }
        let power = ports.energy_power(g).unwrap();
        assert!((du - power).abs() < 1e-12 * power.abs().max(1.0), "{du} {power}");
        // dS/dt = int sigma + entropy inflow
        let ds = g.integrate(&ev.rate.entropy).unwrap();
        let rhs = g.integrate(&ev.production.total()).unwrap() + ports.entropy_flow(g).unwrap();
        assert!((ds - rhs).abs() < 1e-12 * ds.abs().max(1.0), "{ds} {rhs}");
        // species balance: only the Dirichlet walls exchange moles
        for (i, dc) in ev.rate.concentrations.iter().enumerate() {
            let inflow = g.boundary_integral(&ports.species[i].input, &g.sample_boundary(|_| 1.0)).unwrap();
            assert!((g.integrate(dc).unwrap() - inflow).abs() < 1e-12);
        }
    }

    #[test]
    fn equilibrium_is_fixed_point_for_both_schemes() {
        let sys = heat_system(8);
        let st = ThermoState::new(vec![], ScalarField::uniform(8, 0.0), 0.0).unwrap();
        for integ in [TimeIntegrator::midpoint(0.1, 1.0), TimeIntegrator::rk4(0.1, 1.0)] {
            let out = step(&sys, &st, &integ, integ.dt).unwrap();
            assert_eq!(out.state.entropy, st.entropy);
            assert_eq!(out.audit.boundary_power, 0.0);
            assert_eq!(out.audit.entropy_production, 0.0);
        }
    }

    #[test]
    fn insulated_pulse_entropy_increases() {
        let sys = heat_system(16);
        let s0 = sys.grid.sample_cells(|p| 0.4 * (-((p[0] - 0.4) / 0.1).powi(2)).exp());
        let st = ThermoState::new(vec![], s0, 0.0).unwrap();
        let (_, traj) = simulate(&sys, st, &TimeIntegrator::midpoint(0.01, 0.2), |_, _| {}).unwrap();
        let second = audit_second_law(&traj);
        assert!(second.entropy_nondecreasing(1e-12));
        assert!(second.min_sigma >= -1e-14);
        assert!(traj.points.last().unwrap().entropy > traj.points[0].entropy);
    }

    #[test]
    fn rk4_guard_substeps() {
        let sys = heat_system(16);
        let st = ThermoState::new(vec![], sys.grid.sample_cells(|p| 0.1 * p[0]), 0.0).unwrap();
        let limit = sys.rk4_dt_limit(&st).unwrap();
        let out = step(&sys, &st, &TimeIntegrator::rk4(5.0 * limit, 1.0), 5.0 * limit).unwrap();
        assert!(out.substeps >= 5);
    }

    #[test]
    fn step_rejected_on_nonpositive_trace() {
        let grid = MimeticGrid::new_1d(4, 0.0, 1.0).unwrap();
        let model = ConstitutiveModel::new(1.0, 1.0, 0.5, vec![]).unwrap();
        let mut bc = BoundaryConditions::insulated(&grid, 0);
        bc.set("x_max", GroupBc { thermal: ThermalBc::DirichletTemperature(Signal::constant(-1.0)), species: vec![] });
        let sys = IphsSystem::new(grid, model, bc).unwrap();
        let st = ThermoState::new(vec![], ScalarField::uniform(4, 0.0), 0.0).unwrap();
        assert!(matches!(sys.observe(&st), Err(Error::ConstitutiveViolation { .. })));
        let err = step(&sys, &st, &TimeIntegrator::midpoint(0.1, 1.0), 0.1).unwrap_err();
        assert!(matches!(err, Error::StepRejected { .. }), "{err}");
    }

    #[test]
    fn zero_length_trajectory_has_zero_residual() {
        let sys = heat_system(4);
        let st = ThermoState::new(vec![], sys.grid.sample_cells(|p| p[0]), 0.0).unwrap();
        let (_, traj) = simulate(&sys, st, &TimeIntegrator::midpoint(0.1, 0.0), |_, _| {}).unwrap();
        assert_eq!(traj.points.len(), 1);
        assert_eq!(audit_first_law(&traj).max_abs, 0.0);
        assert_eq!(audit_second_law(&traj).residual.max_abs, 0.0);
    }

    #[test]
    fn step_count() {
        assert_eq!(TimeIntegrator::midpoint(0.1, 1.0).steps(), 10);
        assert_eq!(TimeIntegrator::midpoint(0.3, 1.0).steps(), 4);
        assert_eq!(TimeIntegrator::midpoint(0.1, 0.0).steps(), 0);
    }
}
