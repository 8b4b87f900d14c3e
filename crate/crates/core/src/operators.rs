//! State-modulated skew-symmetric structure of conduction-diffusion.
//!
//! Given the co-energy fields `e = [mu_1, ..., mu_n, T]` the rates are
//!
//! ```text
//! dc_i/dt = div(r_ci T)
//! ds/dt   = sum_i r_ci . grad(mu_i) + Psi(T),   Psi(T) = g_s r_s . grad(T) + div(g_s r_s T)
//! ```
//!
//! with modulators `r_s = (lambda / T^2) grad(T)` and `r_ci = (d_i / T) grad(mu_i)`.
//!
//! Discretization: products `r . grad(e)` live on faces and are brought to
//! cells with [`MimeticGrid::average_to_cells`]; terms `div(r e)` use the
//! arithmetic face interpolation with the boundary trace on boundary faces.
//! Face temperatures inside `1/T` factors are harmonic means. On boundary
//! faces `1/T` uses the trace, while `1/T^2` in `r_s` is split as
//! `1/(T_trace T_adjacent)` so that `r_s T_adjacent` is exactly the wall
//! entropy flux `lambda n.grad(T) / T_trace`.
//!
//! With modulators frozen and zero traces the assembled map is exactly
//! skew-symmetric in the measure-weighted cell inner product.

use std::fmt::Write as _;

use nalgebra::DMatrix;

use crate::constitutive::{CoEnergyFields, ConstitutiveModel};
use crate::mesh::{BoundaryField, FaceField, MimeticGrid, ScalarField};
use crate::{Error, Result};

/// Boundary traces of the co-energy fields.
#[derive(Debug, Clone, PartialEq)]
pub struct Traces {
    pub temperature: BoundaryField,
    pub potentials: Vec<BoundaryField>,
}

impl Traces {
    pub fn zero(grid: &MimeticGrid, n_species: usize) -> Self {
        Traces {
            temperature: grid.zero_boundary(),
            potentials: vec![grid.zero_boundary(); n_species],
        }
    }

    /// Traces equal to the adjacent cell values (zero normal gradients).
    pub fn adjacent(grid: &MimeticGrid, coe: &CoEnergyFields) -> Result<Self> {
        Ok(Traces {
            temperature: grid.adjacent_values(&coe.temperature)?,
            potentials: coe.potentials.iter().map(|m| grid.adjacent_values(m)).collect::<Result<_>>()?,
        })
    }

    pub fn n_species(&self) -> usize {
        self.potentials.len()
    }
}

/// Thermodynamic driving forces `grad(T)` and `grad(mu_i)` on faces.
#[derive(Debug, Clone, PartialEq)]
pub struct DrivingForces {
    pub grad_t: FaceField,
    pub grad_mu: Vec<FaceField>,
}

pub fn driving_forces(grid: &MimeticGrid, coe: &CoEnergyFields, traces: &Traces) -> Result<DrivingForces> {
    check_species(coe.n_species(), traces.n_species())?;
    Ok(DrivingForces {
        grad_t: grid.grad(&coe.temperature, &traces.temperature)?,
        grad_mu: coe
            .potentials
            .iter()
            .zip(&traces.potentials)
            .map(|(m, t)| grid.grad(m, t))
            .collect::<Result<_>>()?,
    })
}

fn check_species(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::SpeciesMismatch { expected, found });
    }
    Ok(())
}

/// Modulating functions frozen at a state.
#[derive(Debug, Clone, PartialEq)]
pub struct Modulators {
    /// `r_s = gamma_s grad(T)`, `gamma_s = lambda / T^2`.
    pub r_s: FaceField,
    /// `r_ci = gamma_c grad(mu_i)`, `gamma_c = d_i / T`.
    pub r_c: Vec<FaceField>,
    pub g_s: f64,
    /// Face temperature in `1/T` factors: harmonic mean inside, trace on the boundary.
    pub t_face: FaceField,
    /// Companion factor of `t_face` in `1/T^2`: equal to `t_face` inside,
    /// adjacent cell temperature on boundary faces.
    pub t_inner: FaceField,
}

impl Modulators {
    pub fn n_species(&self) -> usize {
        self.r_c.len()
    }

    /// Modulators of a pure heat-conduction structure with a prescribed `r_s`.
    pub fn from_parts(r_s: FaceField, r_c: Vec<FaceField>, t_face: FaceField, t_inner: FaceField) -> Self {
        Modulators { r_s, r_c, g_s: 1.0, t_face, t_inner }
    }
}

pub fn modulators(
    grid: &MimeticGrid,
    coe: &CoEnergyFields,
    forces: &DrivingForces,
    traces: &Traces,
    model: &ConstitutiveModel,
) -> Result<Modulators> {
    check_species(model.n_species(), coe.n_species())?;
    check_species(model.n_species(), forces.grad_mu.len())?;
    let t = &coe.temperature.0;
    let mut t_face = grid.zero_faces();
    let mut t_inner = grid.zero_faces();
    for axis in 0..grid.dim() {
        for k in 0..grid.face_count(axis) {
            if let (Some(lo), Some(hi)) = grid.face_cells(axis, k) {
                let (a, b) = (t[lo], t[hi]);
                if !(a > 0.0 && b > 0.0) {
                    return Err(Error::ConstitutiveViolation {
                        location: format!("face {k} of axis {axis}"),
                        value: a.min(b),
                    });
                }
                let h = 2.0 * a * b / (a + b);
                t_face.axes[axis][k] = h;
                t_inner.axes[axis][k] = h;
            }
        }
    }
    for (b, bf) in grid.boundary_faces().iter().enumerate() {
        let tb = traces.temperature.0[b];
        if !(tb.is_finite() && tb > 0.0) {
            return Err(Error::ConstitutiveViolation {
                location: format!("boundary face {b} (axis {}, {:?})", bf.axis, bf.side),
                value: tb,
            });
        }
        t_face.axes[bf.axis][bf.face] = tb;
        t_inner.axes[bf.axis][bf.face] = t[bf.cell];
    }
    let lambda = model.lambda;
    let r_s = forces
        .grad_t
        .zip_with(&t_face, |g, tf| g / tf)
        .zip_with(&t_inner, |q, ti| lambda * q / ti);
    let r_c = model
        .species
        .iter()
        .zip(&forces.grad_mu)
        .map(|(sp, g)| g.zip_with(&t_face, |gi, tf| sp.diffusivity * gi / tf))
        .collect();
    Ok(Modulators { r_s, r_c, g_s: 1.0, t_face, t_inner })
}

/// Rates of the extensive variables `[dc_1/dt, ..., dc_n/dt, ds/dt]`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateRate {
    pub concentrations: Vec<ScalarField>,
    pub entropy: ScalarField,
}

impl StateRate {
    pub fn zero(grid: &MimeticGrid, n_species: usize) -> Self {
        StateRate {
            concentrations: vec![grid.zero_scalar(); n_species],
            entropy: grid.zero_scalar(),
        }
    }

    pub fn to_vector(&self) -> Vec<f64> {
        let mut v = Vec::new();
        for c in &self.concentrations {
            v.extend_from_slice(&c.0);
        }
        v.extend_from_slice(&self.entropy.0);
        v
    }

    pub fn max_abs_diff(&self, other: &StateRate) -> f64 {
        self.to_vector()
            .iter()
            .zip(other.to_vector())
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

/// `Psi(e_T) = g_s r_s . grad(e_T) + div(g_s r_s e_T)`.
pub fn apply_psi(grid: &MimeticGrid, e_t: &ScalarField, trace_t: &BoundaryField, mods: &Modulators) -> Result<ScalarField> {
    let grad = grid.grad(e_t, trace_t)?;
    let interp = grid.interpolate(e_t, trace_t)?;
    let g_s = mods.g_s;
    let mut out = grid.average_to_cells(&grad.zip_with(&mods.r_s, |g, r| g_s * r * g))?;
    out.add_assign(&grid.div(&interp.zip_with(&mods.r_s, |e, r| g_s * r * e))?);
    Ok(out)
}

/// `J_glob e`: species rows `div(r_ci e_T)`, entropy row
/// `sum_i r_ci . grad(e_mu_i) + Psi(e_T)`.
pub fn apply_jglob(grid: &MimeticGrid, e: &CoEnergyFields, traces: &Traces, mods: &Modulators) -> Result<StateRate> {
    check_species(mods.n_species(), e.n_species())?;
    check_species(mods.n_species(), traces.n_species())?;
    let interp_t = grid.interpolate(&e.temperature, &traces.temperature)?;
    let mut concentrations = Vec::with_capacity(e.n_species());
    let mut coupling = grid.zero_faces();
    for ((r, mu), tr) in mods.r_c.iter().zip(&e.potentials).zip(&traces.potentials) {
        concentrations.push(grid.div(&r.product(&interp_t))?);
        coupling.add_assign(&r.product(&grid.grad(mu, tr)?));
    }
    let mut entropy = grid.average_to_cells(&coupling)?;
    entropy.add_assign(&apply_psi(grid, &e.temperature, &traces.temperature, mods)?);
    Ok(StateRate { concentrations, entropy })
}

/// `R_1`: scalar cell field to the stack of face fields `[r_c1 theta, ..., r_cn theta]`.
#[derive(Debug, Clone, Copy)]
pub struct SpeciesModulation<'a> {
    pub r_c: &'a [FaceField],
}

impl SpeciesModulation<'_> {
    pub fn apply(&self, grid: &MimeticGrid, theta: &ScalarField, trace: &BoundaryField) -> Result<Vec<FaceField>> {
        let face = grid.interpolate(theta, trace)?;
        Ok(self.r_c.iter().map(|r| r.product(&face)).collect())
    }

    /// `R_1^*`: `[g_1, ..., g_n]` to `sum_i r_ci . g_i` on cells.
    pub fn adjoint(&self, grid: &MimeticGrid, g: &[FaceField]) -> Result<ScalarField> {
        check_species(self.r_c.len(), g.len())?;
        let mut acc = grid.zero_faces();
        for (r, gi) in self.r_c.iter().zip(g) {
            acc.add_assign(&r.product(gi));
        }
        grid.average_to_cells(&acc)
    }
}

/// `G_1`: componentwise divergence of a stack of face fields.
#[derive(Debug, Clone, Copy, Default)]
pub struct SpeciesDivergence;

impl SpeciesDivergence {
    pub fn apply(&self, grid: &MimeticGrid, fields: &[FaceField]) -> Result<Vec<ScalarField>> {
        fields.iter().map(|f| grid.div(f)).collect()
    }

    /// `G_1^*`: `[d_1, ..., d_n]` to `[-grad(d_1), ..., -grad(d_n)]`.
    pub fn adjoint(&self, grid: &MimeticGrid, fields: &[ScalarField], traces: &[BoundaryField]) -> Result<Vec<FaceField>> {
        fields
            .iter()
            .zip(traces)
            .map(|(d, t)| Ok(grid.grad(d, t)?.map(|v| -v)))
            .collect()
    }
}

/// `J_glob` through the factorization `[[0, G_1 R_1], [-R_1^* G_1^*, Psi]]`.
pub fn factorized_jglob(grid: &MimeticGrid, e: &CoEnergyFields, traces: &Traces, mods: &Modulators) -> Result<StateRate> {
    check_species(mods.n_species(), e.n_species())?;
    check_species(mods.n_species(), traces.n_species())?;
    let r1 = SpeciesModulation { r_c: &mods.r_c };
    let g1 = SpeciesDivergence;
    let concentrations = g1.apply(grid, &r1.apply(grid, &e.temperature, &traces.temperature)?)?;
    let g1_adj = g1.adjoint(grid, &e.potentials, &traces.potentials)?;
    let mut entropy = r1.adjoint(grid, &g1_adj)?.map(|v| -v);
    entropy.add_assign(&apply_psi(grid, &e.temperature, &traces.temperature, mods)?);
    Ok(StateRate { concentrations, entropy })
}

/// Entropy productions on faces and cells.
#[derive(Debug, Clone, PartialEq)]
pub struct EntropyProduction {
    /// `sigma_s = g_s r_s . grad(T)` on faces.
    pub face_sigma_s: FaceField,
    /// `sigma_ci = r_ci . grad(mu_i)` on faces.
    pub face_sigma_c: Vec<FaceField>,
    pub sigma_s: ScalarField,
    pub sigma_c: Vec<ScalarField>,
}

impl EntropyProduction {
    /// Smallest cell value over all productions.
    pub fn min_cell(&self) -> f64 {
        self.sigma_s
            .0
            .iter()
            .chain(self.sigma_c.iter().flat_map(|s| s.0.iter()))
            .fold(f64::INFINITY, |m, &v| m.min(v))
    }

    /// Cell field `sigma_s + sum_i sigma_ci`.
    pub fn total(&self) -> ScalarField {
        let mut t = self.sigma_s.clone();
        for s in &self.sigma_c {
            t.add_assign(s);
        }
        t
    }
}

pub fn entropy_production(grid: &MimeticGrid, forces: &DrivingForces, mods: &Modulators) -> Result<EntropyProduction> {
    check_species(mods.n_species(), forces.grad_mu.len())?;
    let g_s = mods.g_s;
    let face_sigma_s = mods.r_s.zip_with(&forces.grad_t, |r, g| g_s * r * g);
    let face_sigma_c: Vec<FaceField> = mods.r_c.iter().zip(&forces.grad_mu).map(|(r, g)| r.product(g)).collect();
    let sigma_s = grid.average_to_cells(&face_sigma_s)?;
    let sigma_c = face_sigma_c.iter().map(|f| grid.average_to_cells(f)).collect::<Result<_>>()?;
    Ok(EntropyProduction { face_sigma_s, face_sigma_c, sigma_s, sigma_c })
}

/// Heat, entropy and molar fluxes on faces.
#[derive(Debug, Clone, PartialEq)]
pub struct Fluxes {
    /// `f_Q = -lambda grad(T)`.
    pub heat: FaceField,
    /// `f_s = f_Q / T_face`.
    pub entropy: FaceField,
    /// `f_ci = -d_i grad(mu_i)`.
    pub species: Vec<FaceField>,
}

pub fn fluxes(forces: &DrivingForces, mods: &Modulators, model: &ConstitutiveModel) -> Result<Fluxes> {
    check_species(model.n_species(), forces.grad_mu.len())?;
    let lambda = model.lambda;
    let heat = forces.grad_t.map(|g| -lambda * g);
    let entropy = heat.zip_with(&mods.t_face, |q, t| q / t);
    let species = model
        .species
        .iter()
        .zip(&forces.grad_mu)
        .map(|(sp, g)| g.map(|v| -sp.diffusivity * v))
        .collect();
    Ok(Fluxes { heat, entropy, species })
}

/// Additional block of the general structure, e.g. a local `P_0` coupling or
/// a first-order `J_1 = -J_1^*`. Implementations must be skew-symmetric in
/// the cell inner product for zero traces.
pub trait StructureBlock {
    fn apply(&self, grid: &MimeticGrid, e: &CoEnergyFields, traces: &Traces, out: &mut StateRate) -> Result<()>;
}

/// Cellwise `dc/dt += P_0 mu` with `P_0 = -P_0^T`.
#[derive(Debug, Clone)]
pub struct LocalSkewCoupling {
    p0: DMatrix<f64>,
}

impl LocalSkewCoupling {
    pub fn new(p0: DMatrix<f64>) -> Result<Self> {
        if !p0.is_square() {
            return Err(Error::Structure("P_0 must be square".into()));
        }
        let defect = (&p0 + p0.transpose()).amax();
        if defect > 1e-14 * p0.amax().max(1.0) {
            return Err(Error::Structure(format!("P_0 is not skew-symmetric (defect {defect:e})")));
        }
        Ok(LocalSkewCoupling { p0 })
    }
}

impl StructureBlock for LocalSkewCoupling {
    fn apply(&self, _grid: &MimeticGrid, e: &CoEnergyFields, _traces: &Traces, out: &mut StateRate) -> Result<()> {
        let n = self.p0.nrows();
        check_species(n, e.n_species())?;
        for i in 0..n {
            for j in 0..n {
                let p = self.p0[(i, j)];
                if p != 0.0 {
                    for (o, m) in out.concentrations[i].0.iter_mut().zip(&e.potentials[j].0) {
                        *o += p * m;
                    }
                }
            }
        }
        Ok(())
    }
}

/// The discrete structure frozen at a state: `J_glob` plus optional blocks.
pub struct AssembledStructure<'a> {
    pub grid: &'a MimeticGrid,
    pub mods: Modulators,
    pub traces: Traces,
    blocks: Vec<Box<dyn StructureBlock + 'a>>,
}

impl<'a> AssembledStructure<'a> {
    pub fn new(grid: &'a MimeticGrid, mods: Modulators, traces: Traces) -> Result<Self> {
        check_species(mods.n_species(), traces.n_species())?;
        Ok(AssembledStructure { grid, mods, traces, blocks: Vec::new() })
    }

    /// Assembles the structure at the co-energy `coe` with boundary `traces`.
    pub fn at_state(grid: &'a MimeticGrid, coe: &CoEnergyFields, traces: Traces, model: &ConstitutiveModel) -> Result<Self> {
        let forces = driving_forces(grid, coe, &traces)?;
        let mods = modulators(grid, coe, &forces, &traces, model)?;
        Self::new(grid, mods, traces)
    }

    pub fn with_block(mut self, block: impl StructureBlock + 'a) -> Self {
        self.blocks.push(Box::new(block));
        self
    }

    pub fn n_species(&self) -> usize {
        self.mods.n_species()
    }

    pub fn apply(&self, e: &CoEnergyFields) -> Result<StateRate> {
        self.apply_with_traces(e, &self.traces)
    }

    pub fn apply_with_traces(&self, e: &CoEnergyFields, traces: &Traces) -> Result<StateRate> {
        let mut out = apply_jglob(self.grid, e, traces, &self.mods)?;
        for b in &self.blocks {
            b.apply(self.grid, e, traces, &mut out)?;
        }
        Ok(out)
    }

    /// Dense matrix of the linear map `e -> J e` with zero traces, assembled
    /// column by column from unit probes. Unknowns are ordered
    /// `[mu_1, ..., mu_n, T]`, matching the rate ordering.
    pub fn dense_matrix(&self) -> Result<DMatrix<f64>> {
        let n = self.n_species();
        let cells = self.grid.cell_count();
        let size = (n + 1) * cells;
        let zero = Traces::zero(self.grid, n);
        let mut a = DMatrix::zeros(size, size);
        let mut probe = vec![0.0; size];
        for col in 0..size {
            probe[col] = 1.0;
            let e = CoEnergyFields::from_vector(&probe, n);
            let out = self.apply_with_traces(&e, &zero)?.to_vector();
            a.column_mut(col).copy_from_slice(&out);
            probe[col] = 0.0;
        }
        Ok(a)
    }

    /// Probe-assembled dense matrix written as `row,col,value` CSV (zeros skipped).
    pub fn dense_csv(&self) -> Result<String> {
        let a = self.dense_matrix()?;
        let mut s = String::from("row,col,value\n");
        for j in 0..a.ncols() {
            for i in 0..a.nrows() {
                let v = a[(i, j)];
                if v != 0.0 {
                    let _ = writeln!(s, "{i},{j},{v:e}");
                }
            }
        }
        Ok(s)
    }
}

/// `(|A + A^T|_inf, |A|_inf)` with the induced infinity norm (max row sum).
pub fn skew_defect(a: &DMatrix<f64>) -> (f64, f64) {
    let sym = a + a.transpose();
    (row_sum_norm(&sym), row_sum_norm(a))
}

fn row_sum_norm(a: &DMatrix<f64>) -> f64 {
    a.row_iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}
