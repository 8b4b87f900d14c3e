//! Boundary port variables.
//!
//! In 1D the ports are linear maps of the modified effort stacked at both
//! ends of the interval,
//!
//! ```text
//! v = W_B [e(b); e(a)],   y = W_C [e(b); e(a)],   e = [dH/dx; T; R_1 T; r_s T]
//! ```
//!
//! built from the block matrix of the structure, a basis `M` of its column
//! space and a pair `(Xi_1, Xi_2)`. In N dimensions the ports are collocated
//! pairs of boundary fields (energy, entropy and one per species).
//!
//! Two conventions fix the 1D construction:
//!
//! - [`build_pe`] returns the boundary power form, `y'v = e(b)' P_e e(b) - e(a)' P_e e(a)`,
//!   which is [`POWER_FORM_SCALE`] times the block matrix. The synthesis works
//!   on the block matrix itself ([`structure_block_matrix`]).
//! - `M` holds the pivot columns of the block matrix found by a
//!   column-pivoted QR, ordered by the row of their leading entry.

use nalgebra::{DMatrix, DVector};

use crate::constitutive::CoEnergyFields;
use crate::mesh::{BoundaryField, MimeticGrid, Side};
use crate::operators::{Fluxes, Modulators, Traces};
use crate::{Error, Result};

/// Ratio between the boundary power form `P_e` and the block matrix used to
/// build `W_B`, `W_C`.
pub const POWER_FORM_SCALE: f64 = 0.5;

/// Pivot threshold relative to the spectral norm of the block matrix.
pub const RANK_TOLERANCE: f64 = 1e-12;

/// Singular values in this band (relative to the norm) make the rank ambiguous.
pub const AMBIGUOUS_BAND: (f64, f64) = (1e-14, 1e-10);

/// Tolerance on the `Xi` conditions.
pub const XI_TOLERANCE: f64 = 1e-13;

/// Constant matrices of a 1D IPHS.
#[derive(Debug, Clone, PartialEq)]
pub struct StructureMatrices1D {
    pub p0: DMatrix<f64>,
    pub p1: DMatrix<f64>,
    pub g0: DMatrix<f64>,
    pub g1: DMatrix<f64>,
    pub g_s: f64,
}

impl StructureMatrices1D {
    pub fn new(p0: DMatrix<f64>, p1: DMatrix<f64>, g0: DMatrix<f64>, g1: DMatrix<f64>, g_s: f64) -> Result<Self> {
        let n = p1.nrows();
        let m = g1.ncols();
        let shape = |name: &str, a: &DMatrix<f64>, r: usize, c: usize| {
            if a.shape() != (r, c) {
                Err(Error::Structure(format!("{name} has shape {:?}, expected ({r}, {c})", a.shape())))
            } else {
                Ok(())
            }
        };
        shape("P1", &p1, n, n)?;
        shape("P0", &p0, n, n)?;
        shape("G1", &g1, n, m)?;
        shape("G0", &g0, n, m)?;
        if m > n {
            return Err(Error::Structure(format!("m = {m} exceeds n = {n}")));
        }
        if (&p0 + p0.transpose()).amax() > 1e-14 {
            return Err(Error::Structure("P0 is not skew-symmetric".into()));
        }
        if (&p1 - p1.transpose()).amax() > 1e-14 {
            return Err(Error::Structure("P1 is not symmetric".into()));
        }
        if !g_s.is_finite() {
            return Err(Error::Structure(format!("g_s = {g_s} is not finite")));
        }
        Ok(StructureMatrices1D { p0, p1, g0, g1, g_s })
    }

    /// 1D heat equation: `n = m = 1`, all matrices zero, `g_s = 1`.
    pub fn heat() -> Self {
        let z = DMatrix::zeros(1, 1);
        StructureMatrices1D { p0: z.clone(), p1: z.clone(), g0: z.clone(), g1: z, g_s: 1.0 }
    }

    /// Conduction with `n` diffusing species: `P_1 = 0`, `G_1 = I_n`, `g_s = 1`.
    pub fn conduction_diffusion(n_species: usize) -> Self {
        let z = DMatrix::zeros(n_species, n_species);
        StructureMatrices1D {
            p0: z.clone(),
            p1: z.clone(),
            g0: z,
            g1: DMatrix::identity(n_species, n_species),
            g_s: 1.0,
        }
    }

    pub fn n(&self) -> usize {
        self.p1.nrows()
    }

    pub fn m(&self) -> usize {
        self.g1.ncols()
    }

    /// Length `n + m + 2` of the modified effort.
    pub fn effort_len(&self) -> usize {
        self.n() + self.m() + 2
    }
}

/// Block matrix `[[P1, 0, G1, 0], [0, 0, 0, g_s], [G1', 0, 0, 0], [0, g_s, 0, 0]]`
/// acting on `[x-efforts (n), T, R_1 T (m), r_s T]`.
pub fn structure_block_matrix(sm: &StructureMatrices1D) -> DMatrix<f64> {
    let (n, m) = (sm.n(), sm.m());
    let size = n + m + 2;
    let mut b = DMatrix::zeros(size, size);
    b.view_mut((0, 0), (n, n)).copy_from(&sm.p1);
    b.view_mut((0, n + 1), (n, m)).copy_from(&sm.g1);
    b.view_mut((n + 1, 0), (m, n)).copy_from(&sm.g1.transpose());
    b[(n, n + m + 1)] = sm.g_s;
    b[(n + m + 1, n)] = sm.g_s;
    b
}

/// Boundary power form `P_e = POWER_FORM_SCALE * block matrix`.
pub fn build_pe(sm: &StructureMatrices1D) -> DMatrix<f64> {
    structure_block_matrix(sm) * POWER_FORM_SCALE
}

/// Drops rows and columns that are identically zero.
pub fn active_block(a: &DMatrix<f64>) -> DMatrix<f64> {
    let keep: Vec<usize> = (0..a.nrows())
        .filter(|&i| a.row(i).iter().any(|&v| v != 0.0) || a.column(i).iter().any(|&v| v != 0.0))
        .collect();
    DMatrix::from_fn(keep.len(), keep.len(), |i, j| a[(keep[i], keep[j])])
}

/// `(|Xi2'Xi1 + Xi1'Xi2|_max, |Xi2'Xi2 + Xi1'Xi1 - I|_max)`.
pub fn xi_residuals(xi1: &DMatrix<f64>, xi2: &DMatrix<f64>) -> (f64, f64) {
    let skew = (xi2.transpose() * xi1 + xi1.transpose() * xi2).amax();
    let k = xi1.ncols();
    let ident = (xi2.transpose() * xi2 + xi1.transpose() * xi1 - DMatrix::<f64>::identity(k, k)).amax();
    (skew, ident)
}

/// The `(Xi_1, Xi_2)` pair of the 1D heat example.
pub fn heat_xi() -> (DMatrix<f64>, DMatrix<f64>) {
    paired_xi(1)
}

/// Block generalization of [`heat_xi`] for `k = 2p`: with `P_ep` swapping
/// efforts and flux slots, `v` collects the fluxes (`+` at `b`, `-` at `a`)
/// and `y` the efforts.
pub fn paired_xi(p: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut xi1 = DMatrix::zeros(2 * p, 2 * p);
    let mut xi2 = DMatrix::zeros(2 * p, 2 * p);
    for i in 0..p {
        xi1[(i, i)] = s;
        xi1[(p + i, i)] = s;
        xi2[(i, p + i)] = s;
        xi2[(p + i, p + i)] = -s;
    }
    (xi1, xi2)
}

/// Result of the boundary port synthesis.
#[derive(Debug, Clone, PartialEq)]
pub struct PortSynthesis {
    /// Boundary power form.
    pub pe: DMatrix<f64>,
    pub rank: usize,
    pub m: DMatrix<f64>,
    pub m_p: DMatrix<f64>,
    pub p_ep: DMatrix<f64>,
    pub xi1: DMatrix<f64>,
    pub xi2: DMatrix<f64>,
    pub w_b: DMatrix<f64>,
    pub w_c: DMatrix<f64>,
    /// Residuals of the `Xi` conditions.
    pub xi_residuals: (f64, f64),
    /// Columns of the block matrix selected for `M`, in order.
    pub pivots: Vec<usize>,
}

impl PortSynthesis {
    fn stacked(&self, e_b: &DVector<f64>, e_a: &DVector<f64>) -> Result<DVector<f64>> {
        let len = self.pe.nrows();
        if e_b.len() != len || e_a.len() != len {
            return Err(Error::DimensionMismatch { what: "modified effort", expected: len, found: e_b.len().max(e_a.len()) });
        }
        let mut s = DVector::zeros(2 * len);
        s.rows_mut(0, len).copy_from(e_b);
        s.rows_mut(len, len).copy_from(e_a);
        Ok(s)
    }

    /// `v = W_B [e(b); e(a)]`.
    pub fn inputs(&self, e_b: &DVector<f64>, e_a: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(&self.w_b * self.stacked(e_b, e_a)?)
    }

    /// `y = W_C [e(b); e(a)]`.
    pub fn outputs(&self, e_b: &DVector<f64>, e_a: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(&self.w_c * self.stacked(e_b, e_a)?)
    }
}

pub fn synthesize_ports(sm: &StructureMatrices1D, xi1: &DMatrix<f64>, xi2: &DMatrix<f64>) -> Result<PortSynthesis> {
    let block = structure_block_matrix(sm);
    let size = block.nrows();
    let svd = block.clone().svd(false, false);
    let norm = svd.singular_values.iter().copied().fold(0.0, f64::max);

    let pivots = if norm == 0.0 {
        Vec::new()
    } else {
        for &sv in svd.singular_values.iter() {
            let rel = sv / norm;
            if rel > AMBIGUOUS_BAND.0 && rel < AMBIGUOUS_BAND.1 {
                return Err(Error::RankAmbiguous { singular_value: sv, norm });
            }
        }
        let qr = block.clone().col_piv_qr();
        let r = qr.r();
        let rank = (0..size.min(r.nrows())).take_while(|&i| r[(i, i)].abs() > RANK_TOLERANCE * norm).count();
        let mut order = DMatrix::from_fn(1, size, |_, j| j as f64);
        qr.p().permute_columns(&mut order);
        let threshold = RANK_TOLERANCE * norm;
        let mut pivots: Vec<usize> = order.iter().take(rank).map(|&j| j as usize).collect();
        let leading_row = |j: usize| block.column(j).iter().position(|v| v.abs() > threshold).unwrap_or(size);
        pivots.sort_by_key(|&j| (leading_row(j), j));
        pivots
    };
    let rank = pivots.len();

    if xi1.shape() != (rank, rank) || xi2.shape() != (rank, rank) {
        return Err(Error::Structure(format!(
            "Xi matrices must be {rank}x{rank}, got {:?} and {:?}",
            xi1.shape(),
            xi2.shape()
        )));
    }
    let (skew, ident) = xi_residuals(xi1, xi2);
    if skew > XI_TOLERANCE || ident > XI_TOLERANCE {
        return Err(Error::XiViolation { skew_residual: skew, identity_residual: ident });
    }

    let m = DMatrix::from_fn(size, rank, |i, j| block[(i, pivots[j])]);
    let gram = m.transpose() * &m;
    let m_p = match gram.clone().try_inverse() {
        Some(inv) => inv * m.transpose(),
        None if rank == 0 => DMatrix::zeros(0, size),
        None => return Err(Error::Structure("basis M is singular".into())),
    };
    let p_ep = m.transpose() * &block * &m;

    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut w_b = DMatrix::zeros(rank, 2 * size);
    let mut w_c = DMatrix::zeros(rank, 2 * size);
    w_b.view_mut((0, 0), (rank, size)).copy_from(&((xi2 + xi1 * &p_ep) * &m_p * s));
    w_b.view_mut((0, size), (rank, size)).copy_from(&((xi2 - xi1 * &p_ep) * &m_p * s));
    w_c.view_mut((0, 0), (rank, size)).copy_from(&((xi1 + xi2 * &p_ep) * &m_p * s));
    w_c.view_mut((0, size), (rank, size)).copy_from(&((xi1 - xi2 * &p_ep) * &m_p * s));

    Ok(PortSynthesis {
        pe: block * POWER_FORM_SCALE,
        rank,
        m,
        m_p,
        p_ep,
        xi1: xi1.clone(),
        xi2: xi2.clone(),
        w_b,
        w_c,
        xi_residuals: (skew, ident),
        pivots,
    })
}

/// Modified effort at one end of a 1D domain.
///
/// Each bilinear term of the discrete boundary power pairs a trace with the
/// value in the adjacent cell, so the slots are filled accordingly:
/// `T` with the temperature trace, `R_1 T` with `r_ci T_trace` (the wall
/// molar flux), `r_s T` with `r_s T_adjacent` (the wall entropy flux) and
/// the x-efforts with the adjacent chemical potentials.
#[derive(Debug, Clone, PartialEq)]
pub struct ModifiedEffort {
    pub potentials: Vec<f64>,
    pub temperature: f64,
    pub species_flux: Vec<f64>,
    pub entropy_flux: f64,
}

impl ModifiedEffort {
    /// Stacks into the `n + m + 2` layout of `sm`, zero-padding x-efforts and
    /// `R_1` slots that the state does not populate.
    pub fn stack(&self, sm: &StructureMatrices1D) -> Result<DVector<f64>> {
        let (n, m) = (sm.n(), sm.m());
        if self.potentials.len() > n || self.species_flux.len() > m {
            return Err(Error::SpeciesMismatch { expected: n.min(m), found: self.potentials.len() });
        }
        let mut e = DVector::zeros(n + m + 2);
        for (i, v) in self.potentials.iter().enumerate() {
            e[i] = *v;
        }
        e[n] = self.temperature;
        for (i, v) in self.species_flux.iter().enumerate() {
            e[n + 1 + i] = *v;
        }
        e[n + m + 1] = self.entropy_flux;
        Ok(e)
    }
}

pub fn modified_effort(
    grid: &MimeticGrid,
    coe: &CoEnergyFields,
    traces: &Traces,
    mods: &Modulators,
    side: Side,
) -> Result<ModifiedEffort> {
    if grid.dim() != 1 {
        return Err(Error::InvalidGrid("modified effort is defined on 1D grids".into()));
    }
    let (b, bf) = grid
        .boundary_faces()
        .iter()
        .enumerate()
        .find(|(_, bf)| bf.side == side)
        .expect("1D grids have two boundary faces");
    let t_trace = traces.temperature.0[b];
    let t_adj = coe.temperature.0[bf.cell];
    let r_s = mods.r_s.axes[0][bf.face];
    let location = || format!("{side:?} end");
    if !r_s.is_finite() {
        return Err(Error::UndefinedModulator { location: location(), reason: format!("r_s = {r_s}") });
    }
    let species_flux = mods
        .r_c
        .iter()
        .map(|r| {
            let v = r.axes[0][bf.face];
            if v.is_finite() {
                Ok(mods.g_s * v * t_trace)
            } else {
                Err(Error::UndefinedModulator { location: location(), reason: format!("r_c = {v}") })
            }
        })
        .collect::<Result<_>>()?;
    Ok(ModifiedEffort {
        potentials: coe.potentials.iter().map(|m| m.0[bf.cell]).collect(),
        temperature: t_trace,
        species_flux,
        entropy_flux: mods.g_s * r_s * t_adj,
    })
}

/// Collocated boundary input/output fields.
#[derive(Debug, Clone, PartialEq)]
pub struct PortPair {
    pub input: BoundaryField,
    pub output: BoundaryField,
}

impl PortPair {
    /// `sum_faces y u |face|`.
    pub fn power(&self, grid: &MimeticGrid) -> Result<f64> {
        grid.boundary_integral(&self.output, &self.input)
    }
}

/// Energy, entropy and species port pairs on every boundary face.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryPorts {
    /// `(-f_s . n, T_trace)`.
    pub energy: PortPair,
    /// `(-f_Q . n, 1 / T_adjacent)`.
    pub entropy: PortPair,
    /// `(-f_ci . n, mu_i adjacent)`.
    pub species: Vec<PortPair>,
}

impl BoundaryPorts {
    /// Power entering through the boundary: thermal plus chemical.
    pub fn energy_power(&self, grid: &MimeticGrid) -> Result<f64> {
        let mut p = self.energy.power(grid)?;
        for s in &self.species {
            p += s.power(grid)?;
        }
        Ok(p)
    }

    /// Entropy entering through the boundary.
    pub fn entropy_flow(&self, grid: &MimeticGrid) -> Result<f64> {
        self.entropy.power(grid)
    }
}

pub fn nd_port_pairs(grid: &MimeticGrid, coe: &CoEnergyFields, traces: &Traces, fluxes: &Fluxes) -> Result<BoundaryPorts> {
    let inward = |f| grid.normal_trace(f).map(|t| t.map(|v| -v));
    let t_adj = grid.adjacent_values(&coe.temperature)?;
    Ok(BoundaryPorts {
        energy: PortPair { input: inward(&fluxes.entropy)?, output: traces.temperature.clone() },
        entropy: PortPair { input: inward(&fluxes.heat)?, output: t_adj.map(|t| 1.0 / t) },
        species: fluxes
            .species
            .iter()
            .zip(&coe.potentials)
            .map(|(f, mu)| Ok(PortPair { input: inward(f)?, output: grid.adjacent_values(mu)? }))
            .collect::<Result<_>>()?,
    })
}
