//! Thermodynamic state and the constitutive law.
//!
//! The internal energy density is
//!
//! ```text
//! u(c, s) = sum_i (alpha_i / 2) c_i^2 + c_v T_ref exp(s / c_v)
//! ```
//!
//! so that the Gibbs relations give `T = du/ds = T_ref exp(s / c_v) > 0` for
//! every finite `s` and `mu_i = du/dc_i = alpha_i c_i`.

use crate::mesh::{MimeticGrid, ScalarField};
use crate::{Error, Result};

/// Per-species parameters: chemical stiffness `alpha` and Fick diffusivity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpeciesParameters {
    pub alpha: f64,
    pub diffusivity: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstitutiveModel {
    /// Volumetric heat capacity.
    pub c_v: f64,
    /// Reference temperature (temperature at `s = 0`).
    pub t_ref: f64,
    /// Heat conductivity in Fourier's law.
    pub lambda: f64,
    pub species: Vec<SpeciesParameters>,
}

impl ConstitutiveModel {
    pub fn new(c_v: f64, t_ref: f64, lambda: f64, species: Vec<SpeciesParameters>) -> Result<Self> {
        let model = ConstitutiveModel { c_v, t_ref, lambda, species };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: String, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidModel(format!("{name} must be positive and finite, got {v}")))
            }
        };
        positive("c_v".into(), self.c_v)?;
        positive("t_ref".into(), self.t_ref)?;
        positive("lambda".into(), self.lambda)?;
        for (i, sp) in self.species.iter().enumerate() {
            positive(format!("alpha[{i}]"), sp.alpha)?;
            positive(format!("d[{i}]"), sp.diffusivity)?;
        }
        Ok(())
    }

    pub fn n_species(&self) -> usize {
        self.species.len()
    }

    /// `T(s) = T_ref exp(s / c_v)`.
    pub fn temperature(&self, s: f64) -> f64 {
        self.t_ref * (s / self.c_v).exp()
    }

    /// Inverse of [`temperature`](Self::temperature).
    pub fn entropy_for_temperature(&self, t: f64) -> Result<f64> {
        if !(t.is_finite() && t > 0.0) {
            return Err(Error::ConstitutiveViolation { location: "initial condition".into(), value: t });
        }
        Ok(self.c_v * (t / self.t_ref).ln())
    }

    /// `mu_i(c) = alpha_i c`.
    pub fn potential(&self, species: usize, c: f64) -> f64 {
        self.species[species].alpha * c
    }

    /// Inverse of [`potential`](Self::potential).
    pub fn concentration_for_potential(&self, species: usize, mu: f64) -> f64 {
        mu / self.species[species].alpha
    }

    fn check_species(&self, state: &ThermoState) -> Result<()> {
        if state.n_species() != self.n_species() {
            return Err(Error::SpeciesMismatch { expected: self.n_species(), found: state.n_species() });
        }
        Ok(())
    }

    /// Pointwise energy density `u(c, s)`.
    pub fn energy_density(&self, state: &ThermoState) -> Result<ScalarField> {
        self.check_species(state)?;
        state.check_finite()?;
        let mut u = state.entropy.map(|s| self.c_v * self.temperature(s));
        for (sp, c) in self.species.iter().zip(&state.concentrations) {
            for (ui, ci) in u.0.iter_mut().zip(&c.0) {
                *ui += 0.5 * sp.alpha * ci * ci;
            }
        }
        if let Some(cell) = u.0.iter().position(|v| !v.is_finite()) {
            return Err(Error::Saturation { cell, entropy: state.entropy.0[cell] });
        }
        Ok(u)
    }

    /// Gibbs co-energy maps `T = du/ds`, `mu_i = du/dc_i`.
    pub fn co_energy(&self, state: &ThermoState) -> Result<CoEnergyFields> {
        self.check_species(state)?;
        state.check_finite()?;
        let temperature = state.entropy.map(|s| self.temperature(s));
        for (cell, &t) in temperature.0.iter().enumerate() {
            if !t.is_finite() {
                return Err(Error::Saturation { cell, entropy: state.entropy.0[cell] });
            }
            if t <= 0.0 {
                return Err(Error::ConstitutiveViolation { location: format!("cell {cell}"), value: t });
            }
        }
        let potentials = self
            .species
            .iter()
            .zip(&state.concentrations)
            .map(|(sp, c)| c.map(|ci| sp.alpha * ci))
            .collect();
        Ok(CoEnergyFields { temperature, potentials })
    }

    /// Total internal energy `U = sum_cells u |cell|`.
    pub fn total_energy(&self, state: &ThermoState, grid: &MimeticGrid) -> Result<f64> {
        grid.integrate(&self.energy_density(state)?)
    }
}

/// Total entropy `S = sum_cells s |cell|`.
pub fn total_entropy(state: &ThermoState, grid: &MimeticGrid) -> Result<f64> {
    state.check_finite()?;
    grid.integrate(&state.entropy)
}

/// Extensive fields `x = [c_1, ..., c_n, s]` on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ThermoState {
    pub concentrations: Vec<ScalarField>,
    pub entropy: ScalarField,
    pub time: f64,
}

impl ThermoState {
    pub fn new(concentrations: Vec<ScalarField>, entropy: ScalarField, time: f64) -> Result<Self> {
        let state = ThermoState { concentrations, entropy, time };
        let cells = state.entropy.len();
        for c in &state.concentrations {
            if c.len() != cells {
                return Err(Error::DimensionMismatch { what: "concentration field", expected: cells, found: c.len() });
            }
        }
        state.check_finite()?;
        Ok(state)
    }

    pub fn n_species(&self) -> usize {
        self.concentrations.len()
    }

    pub fn cell_count(&self) -> usize {
        self.entropy.len()
    }

    pub fn check_finite(&self) -> Result<()> {
        if !self.time.is_finite() {
            return Err(Error::InvalidState(format!("time {} is not finite", self.time)));
        }
        for (i, c) in self.concentrations.iter().enumerate() {
            if let Some(cell) = c.0.iter().position(|v| !v.is_finite()) {
                return Err(Error::InvalidState(format!("concentration {i} not finite at cell {cell}")));
            }
        }
        if let Some(cell) = self.entropy.0.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidState(format!("entropy density not finite at cell {cell}")));
        }
        Ok(())
    }

    /// Flattened `[c_1, ..., c_n, s]`.
    pub fn to_vector(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity((self.n_species() + 1) * self.cell_count());
        for c in &self.concentrations {
            v.extend_from_slice(&c.0);
        }
        v.extend_from_slice(&self.entropy.0);
        v
    }

    /// Inverse of [`to_vector`](Self::to_vector).
    pub fn from_vector(v: &[f64], n_species: usize, time: f64) -> Result<Self> {
        let blocks = n_species + 1;
        if !v.len().is_multiple_of(blocks) {
            return Err(Error::DimensionMismatch { what: "state vector", expected: blocks * (v.len() / blocks), found: v.len() });
        }
        let cells = v.len() / blocks;
        let concentrations = (0..n_species).map(|i| ScalarField(v[i * cells..(i + 1) * cells].to_vec())).collect();
        let entropy = ScalarField(v[n_species * cells..].to_vec());
        ThermoState::new(concentrations, entropy, time)
    }
}

/// Co-energy (intensive) fields `e = [mu_1, ..., mu_n, T]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoEnergyFields {
    pub temperature: ScalarField,
    pub potentials: Vec<ScalarField>,
}

impl CoEnergyFields {
    pub fn n_species(&self) -> usize {
        self.potentials.len()
    }

    /// Flattened `[mu_1, ..., mu_n, T]`, matching [`ThermoState::to_vector`].
    pub fn to_vector(&self) -> Vec<f64> {
        let mut v = Vec::new();
        for m in &self.potentials {
            v.extend_from_slice(&m.0);
        }
        v.extend_from_slice(&self.temperature.0);
        v
    }

    pub fn from_vector(v: &[f64], n_species: usize) -> Self {
        let cells = v.len() / (n_species + 1);
        CoEnergyFields {
            potentials: (0..n_species).map(|i| ScalarField(v[i * cells..(i + 1) * cells].to_vec())).collect(),
            temperature: ScalarField(v[n_species * cells..].to_vec()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(c_v: f64, t_ref: f64, alpha: &[f64]) -> ConstitutiveModel {
        let species = alpha.iter().map(|&a| SpeciesParameters { alpha: a, diffusivity: 1.0 }).collect();
        ConstitutiveModel::new(c_v, t_ref, 1.0, species).unwrap()
    }

    fn state(c: &[f64], s: f64, cells: usize) -> ThermoState {
        let concs = c.iter().map(|&ci| ScalarField::uniform(cells, ci)).collect();
        ThermoState::new(concs, ScalarField::uniform(cells, s), 0.0).unwrap()
    }

    #[test]
    fn energy_density_reference_values() {
        let m = model(1.0, 1.0, &[1.0]);
        let u = m.energy_density(&state(&[0.0], 0.0, 3)).unwrap();
        assert_eq!(u.0, vec![1.0; 3]);

        let m = model(1.0, 1.0, &[3.0]);
        let u = m.energy_density(&state(&[2.0], 0.0, 2)).unwrap();
        assert_eq!(u.0, vec![7.0; 2]);

        // 600 exp(0.25), evaluated with mpmath at 40 digits
        let m = model(2.0, 300.0, &[1.0]);
        let u = m.energy_density(&state(&[0.0], 0.5, 1)).unwrap();
        let expected = 770.415_250_012_645;
        assert!((u.0[0] - expected).abs() <= 1e-14 * expected, "{}", u.0[0]);
    }

    #[test]
    fn co_energy_reference_values() {
        let m = model(1.5, 300.0, &[2.0]);
        let e = m.co_energy(&state(&[1.0], 0.0, 2)).unwrap();
        assert_eq!(e.temperature.0, vec![300.0; 2]);
        assert_eq!(e.potentials[0].0, vec![2.0; 2]);

        let e = m.co_energy(&state(&[0.0], 1.5 * std::f64::consts::LN_2, 1)).unwrap();
        assert!((e.temperature.0[0] - 600.0).abs() < 1e-12);
    }

    #[test]
    fn saturation_reports_cell() {
        let m = model(1.0, 1.0, &[]);
        let mut s = ScalarField::uniform(4, 0.0);
        s.0[2] = 1000.0;
        let st = ThermoState::new(vec![], s, 0.0).unwrap();
        match m.co_energy(&st) {
            Err(Error::Saturation { cell, .. }) => assert_eq!(cell, 2),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(m.energy_density(&st), Err(Error::Saturation { cell: 2, .. })));
    }

    #[test]
    fn invalid_inputs() {
        assert!(ConstitutiveModel::new(0.0, 1.0, 1.0, vec![]).is_err());
        assert!(ConstitutiveModel::new(1.0, 1.0, -1.0, vec![]).is_err());
        assert!(ConstitutiveModel::new(
            1.0,
            1.0,
            1.0,
            vec![SpeciesParameters { alpha: 1.0, diffusivity: 0.0 }]
        )
        .is_err());
        assert!(ThermoState::new(vec![], ScalarField(vec![f64::NAN]), 0.0).is_err());
        assert!(ThermoState::new(vec![ScalarField(vec![0.0])], ScalarField(vec![0.0; 2]), 0.0).is_err());
        let m = model(1.0, 1.0, &[1.0]);
        assert!(matches!(m.co_energy(&state(&[], 0.0, 2)), Err(Error::SpeciesMismatch { .. })));
    }

    #[test]
    fn totals_on_two_cell_grid() {
        let g = MimeticGrid::new_1d(2, 0.0, 1.0).unwrap();
        let m = model(1.0, 1.0, &[]);
        // u = exp(s): pick s so that u = [2, 4]
        let st = ThermoState::new(vec![], ScalarField(vec![2f64.ln(), 4f64.ln()]), 0.0).unwrap();
        assert!((m.total_energy(&st, &g).unwrap() - 3.0).abs() < 1e-15);
        let st = state(&[], 3.0, 2);
        assert_eq!(total_entropy(&st, &g).unwrap(), 3.0);
        assert_eq!(total_entropy(&state(&[], 0.0, 2), &g).unwrap(), 0.0);
    }

    #[test]
    fn vector_round_trip() {
        let st = ThermoState::new(
            vec![ScalarField(vec![1.0, 2.0]), ScalarField(vec![3.0, 4.0])],
            ScalarField(vec![5.0, 6.0]),
            0.5,
        )
        .unwrap();
        let v = st.to_vector();
        assert_eq!(v, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(ThermoState::from_vector(&v, 2, 0.5).unwrap(), st);
    }
}
