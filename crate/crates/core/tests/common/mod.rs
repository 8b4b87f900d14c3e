#![allow(dead_code)]

use iphs_core::constitutive::{ConstitutiveModel, SpeciesParameters, ThermoState};
use iphs_core::mesh::{BoundaryField, MimeticGrid, ScalarField};
use rand::rngs::StdRng;
use rand::Rng;

pub fn model(n_species: usize, rng: &mut StdRng) -> ConstitutiveModel {
    let species = (0..n_species)
        .map(|_| SpeciesParameters { alpha: rng.gen_range(0.5..3.0), diffusivity: rng.gen_range(0.1..2.0) })
        .collect();
    ConstitutiveModel::new(rng.gen_range(0.5..2.0), rng.gen_range(0.5..2.0), rng.gen_range(0.1..2.0), species).unwrap()
}

/// Random state with temperatures in `[0.5, 2] * T_ref`.
pub fn state(grid: &MimeticGrid, model: &ConstitutiveModel, rng: &mut StdRng) -> ThermoState {
    let cells = grid.cell_count();
    let concentrations = (0..model.n_species()).map(|_| random_cells(cells, -1.0, 1.0, rng)).collect();
    let entropy = ScalarField(
        (0..cells)
            .map(|_| model.entropy_for_temperature(model.t_ref * rng.gen_range(0.5..2.0)).unwrap())
            .collect(),
    );
    ThermoState::new(concentrations, entropy, 0.0).unwrap()
}

pub fn random_cells(n: usize, lo: f64, hi: f64, rng: &mut StdRng) -> ScalarField {
    ScalarField((0..n).map(|_| rng.gen_range(lo..hi)).collect())
}

pub fn random_boundary(n: usize, lo: f64, hi: f64, rng: &mut StdRng) -> BoundaryField {
    BoundaryField((0..n).map(|_| rng.gen_range(lo..hi)).collect())
}

pub fn grids() -> Vec<MimeticGrid> {
    vec![
        MimeticGrid::new_1d(16, 0.0, 1.0).unwrap(),
        MimeticGrid::new_1d(32, -0.5, 1.5).unwrap(),
        MimeticGrid::new_2d([8, 8], [[0.0, 1.0], [0.0, 1.0]]).unwrap(),
        MimeticGrid::new_2d([16, 16], [[0.0, 2.0], [0.0, 1.0]]).unwrap(),
    ]
}

/// Least-squares slope of `log(err)` against `log(h)`.
pub fn slope(h: &[f64], err: &[f64]) -> f64 {
    let x: Vec<f64> = h.iter().map(|v| v.ln()).collect();
    let y: Vec<f64> = err.iter().map(|v| v.ln()).collect();
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let num: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let den: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    num / den
}
