//! Acceptance checks: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use iphs_cli::scenario::Scenario;
use iphs_core::constitutive::{CoEnergyFields, ConstitutiveModel, SpeciesParameters, ThermoState};
use iphs_core::dynamics::{audit_first_law, audit_second_law, simulate, IphsSystem, TimeIntegrator, Trajectory};
use iphs_core::mesh::{BoundaryField, MimeticGrid, ScalarField};
use iphs_core::operators::{
    apply_jglob, apply_psi, driving_forces, factorized_jglob, modulators, skew_defect, AssembledStructure, Traces,
};
use iphs_core::ports::{heat_xi, synthesize_ports, StructureMatrices1D};
use nalgebra::DVector;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

type Outcome = Result<String, String>;

fn scenario(name: &str) -> Scenario {
    Scenario::load(&Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name)).expect("bundled scenario loads")
}

fn bundled() -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = std::fs::read_dir(Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios"))
        .expect("scenario directory")
        .map(|e| e.expect("directory entry").path())
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    v.sort();
    v
}

fn grids() -> Vec<MimeticGrid> {
    vec![
        MimeticGrid::new_1d(16, 0.0, 1.0).unwrap(),
        MimeticGrid::new_1d(32, -0.5, 1.5).unwrap(),
        MimeticGrid::new_2d([8, 8], [[0.0, 1.0], [0.0, 1.0]]).unwrap(),
        MimeticGrid::new_2d([16, 16], [[0.0, 2.0], [0.0, 1.0]]).unwrap(),
    ]
}

fn random_model(n: usize, rng: &mut StdRng) -> ConstitutiveModel {
    let species = (0..n)
        .map(|_| SpeciesParameters { alpha: rng.gen_range(0.5..3.0), diffusivity: rng.gen_range(0.1..2.0) })
        .collect();
    ConstitutiveModel::new(rng.gen_range(0.5..2.0), rng.gen_range(0.5..2.0), rng.gen_range(0.1..2.0), species).unwrap()
}

fn random_cells(n: usize, lo: f64, hi: f64, rng: &mut StdRng) -> ScalarField {
    ScalarField((0..n).map(|_| rng.gen_range(lo..hi)).collect())
}

fn random_state(grid: &MimeticGrid, model: &ConstitutiveModel, rng: &mut StdRng) -> ThermoState {
    let cells = grid.cell_count();
    let c = (0..model.n_species()).map(|_| random_cells(cells, -1.0, 1.0, rng)).collect();
    let s = ScalarField(
        (0..cells).map(|_| model.entropy_for_temperature(model.t_ref * rng.gen_range(0.5..2.0)).unwrap()).collect(),
    );
    ThermoState::new(c, s, 0.0).unwrap()
}

fn slope(h: &[f64], err: &[f64]) -> f64 {
    let x: Vec<f64> = h.iter().map(|v| v.ln()).collect();
    let y: Vec<f64> = err.iter().map(|v| v.ln()).collect();
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let num: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let den: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    num / den
}

fn max_abs_diff(a: &ScalarField, b: &ScalarField) -> f64 {
    a.0.iter().zip(&b.0).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

fn run_to_end(system: &IphsSystem, initial: ThermoState, integrator: &TimeIntegrator) -> Result<(ThermoState, Trajectory), String> {
    simulate(system, initial, integrator, |_, _| {}).map_err(|(_, e)| e.to_string())
}

/// Criteria 1 and 6 share their randomized instances.
struct StructureSuite {
    worst_skew_ratio: f64,
    worst_factorization: f64,
    instances: usize,
    elapsed: Duration,
}

fn structure_suite() -> Result<StructureSuite, String> {
    let start = Instant::now();
    let mut rng = StdRng::seed_from_u64(2024);
    let mut suite = StructureSuite { worst_skew_ratio: 0.0, worst_factorization: 0.0, instances: 0, elapsed: Duration::ZERO };
    for grid in grids() {
        for n in [0, 1, 3] {
            for _ in 0..20 {
                let model = random_model(n, &mut rng);
                let st = random_state(&grid, &model, &mut rng);
                let coe = model.co_energy(&st).map_err(|e| e.to_string())?;
                let traces = Traces::adjacent(&grid, &coe).map_err(|e| e.to_string())?;
                let j = AssembledStructure::at_state(&grid, &coe, traces.clone(), &model).map_err(|e| e.to_string())?;
                let (defect, norm) = skew_defect(&j.dense_matrix().map_err(|e| e.to_string())?);
                suite.worst_skew_ratio = suite.worst_skew_ratio.max(defect / norm);

                let e = CoEnergyFields {
                    temperature: random_cells(grid.cell_count(), 0.5, 2.0, &mut rng),
                    potentials: (0..n).map(|_| random_cells(grid.cell_count(), -1.0, 1.0, &mut rng)).collect(),
                };
                let direct = apply_jglob(&grid, &e, &traces, &j.mods).map_err(|e| e.to_string())?;
                let factored = factorized_jglob(&grid, &e, &traces, &j.mods).map_err(|e| e.to_string())?;
                suite.worst_factorization = suite.worst_factorization.max(direct.max_abs_diff(&factored));
                suite.instances += 1;
            }
        }
    }
    suite.elapsed = start.elapsed();
    Ok(suite)
}

fn criterion_1(suite: &StructureSuite) -> Outcome {
    let detail = format!(
        "max |A+A^T|/|A| = {:.2e} over {} instances (limit 1e-12), {:.1} s (limit 60 s)",
        suite.worst_skew_ratio,
        suite.instances,
        suite.elapsed.as_secs_f64()
    );
    if suite.worst_skew_ratio <= 1e-12 && suite.elapsed.as_secs_f64() <= 60.0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion_2() -> Outcome {
    let mut rng = StdRng::seed_from_u64(77);
    let mut worst: f64 = 0.0;
    for grid in grids() {
        for _ in 0..64 {
            let phi = random_cells(grid.cell_count(), -10.0, 10.0, &mut rng);
            let trace = BoundaryField((0..grid.boundary_face_count()).map(|_| rng.gen_range(-10.0..10.0)).collect());
            let face_rng = std::cell::RefCell::new(StdRng::seed_from_u64(rng.gen()));
            let f = grid.sample_faces(|_, _| face_rng.borrow_mut().gen_range(-10.0..10.0));
            let r = grid.ibp_residual(&phi, &f, &trace).map_err(|e| e.to_string())?;
            let div_f = grid.div(&f).map_err(|e| e.to_string())?;
            let scale = grid.cell_inner(&phi.map(f64::abs), &div_f.map(f64::abs)).map_err(|e| e.to_string())?.max(1.0);
            worst = worst.max(r.abs() / scale);
        }
    }
    let detail = format!("max residual/scale = {worst:.2e} over 64 instances on each of 4 grids (limit 1e-13)");
    if worst <= 1e-13 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Refinement study of one scenario at `dt * 4`, `dt * 2`, `dt`.
struct Study {
    name: String,
    dts: Vec<f64>,
    first: Vec<f64>,
    second: Vec<f64>,
    min_sigma: f64,
    elapsed: Duration,
}

fn study(name: &str) -> Result<Study, String> {
    let start = Instant::now();
    let sc = scenario(name);
    let (system, initial, base) = sc.build().map_err(|e| e.to_string())?;
    let dts: Vec<f64> = [4.0, 2.0, 1.0].iter().map(|k| base.dt * k).collect();
    let mut out = Study { name: sc.name.clone(), dts: dts.clone(), first: vec![], second: vec![], min_sigma: f64::INFINITY, elapsed: Duration::ZERO };
    for dt in dts {
        let integ = TimeIntegrator { dt, ..base.clone() };
        let (_, traj) = run_to_end(&system, initial.clone(), &integ)?;
        out.first.push(audit_first_law(&traj).max_abs);
        let second = audit_second_law(&traj);
        out.second.push(second.residual.max_abs);
        out.min_sigma = out.min_sigma.min(second.min_sigma);
    }
    out.elapsed = start.elapsed();
    Ok(out)
}

fn criterion_3(studies: &[Study]) -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    let mut total = 0.0;
    for s in studies {
        let p = slope(&s.dts, &s.first);
        let finest = s.first[s.first.len() - 1];
        ok &= (1.8..=2.2).contains(&p) && finest <= 1e-8;
        total += s.elapsed.as_secs_f64();
        parts.push(format!("{}: slope {p:.3}, finest {finest:.2e}", s.name));
    }
    ok &= total <= 120.0;
    let detail = format!("{} (slope in [1.8, 2.2], finest <= 1e-8), {total:.1} s (limit 120 s)", parts.join("; "));
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion_4(studies: &[Study]) -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for s in studies {
        let p = slope(&s.dts, &s.second);
        ok &= (1.8..=2.2).contains(&p) && s.min_sigma >= -1e-14;
        parts.push(format!("{}: slope {p:.3}, min sigma {:.2e}", s.name, s.min_sigma));
    }
    for name in ["heat1d_insulated.json", "equilibrium2d.json"] {
        let sc = scenario(name);
        let (system, initial, integ) = sc.build().map_err(|e| e.to_string())?;
        let (_, traj) = run_to_end(&system, initial, &integ)?;
        let audit = audit_second_law(&traj);
        ok &= audit.entropy_nondecreasing(1e-12) && audit.min_sigma >= -1e-14;
        parts.push(format!("{} insulated: largest S decrease {:.2e}", sc.name, audit.largest_decrease));
    }
    let detail = format!("{} (slope in [1.8, 2.2], sigma >= -1e-14, decrease >= -1e-12)", parts.join("; "));
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion_5() -> Outcome {
    let lambda = 0.5;
    let (a, b) = (0.0, 2.0);
    let temp = |z: f64| 300.0 + 10.0 * z;
    let (xi1, xi2) = heat_xi();
    let ps = synthesize_ports(&StructureMatrices1D::heat(), &xi1, &xi2).map_err(|e| e.to_string())?;
    let effort = |z: f64| DVector::from_vec(vec![0.0, temp(z), 0.0, lambda / temp(z) * 10.0]);
    let v = ps.inputs(&effort(b), &effort(a)).map_err(|e| e.to_string())?;
    let y = ps.outputs(&effort(b), &effort(a)).map_err(|e| e.to_string())?;
    let expected_v = [lambda / temp(b) * 10.0, -lambda / temp(a) * 10.0];
    let expected_y = [temp(b), temp(a)];
    let worst = (0..2)
        .map(|k| ((v[k] - expected_v[k]) / expected_v[k]).abs().max(((y[k] - expected_y[k]) / expected_y[k]).abs()))
        .fold(0.0, f64::max);
    let detail = format!("v = [{:.6e}, {:.6e}], y = [{}, {}], max relative error {worst:.2e} (limit 1e-12)", v[0], v[1], y[0], y[1]);
    if worst <= 1e-12 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion_6(suite: &StructureSuite) -> Outcome {
    let detail = format!("max |factorized - direct| = {:.2e} over {} instances (limit 1e-13)", suite.worst_factorization, suite.instances);
    if suite.worst_factorization <= 1e-13 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion_7() -> Outcome {
    let lambda = 0.7;
    let model = ConstitutiveModel::new(1.0, 1.0, lambda, vec![]).map_err(|e| e.to_string())?;
    let temp = |p: [f64; 2]| 1.5 + 0.5 * (2.0 * p[0]).sin() * (1.0 + 0.3 * p[1]);
    let jaumann = |p: [f64; 2]| {
        let (x, y) = (p[0], p[1]);
        let t = temp(p);
        let tx = (2.0 * x).cos() * (1.0 + 0.3 * y);
        let ty = 0.15 * (2.0 * x).sin();
        let lap = -2.0 * (2.0 * x).sin() * (1.0 + 0.3 * y);
        let grad2 = tx * tx + ty * ty;
        lambda * (lap / t - grad2 / (t * t)) + lambda * grad2 / (t * t)
    };
    let mut hs = Vec::new();
    let mut errs = Vec::new();
    for n in [16usize, 32, 64] {
        let grid = MimeticGrid::new_2d([n, n], [[0.0, 1.0], [0.0, 1.0]]).map_err(|e| e.to_string())?;
        let coe = CoEnergyFields { temperature: grid.sample_cells(temp), potentials: vec![] };
        let traces = Traces { temperature: grid.sample_boundary(temp), potentials: vec![] };
        let forces = driving_forces(&grid, &coe, &traces).map_err(|e| e.to_string())?;
        let mods = modulators(&grid, &coe, &forces, &traces, &model).map_err(|e| e.to_string())?;
        let rate = apply_psi(&grid, &coe.temperature, &traces.temperature, &mods).map_err(|e| e.to_string())?;
        let mut e: f64 = 0.0;
        for c in 0..grid.cell_count() {
            let (i, j) = grid.cell_coords(c);
            if i > 0 && j > 0 && i + 1 < n && j + 1 < n {
                e = e.max((rate.0[c] - jaumann(grid.cell_center(c))).abs());
            }
        }
        hs.push(1.0 / n as f64);
        errs.push(e);
    }
    let p = slope(&hs, &errs);
    let detail = format!("slope {p:.3} with max errors {:.2e}, {:.2e}, {:.2e} (slope in [1.8, 2.2])", errs[0], errs[1], errs[2]);
    if (1.8..=2.2).contains(&p) {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion_8() -> Outcome {
    let sc = scenario("multispecies_closed.json");
    let (system, initial, integ) = sc.build().map_err(|e| e.to_string())?;
    let (_, traj) = run_to_end(&system, initial, &integ)?;
    let steps = traj.points.len() - 1;
    let first = &traj.points[0].species_totals;
    let mut drift: f64 = 0.0;
    for p in &traj.points {
        for (a, b) in p.species_totals.iter().zip(first) {
            drift = drift.max((a - b).abs() / b.abs());
        }
    }

    let eq = scenario("equilibrium2d.json");
    let (system, initial, integ) = eq.build().map_err(|e| e.to_string())?;
    let mut fixed: f64 = 0.0;
    for integ in [integ.clone(), TimeIntegrator::rk4(integ.dt, integ.t_end)] {
        let (last, _) = run_to_end(&system, initial.clone(), &integ)?;
        fixed = fixed.max(max_abs_diff(&last.entropy, &initial.entropy));
        for (c, c0) in last.concentrations.iter().zip(&initial.concentrations) {
            fixed = fixed.max(max_abs_diff(c, c0));
        }
    }
    let detail = format!(
        "species drift {drift:.2e} over {steps} steps (limit 1e-12), equilibrium residual {fixed:.2e} (limit 1e-13)"
    );
    if steps >= 1000 && drift <= 1e-12 && fixed <= 1e-13 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion_9() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut checked = Vec::new();
    for path in bundled() {
        let sc = Scenario::load(&path).map_err(|e| e.to_string())?;
        let mut bytes = Vec::new();
        for k in 0..2 {
            let dir = tmp.path().join(format!("{}_{k}", sc.name));
            iphs_cli::run::run(&sc, &dir).map_err(|e| e.to_string())?;
            bytes.push(std::fs::read(dir.join("trajectory.csv")).map_err(|e| e.to_string())?);
        }
        if bytes[0] != bytes[1] {
            return Err(format!("{}: trajectory.csv differs between runs", sc.name));
        }
        checked.push(sc.name);
    }
    Ok(format!("identical trajectory.csv for {}", checked.join(", ")))
}

fn report(n: usize, outcome: Outcome) -> bool {
    match outcome {
        Ok(detail) => {
            println!("criterion {n}: PASS {detail}");
            true
        }
        Err(detail) => {
            println!("criterion {n}: FAIL {detail}");
            false
        }
    }
}

fn main() {
    let suite = structure_suite();
    let studies: Result<Vec<Study>, String> =
        ["heat1d_driven.json", "conduction_diffusion2d.json"].iter().map(|n| study(n)).collect();
    let results = [
        report(1, suite.as_ref().map_err(Clone::clone).and_then(criterion_1)),
        report(2, criterion_2()),
        report(3, studies.as_ref().map_err(Clone::clone).and_then(|s| criterion_3(s))),
        report(4, studies.as_ref().map_err(Clone::clone).and_then(|s| criterion_4(s))),
        report(5, criterion_5()),
        report(6, suite.as_ref().map_err(Clone::clone).and_then(criterion_6)),
        report(7, criterion_7()),
        report(8, criterion_8()),
        report(9, criterion_9()),
    ];
    let passed = results.iter().filter(|r| **r).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}
