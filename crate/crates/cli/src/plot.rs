//! SVG plots of a run: balance time series and final fields.

use std::path::{Path, PathBuf};

use plotters::prelude::*;

use crate::audit::{load_field, snapshot_index};
use crate::scenario::Scenario;
use crate::{column, read_file, read_numeric_csv, CliError, Result};

const SIZE: (u32, u32) = (800, 500);

fn plot_err(e: impl std::fmt::Display) -> CliError {
    CliError::Plot(e.to_string())
}

fn padded_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (-1.0, 1.0);
    }
    let pad = if hi > lo { 0.05 * (hi - lo) } else { 0.5 * lo.abs().max(1e-12) };
    (lo - pad, hi + pad)
}

fn line_plot(path: &Path, title: &str, x: &[f64], series: &[(&str, Vec<f64>)]) -> Result<()> {
    let root = SVGBackend::new(path, SIZE).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let (x0, x1) = padded_range(x.iter().copied());
    let (y0, y1) = padded_range(series.iter().flat_map(|(_, s)| s.iter().copied()));
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 22))
        .margin(15)
        .x_label_area_size(40)
        .y_label_area_size(90)
        .build_cartesian_2d(x0..x1, y0..y1)
        .map_err(plot_err)?;
    chart.configure_mesh().y_label_formatter(&|v| format!("{v:.3e}")).draw().map_err(plot_err)?;
    let palette = [BLUE, RED, GREEN, MAGENTA, CYAN, BLACK];
    for (k, (name, ys)) in series.iter().enumerate() {
        let color = palette[k % palette.len()];
        chart
            .draw_series(LineSeries::new(x.iter().copied().zip(ys.iter().copied()), color.stroke_width(2)))
            .map_err(plot_err)?
            .label(*name)
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color));
    }
    if series.len() > 1 {
        chart.configure_series_labels().background_style(WHITE.mix(0.8)).border_style(BLACK).draw().map_err(plot_err)?;
    }
    root.present().map_err(plot_err)
}

/// Blue-white-red ramp on `[0, 1]`.
fn ramp(t: f64) -> RGBColor {
    let t = t.clamp(0.0, 1.0);
    let lerp = |a: f64, b: f64, s: f64| (a + (b - a) * s).round() as u8;
    if t < 0.5 {
        let s = 2.0 * t;
        RGBColor(lerp(40.0, 255.0, s), lerp(70.0, 255.0, s), lerp(200.0, 255.0, s))
    } else {
        let s = 2.0 * t - 1.0;
        RGBColor(lerp(255.0, 200.0, s), lerp(255.0, 40.0, s), lerp(255.0, 40.0, s))
    }
}

fn heatmap(path: &Path, title: &str, scenario: &Scenario, values: &[f64]) -> Result<()> {
    let [[x0, x1], [y0, y1]] = [scenario.grid.bounds[0], scenario.grid.bounds[1]];
    let (nx, ny) = (scenario.grid.cells[0], scenario.grid.cells[1]);
    let (hx, hy) = ((x1 - x0) / nx as f64, (y1 - y0) / ny as f64);
    let (lo, hi) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let span = if hi > lo { hi - lo } else { 1.0 };
    let root = SVGBackend::new(path, SIZE).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let caption = format!("{title} [{lo:.4e}, {hi:.4e}]");
    let mut chart = ChartBuilder::on(&root)
        .caption(caption, ("sans-serif", 22))
        .margin(15)
        .x_label_area_size(40)
        .y_label_area_size(50)
        .build_cartesian_2d(x0..x1, y0..y1)
        .map_err(plot_err)?;
    chart.configure_mesh().disable_mesh().draw().map_err(plot_err)?;
    chart
        .draw_series(values.iter().enumerate().map(|(c, v)| {
            let (i, j) = (c % nx, c / nx);
            let (xa, ya) = (x0 + i as f64 * hx, y0 + j as f64 * hy);
            Rectangle::new([(xa, ya), (xa + hx, ya + hy)], ramp((v - lo) / span).filled())
        }))
        .map_err(plot_err)?;
    root.present().map_err(plot_err)
}

/// Writes the plots into `<run_dir>/plots` and returns their paths.
pub fn plot(run_dir: &Path) -> Result<Vec<PathBuf>> {
    let traj_path = run_dir.join("trajectory.csv");
    if !traj_path.exists() {
        return Err(CliError::Plot(format!("no trajectory.csv in {}", run_dir.display())));
    }
    let (header, rows) = read_numeric_csv(&traj_path)?;
    if rows.is_empty() {
        return Err(CliError::Plot(format!("{} has no rows", traj_path.display())));
    }
    let col = |name| column(&header, &rows, name, &traj_path);
    let out = run_dir.join("plots");
    std::fs::create_dir_all(&out).map_err(|e| CliError::io(&out, e))?;
    let time = col("time")?;
    let mut files = Vec::new();
    let mut emit = |name: &str| {
        let p = out.join(name);
        files.push(p.clone());
        p
    };
    line_plot(&emit("energy.svg"), "total energy H(t)", &time, &[("H", col("H")?)])?;
    line_plot(&emit("entropy.svg"), "total entropy S(t)", &time, &[("S", col("S")?)])?;
    line_plot(
        &emit("residuals.svg"),
        "balance residuals",
        &time,
        &[("first law", col("first_law_residual")?), ("second law", col("second_law_residual")?)],
    )?;

    let scenario = Scenario::from_json(&read_file(&run_dir.join("scenario.json"))?)?;
    let grid = scenario.grid()?;
    if let Some(&(step, _)) = snapshot_index(run_dir)?.last() {
        let mut fields = vec![("T".to_string(), "temperature".to_string())];
        for i in 0..scenario.n_species() {
            fields.push((format!("mu{i}"), format!("chemical potential {i}")));
        }
        for (key, title) in fields {
            let field = load_field(&grid, &run_dir.join("snapshots").join(format!("step_{step:06}_{key}.csv")))?;
            let path = emit(&format!("final_{key}.svg"));
            if grid.dim() == 1 {
                let x: Vec<f64> = (0..grid.cell_count()).map(|c| grid.cell_center(c)[0]).collect();
                line_plot(&path, &format!("final {title}"), &x, &[(key.as_str(), field.0)])?;
            } else {
                heatmap(&path, &format!("final {title}"), &scenario, &field.0)?;
            }
        }
    }
    Ok(files)
}
