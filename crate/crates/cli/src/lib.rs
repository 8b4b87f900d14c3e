//! Scenario-driven runs of the conduction-diffusion solver: configuration,
//! persistence of trajectories and snapshots, audits, plots and boundary
//! port synthesis from matrix files.

pub mod audit;
pub mod plot;
pub mod ports_cmd;
pub mod run;
pub mod scenario;

use std::path::{Path, PathBuf};

/// Environment variable naming the root for relative output directories.
pub const OUTPUT_ROOT_ENV: &str = "IPHS_OUTPUT_ROOT";

pub type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("validation error: {0}")]
    Validation(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error(transparent)]
    Core(#[from] iphs_core::Error),
    #[error("run failed at t = {time}: {source} (partial outputs in {dir})")]
    RunFailed { time: f64, dir: PathBuf, source: iphs_core::Error },
    #[error("{0}")]
    Plot(String),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), source }
    }
}

pub(crate) fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

pub(crate) fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

/// Rows of a headed numeric CSV file as `(header, rows)`.
pub(crate) fn read_numeric_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let csv_err = |source| CliError::Csv { path: path.to_path_buf(), source };
    let mut reader = csv::Reader::from_path(path).map_err(csv_err)?;
    let header = reader.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(csv_err)?;
        let row = record
            .iter()
            .map(|field| {
                field.trim().parse::<f64>().map_err(|_| {
                    CliError::Parse(format!("{}: row {}: `{field}` is not a number", path.display(), line + 2))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok((header, rows))
}

/// Column `name` of a parsed CSV.
pub(crate) fn column(header: &[String], rows: &[Vec<f64>], name: &str, path: &Path) -> Result<Vec<f64>> {
    let k = header
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| CliError::Parse(format!("{}: missing column `{name}`", path.display())))?;
    Ok(rows.iter().map(|r| r[k]).collect())
}
