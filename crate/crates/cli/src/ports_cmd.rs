//! Boundary port synthesis from matrix files.
//!
//! Input files hold named CSV blocks: a line `# NAME` starts a block and the
//! following non-empty lines are its comma-separated rows. A block without
//! rows is an empty matrix. The structure file needs `P0`, `P1`, `G0`, `G1`
//! and `g_s`; the Xi file needs `Xi1` and `Xi2`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use iphs_core::ports::{synthesize_ports, xi_residuals, PortSynthesis, StructureMatrices1D};
use nalgebra::DMatrix;

use crate::{read_file, write_file, CliError, Result};

pub fn parse_blocks(text: &str, source: &Path) -> Result<BTreeMap<String, DMatrix<f64>>> {
    let mut raw: Vec<(String, String)> = Vec::new();
    for line in text.lines() {
        let trimmed = line.trim();
        if let Some(name) = trimmed.strip_prefix('#') {
            raw.push((name.trim().to_string(), String::new()));
        } else if !trimmed.is_empty() {
            match raw.last_mut() {
                Some((_, body)) => {
                    body.push_str(trimmed);
                    body.push('\n');
                }
                None => return Err(CliError::Parse(format!("{}: data before the first `# NAME` line", source.display()))),
            }
        }
    }
    let mut blocks = BTreeMap::new();
    for (name, body) in raw {
        let mut reader = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(body.as_bytes());
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|source_err| CliError::Csv { path: source.to_path_buf(), source: source_err })?;
            let row = record
                .iter()
                .map(|f| f.parse::<f64>().map_err(|_| CliError::Parse(format!("{}: block `{name}`: `{f}` is not a number", source.display()))))
                .collect::<Result<Vec<_>>>()?;
            if let Some(first) = rows.first() {
                if first.len() != row.len() {
                    return Err(CliError::Parse(format!("{}: block `{name}` has ragged rows", source.display())));
                }
            }
            rows.push(row);
        }
        let (r, c) = (rows.len(), rows.first().map_or(0, Vec::len));
        let m = DMatrix::from_fn(r, c, |i, j| rows[i][j]);
        if blocks.insert(name.clone(), m).is_some() {
            return Err(CliError::Parse(format!("{}: block `{name}` appears twice", source.display())));
        }
    }
    Ok(blocks)
}

fn take(blocks: &mut BTreeMap<String, DMatrix<f64>>, name: &str, source: &Path) -> Result<DMatrix<f64>> {
    blocks.remove(name).ok_or_else(|| CliError::Parse(format!("{}: missing block `{name}`", source.display())))
}

pub fn load_structure(path: &Path) -> Result<StructureMatrices1D> {
    let mut b = parse_blocks(&read_file(path)?, path)?;
    let g_s = take(&mut b, "g_s", path)?;
    if g_s.shape() != (1, 1) {
        return Err(CliError::Parse(format!("{}: `g_s` must be a single value", path.display())));
    }
    let (p0, p1, g0, g1) = (take(&mut b, "P0", path)?, take(&mut b, "P1", path)?, take(&mut b, "G0", path)?, take(&mut b, "G1", path)?);
    Ok(StructureMatrices1D::new(p0, p1, g0, g1, g_s[(0, 0)])?)
}

pub fn load_xi(path: &Path) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let mut b = parse_blocks(&read_file(path)?, path)?;
    Ok((take(&mut b, "Xi1", path)?, take(&mut b, "Xi2", path)?))
}

pub fn matrix_csv(m: &DMatrix<f64>) -> String {
    let mut s = String::new();
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format!("{:e}", m[(i, j)])).collect();
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

pub fn report(ps: &PortSynthesis) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "rank k = {}", ps.rank);
    let _ = writeln!(s, "pivot columns = {:?}", ps.pivots);
    let _ = writeln!(s, "Xi residuals: |Xi2'Xi1 + Xi1'Xi2| = {:e}, |Xi2'Xi2 + Xi1'Xi1 - I| = {:e}", ps.xi_residuals.0, ps.xi_residuals.1);
    let _ = writeln!(s, "P_e =");
    s.push_str(&matrix_csv(&ps.pe));
    let _ = writeln!(s, "W_B =");
    s.push_str(&matrix_csv(&ps.w_b));
    let _ = writeln!(s, "W_C =");
    s.push_str(&matrix_csv(&ps.w_c));
    s
}

/// Synthesizes `W_B`, `W_C` and writes `W_B.csv`, `W_C.csv` and `report.txt` into `out`.
pub fn ports_cmd(matrices: &Path, xi: &Path, out: &Path) -> Result<(PortSynthesis, Vec<PathBuf>)> {
    let sm = load_structure(matrices)?;
    let (xi1, xi2) = load_xi(xi)?;
    let ps = synthesize_ports(&sm, &xi1, &xi2).map_err(|e| {
        if xi1.is_square() && xi2.shape() == xi1.shape() {
            let (a, b) = xi_residuals(&xi1, &xi2);
            log::error!("Xi residuals: {a:e}, {b:e}");
        }
        CliError::from(e)
    })?;
    std::fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    let files = vec![out.join("W_B.csv"), out.join("W_C.csv"), out.join("report.txt")];
    write_file(&files[0], matrix_csv(&ps.w_b))?;
    write_file(&files[1], matrix_csv(&ps.w_c))?;
    write_file(&files[2], report(&ps))?;
    Ok((ps, files))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blocks_parse_with_empty_and_named_sections() {
        let text = "# A\n1, 2\n3,4\n\n# empty\n# b\n5\n";
        let b = parse_blocks(text, Path::new("t")).unwrap();
        assert_eq!(b["A"], DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]));
        assert_eq!(b["empty"].shape(), (0, 0));
        assert_eq!(b["b"][(0, 0)], 5.0);
        assert!(parse_blocks("1,2\n", Path::new("t")).is_err());
        assert!(parse_blocks("# A\n1,2\n3\n", Path::new("t")).is_err());
        assert!(parse_blocks("# A\nx\n", Path::new("t")).is_err());
    }
}
