//! Staggered 1D/2D structured grids.
//!
//! Scalars live at cell centers, vector fields as normal components on faces
//! (interior and boundary). Boundary data enters through [`BoundaryField`]
//! traces instead of ghost cells.
//!
//! The pair `grad`/`div` satisfies the discrete integration-by-parts identity
//!
//! ```text
//! <phi, div f>_cells + <grad phi, f>_faces = sum_{boundary faces} phi_bc (f . n) |face|
//! ```
//!
//! exactly, with cell weights `|cell|`, interior face weights `|cell|` and
//! boundary face weights `|cell| / 2`. Boundary gradients are one-sided
//! differences over the half cell, `(phi_bc - phi_adj) * 2 / h` along the
//! outward normal.

use std::fmt::Write as _;
use std::ops::Range;

use crate::{Error, Result};

/// Which end of an axis a boundary face sits on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Low,
    High,
}

impl Side {
    /// Outward normal component along the face axis.
    pub fn normal(self) -> f64 {
        match self {
            Side::Low => -1.0,
            Side::High => 1.0,
        }
    }
}

/// One face of the domain boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryFace {
    pub axis: usize,
    pub side: Side,
    /// Index into the face component of `axis`.
    pub face: usize,
    /// Cell adjacent to the face.
    pub cell: usize,
    pub normal: f64,
    /// Tangential measure of the face (1 in 1D).
    pub measure: f64,
    pub center: [f64; 2],
}

/// A contiguous range of boundary faces sharing an axis and a side.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryGroup {
    pub name: &'static str,
    pub axis: usize,
    pub side: Side,
    pub faces: Range<usize>,
}

const GROUP_NAMES: [[&str; 2]; 2] = [["x_min", "x_max"], ["y_min", "y_max"]];

/// Uniform structured grid in one or two dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct MimeticGrid {
    dim: usize,
    extents: [usize; 2],
    spacing: [f64; 2],
    bounds: [[f64; 2]; 2],
    boundary: Vec<BoundaryFace>,
    groups: Vec<BoundaryGroup>,
}

impl MimeticGrid {
    pub fn new(extents: &[usize], bounds: &[[f64; 2]]) -> Result<Self> {
        let dim = extents.len();
        if !(1..=2).contains(&dim) {
            return Err(Error::InvalidGrid(format!("dimension must be 1 or 2, got {dim}")));
        }
        if bounds.len() != dim {
            return Err(Error::InvalidGrid(format!(
                "{} bounds given for a {dim}D grid",
                bounds.len()
            )));
        }
        let mut ext = [1usize; 2];
        let mut spacing = [1.0; 2];
        let mut bnd = [[0.0, 1.0]; 2];
        for axis in 0..dim {
            let n = extents[axis];
            let [a, b] = bounds[axis];
            if n < 2 {
                return Err(Error::InvalidGrid(format!("axis {axis} needs at least 2 cells, got {n}")));
            }
            if !(a.is_finite() && b.is_finite() && b > a) {
                return Err(Error::InvalidGrid(format!("axis {axis} bounds [{a}, {b}] are not increasing")));
            }
            ext[axis] = n;
            spacing[axis] = (b - a) / n as f64;
            bnd[axis] = [a, b];
        }
        let mut grid = MimeticGrid {
            dim,
            extents: ext,
            spacing,
            bounds: bnd,
            boundary: Vec::new(),
            groups: Vec::new(),
        };
        grid.build_boundary();
        Ok(grid)
    }

    pub fn new_1d(cells: usize, a: f64, b: f64) -> Result<Self> {
        Self::new(&[cells], &[[a, b]])
    }

    pub fn new_2d(cells: [usize; 2], bounds: [[f64; 2]; 2]) -> Result<Self> {
        Self::new(&cells, &bounds)
    }

    fn build_boundary(&mut self) {
        let [nx, ny] = self.extents;
        for (axis, names) in GROUP_NAMES.iter().enumerate().take(self.dim) {
            for (side, name) in [Side::Low, Side::High].into_iter().zip(names) {
                let start = self.boundary.len();
                let measure = self.face_measure(axis);
                if axis == 0 {
                    let i = if side == Side::Low { 0 } else { nx };
                    let x = self.bounds[0][if side == Side::Low { 0 } else { 1 }];
                    for j in 0..ny {
                        let cell = if side == Side::Low { j * nx } else { nx - 1 + j * nx };
                        let y = if self.dim > 1 { self.bounds[1][0] + (j as f64 + 0.5) * self.spacing[1] } else { 0.0 };
                        self.boundary.push(BoundaryFace {
                            axis,
                            side,
                            face: i + (nx + 1) * j,
                            cell,
                            normal: side.normal(),
                            measure,
                            center: [x, y],
                        });
                    }
                } else {
                    let j = if side == Side::Low { 0 } else { ny };
                    let y = self.bounds[1][if side == Side::Low { 0 } else { 1 }];
                    for i in 0..nx {
                        let cell = if side == Side::Low { i } else { i + nx * (ny - 1) };
                        let x = self.bounds[0][0] + (i as f64 + 0.5) * self.spacing[0];
                        self.boundary.push(BoundaryFace {
                            axis,
                            side,
                            face: i + nx * j,
                            cell,
                            normal: side.normal(),
                            measure,
                            center: [x, y],
                        });
                    }
                }
                self.groups.push(BoundaryGroup {
                    name,
                    axis,
                    side,
                    faces: start..self.boundary.len(),
                });
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Cells per axis (only the first `dim` entries are meaningful).
    pub fn extents(&self) -> &[usize] {
        &self.extents[..self.dim]
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.spacing[axis]
    }

    pub fn bounds(&self) -> &[[f64; 2]] {
        &self.bounds[..self.dim]
    }

    pub fn cell_count(&self) -> usize {
        self.extents[0] * self.extents[1]
    }

    pub fn cell_measure(&self) -> f64 {
        self.spacing[..self.dim].iter().product()
    }

    /// Tangential measure of faces normal to `axis`.
    pub fn face_measure(&self, axis: usize) -> f64 {
        (0..self.dim).filter(|&k| k != axis).map(|k| self.spacing[k]).product()
    }

    pub fn face_count(&self, axis: usize) -> usize {
        let [nx, ny] = self.extents;
        match axis {
            0 => (nx + 1) * ny,
            _ => nx * (ny + 1),
        }
    }

    pub fn cell_index(&self, i: usize, j: usize) -> usize {
        i + self.extents[0] * j
    }

    pub fn cell_coords(&self, cell: usize) -> (usize, usize) {
        (cell % self.extents[0], cell / self.extents[0])
    }

    pub fn cell_center(&self, cell: usize) -> [f64; 2] {
        let (i, j) = self.cell_coords(cell);
        let x = self.bounds[0][0] + (i as f64 + 0.5) * self.spacing[0];
        let y = if self.dim > 1 { self.bounds[1][0] + (j as f64 + 0.5) * self.spacing[1] } else { 0.0 };
        [x, y]
    }

    /// Position of the center of face `face` normal to `axis`.
    pub fn face_center(&self, axis: usize, face: usize) -> [f64; 2] {
        let nx = self.extents[0];
        if axis == 0 {
            let (i, j) = (face % (nx + 1), face / (nx + 1));
            let y = if self.dim > 1 { self.bounds[1][0] + (j as f64 + 0.5) * self.spacing[1] } else { 0.0 };
            [self.bounds[0][0] + i as f64 * self.spacing[0], y]
        } else {
            let (i, j) = (face % nx, face / nx);
            [self.bounds[0][0] + (i as f64 + 0.5) * self.spacing[0], self.bounds[1][0] + j as f64 * self.spacing[1]]
        }
    }

    /// Cells on the low and high side of a face (`None` outside the domain).
    pub fn face_cells(&self, axis: usize, face: usize) -> (Option<usize>, Option<usize>) {
        let [nx, ny] = self.extents;
        if axis == 0 {
            let (i, j) = (face % (nx + 1), face / (nx + 1));
            let lo = (i > 0).then(|| i - 1 + nx * j);
            let hi = (i < nx).then(|| i + nx * j);
            (lo, hi)
        } else {
            let (i, j) = (face % nx, face / nx);
            let lo = (j > 0).then(|| i + nx * (j - 1));
            let hi = (j < ny).then(|| i + nx * j);
            (lo, hi)
        }
    }

    pub fn is_boundary_face(&self, axis: usize, face: usize) -> bool {
        let (lo, hi) = self.face_cells(axis, face);
        lo.is_none() || hi.is_none()
    }

    /// Quadrature weight of a face: the cell measure for interior faces, half
    /// of it for boundary faces.
    pub fn face_weight(&self, axis: usize, face: usize) -> f64 {
        if self.is_boundary_face(axis, face) {
            0.5 * self.cell_measure()
        } else {
            self.cell_measure()
        }
    }

    pub fn boundary_faces(&self) -> &[BoundaryFace] {
        &self.boundary
    }

    pub fn boundary_face_count(&self) -> usize {
        self.boundary.len()
    }

    pub fn boundary_groups(&self) -> &[BoundaryGroup] {
        &self.groups
    }

    pub fn boundary_group(&self, name: &str) -> Option<&BoundaryGroup> {
        self.groups.iter().find(|g| g.name == name)
    }

    fn check_cells(&self, what: &'static str, len: usize) -> Result<()> {
        if len != self.cell_count() {
            return Err(Error::DimensionMismatch { what, expected: self.cell_count(), found: len });
        }
        Ok(())
    }

    fn check_boundary(&self, what: &'static str, len: usize) -> Result<()> {
        if len != self.boundary_face_count() {
            return Err(Error::DimensionMismatch { what, expected: self.boundary_face_count(), found: len });
        }
        Ok(())
    }

    fn check_faces(&self, what: &'static str, f: &FaceField) -> Result<()> {
        if f.axes.len() != self.dim {
            return Err(Error::DimensionMismatch { what, expected: self.dim, found: f.axes.len() });
        }
        for (axis, comp) in f.axes.iter().enumerate() {
            if comp.len() != self.face_count(axis) {
                return Err(Error::DimensionMismatch { what, expected: self.face_count(axis), found: comp.len() });
            }
        }
        Ok(())
    }

    /// Trace position of boundary face `b` inside its axis component.
    fn boundary_slot(&self, b: usize) -> (usize, usize) {
        let bf = &self.boundary[b];
        (bf.axis, bf.face)
    }

    pub fn zero_scalar(&self) -> ScalarField {
        ScalarField(vec![0.0; self.cell_count()])
    }

    pub fn zero_faces(&self) -> FaceField {
        FaceField { axes: (0..self.dim).map(|a| vec![0.0; self.face_count(a)]).collect() }
    }

    pub fn zero_boundary(&self) -> BoundaryField {
        BoundaryField(vec![0.0; self.boundary_face_count()])
    }

    /// Samples `f` at cell centers.
    pub fn sample_cells(&self, f: impl Fn([f64; 2]) -> f64) -> ScalarField {
        ScalarField((0..self.cell_count()).map(|c| f(self.cell_center(c))).collect())
    }

    /// Samples the normal component `f(axis, point)` at face centers.
    pub fn sample_faces(&self, f: impl Fn(usize, [f64; 2]) -> f64) -> FaceField {
        FaceField {
            axes: (0..self.dim)
                .map(|a| (0..self.face_count(a)).map(|k| f(a, self.face_center(a, k))).collect())
                .collect(),
        }
    }

    /// Samples `f` at boundary face centers.
    pub fn sample_boundary(&self, f: impl Fn([f64; 2]) -> f64) -> BoundaryField {
        BoundaryField(self.boundary.iter().map(|b| f(b.center)).collect())
    }

    /// Values of `phi` in the cells adjacent to each boundary face.
    pub fn adjacent_values(&self, phi: &ScalarField) -> Result<BoundaryField> {
        self.check_cells("adjacent_values: phi", phi.len())?;
        Ok(BoundaryField(self.boundary.iter().map(|b| phi.0[b.cell]).collect()))
    }

    /// Face values of `f` at the boundary faces (component along the face
    /// axis, not yet oriented).
    pub fn boundary_values(&self, f: &FaceField) -> Result<BoundaryField> {
        self.check_faces("boundary_values: f", f)?;
        Ok(BoundaryField((0..self.boundary.len()).map(|b| {
            let (axis, face) = self.boundary_slot(b);
            f.axes[axis][face]
        }).collect()))
    }

    /// Outward normal component `f . n` at each boundary face.
    pub fn normal_trace(&self, f: &FaceField) -> Result<BoundaryField> {
        let mut t = self.boundary_values(f)?;
        for (v, b) in t.0.iter_mut().zip(&self.boundary) {
            *v *= b.normal;
        }
        Ok(t)
    }

    /// Discrete gradient: centered differences across interior faces and
    /// half-cell one-sided differences against `trace` at boundary faces.
    pub fn grad(&self, phi: &ScalarField, trace: &BoundaryField) -> Result<FaceField> {
        self.check_cells("grad: phi", phi.len())?;
        self.check_boundary("grad: trace", trace.len())?;
        let mut out = self.zero_faces();
        for axis in 0..self.dim {
            let h = self.spacing[axis];
            for (k, v) in out.axes[axis].iter_mut().enumerate() {
                if let (Some(lo), Some(hi)) = self.face_cells(axis, k) {
                    *v = (phi.0[hi] - phi.0[lo]) / h;
                }
            }
        }
        for (b, bf) in self.boundary.iter().enumerate() {
            let h = self.spacing[bf.axis];
            let adj = phi.0[bf.cell];
            out.axes[bf.axis][bf.face] = match bf.side {
                Side::Low => (adj - trace.0[b]) * 2.0 / h,
                Side::High => (trace.0[b] - adj) * 2.0 / h,
            };
        }
        Ok(out)
    }

    /// Discrete divergence: `sum_axes (f_high - f_low) / h` per cell.
    pub fn div(&self, f: &FaceField) -> Result<ScalarField> {
        self.check_faces("div: f", f)?;
        let [nx, _] = self.extents;
        let mut out = self.zero_scalar();
        for (c, v) in out.0.iter_mut().enumerate() {
            let (i, j) = self.cell_coords(c);
            let fx = &f.axes[0];
            let mut acc = (fx[i + 1 + (nx + 1) * j] - fx[i + (nx + 1) * j]) / self.spacing[0];
            if self.dim > 1 {
                let fy = &f.axes[1];
                acc += (fy[i + nx * (j + 1)] - fy[i + nx * j]) / self.spacing[1];
            }
            *v = acc;
        }
        Ok(out)
    }

    /// Arithmetic face interpolation of a cell field; boundary faces take the
    /// trace.
    pub fn interpolate(&self, phi: &ScalarField, trace: &BoundaryField) -> Result<FaceField> {
        self.check_cells("interpolate: phi", phi.len())?;
        self.check_boundary("interpolate: trace", trace.len())?;
        let mut out = self.zero_faces();
        for axis in 0..self.dim {
            for (k, v) in out.axes[axis].iter_mut().enumerate() {
                if let (Some(lo), Some(hi)) = self.face_cells(axis, k) {
                    *v = 0.5 * (phi.0[lo] + phi.0[hi]);
                }
            }
        }
        for (b, bf) in self.boundary.iter().enumerate() {
            out.axes[bf.axis][bf.face] = trace.0[b];
        }
        Ok(out)
    }

    /// Face-to-cell averaging of per-face products: every cell receives half
    /// of each adjacent interior face value, per axis. Boundary faces carry
    /// no weight, which makes this map the adjoint of the linear part of
    /// [`interpolate`](Self::interpolate) under the cell/face inner products.
    pub fn average_to_cells(&self, f: &FaceField) -> Result<ScalarField> {
        self.check_faces("average_to_cells: f", f)?;
        let mut out = self.zero_scalar();
        for axis in 0..self.dim {
            for (k, &v) in f.axes[axis].iter().enumerate() {
                if let (Some(lo), Some(hi)) = self.face_cells(axis, k) {
                    out.0[lo] += 0.5 * v;
                    out.0[hi] += 0.5 * v;
                }
            }
        }
        Ok(out)
    }

    /// Measure-weighted cell inner product.
    pub fn cell_inner(&self, a: &ScalarField, b: &ScalarField) -> Result<f64> {
        self.check_cells("cell_inner: a", a.len())?;
        self.check_cells("cell_inner: b", b.len())?;
        Ok(compensated_sum(a.0.iter().zip(&b.0).map(|(x, y)| x * y)) * self.cell_measure())
    }

    /// Measure-weighted face inner product (half weight on boundary faces).
    pub fn face_inner(&self, f: &FaceField, g: &FaceField) -> Result<f64> {
        self.check_faces("face_inner: f", f)?;
        self.check_faces("face_inner: g", g)?;
        let terms = (0..self.dim).flat_map(|axis| {
            (0..self.face_count(axis)).map(move |k| (axis, k))
        });
        Ok(compensated_sum(terms.map(|(axis, k)| f.axes[axis][k] * g.axes[axis][k] * self.face_weight(axis, k))))
    }

    /// `sum_faces trace_a * trace_b * |face|` over the boundary.
    pub fn boundary_integral(&self, trace_a: &BoundaryField, trace_b: &BoundaryField) -> Result<f64> {
        self.check_boundary("boundary_integral: trace_a", trace_a.len())?;
        self.check_boundary("boundary_integral: trace_b", trace_b.len())?;
        Ok(compensated_sum(
            self.boundary.iter().enumerate().map(|(b, bf)| trace_a.0[b] * trace_b.0[b] * bf.measure),
        ))
    }

    /// Cell-measure weighted integral of a cell field.
    pub fn integrate(&self, phi: &ScalarField) -> Result<f64> {
        self.check_cells("integrate: phi", phi.len())?;
        Ok(compensated_sum(phi.0.iter().copied()) * self.cell_measure())
    }

    /// Residual of the discrete integration-by-parts identity,
    /// `<phi, div f> + <grad phi, f> - sum_b phi_bc (f . n) |face|`.
    /// The boundary values of `f` are read from its boundary faces.
    pub fn ibp_residual(&self, phi: &ScalarField, f: &FaceField, phi_trace: &BoundaryField) -> Result<f64> {
        let div_f = self.div(f)?;
        let grad_phi = self.grad(phi, phi_trace)?;
        let fn_trace = self.normal_trace(f)?;
        Ok(self.cell_inner(phi, &div_f)? + self.face_inner(&grad_phi, f)?
            - self.boundary_integral(phi_trace, &fn_trace)?)
    }

    /// CSV snapshot of a cell field: `axis0_index,axis1_index,value`
    /// (`axis1_index` omitted in 1D).
    pub fn field_csv(&self, phi: &ScalarField) -> Result<String> {
        self.check_cells("field_csv: phi", phi.len())?;
        let mut out = String::new();
        if self.dim == 1 {
            out.push_str("axis0_index,value\n");
        } else {
            out.push_str("axis0_index,axis1_index,value\n");
        }
        for (c, v) in phi.0.iter().enumerate() {
            let (i, j) = self.cell_coords(c);
            if self.dim == 1 {
                let _ = writeln!(out, "{i},{v:e}");
            } else {
                let _ = writeln!(out, "{i},{j},{v:e}");
            }
        }
        Ok(out)
    }
}

/// Neumaier-compensated sum in iteration order.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Cell-centered scalar grid function.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScalarField(pub Vec<f64>);

impl ScalarField {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn uniform(cells: usize, value: f64) -> Self {
        ScalarField(vec![value; cells])
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        ScalarField(self.0.iter().map(|&v| f(v)).collect())
    }

    pub fn add_assign(&mut self, other: &ScalarField) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += b;
        }
    }
}

/// Face-normal components of a vector field, one array per axis.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FaceField {
    pub axes: Vec<Vec<f64>>,
}

impl FaceField {
    /// Elementwise product.
    pub fn product(&self, other: &FaceField) -> FaceField {
        self.zip_with(other, |a, b| a * b)
    }

    pub fn zip_with(&self, other: &FaceField, f: impl Fn(f64, f64) -> f64) -> FaceField {
        FaceField {
            axes: self
                .axes
                .iter()
                .zip(&other.axes)
                .map(|(a, b)| a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect())
                .collect(),
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> FaceField {
        FaceField { axes: self.axes.iter().map(|a| a.iter().map(|&x| f(x)).collect()).collect() }
    }

    pub fn add_assign(&mut self, other: &FaceField) {
        for (a, b) in self.axes.iter_mut().zip(&other.axes) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.axes.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.axes.iter().flatten().all(|v| v.is_finite())
    }
}

/// One value per boundary face, ordered as [`MimeticGrid::boundary_faces`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BoundaryField(pub Vec<f64>);

impl BoundaryField {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn zip_with(&self, other: &BoundaryField, f: impl Fn(f64, f64) -> f64) -> BoundaryField {
        BoundaryField(self.0.iter().zip(&other.0).map(|(&a, &b)| f(a, b)).collect())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> BoundaryField {
        BoundaryField(self.0.iter().map(|&a| f(a)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid2() -> MimeticGrid {
        MimeticGrid::new_2d([4, 3], [[0.0, 2.0], [-1.0, 0.5]]).unwrap()
    }

    #[test]
    fn rejects_degenerate_grids() {
        assert!(MimeticGrid::new_1d(1, 0.0, 1.0).is_err());
        assert!(MimeticGrid::new_1d(4, 1.0, 1.0).is_err());
        assert!(MimeticGrid::new(&[2, 2, 2], &[[0.0, 1.0]; 3]).is_err());
        assert!(MimeticGrid::new(&[4, 4], &[[0.0, 1.0]]).is_err());
    }

    #[test]
    fn measures_and_counts() {
        let g = grid2();
        assert_eq!(g.cell_count(), 12);
        assert_eq!(g.face_count(0), 15);
        assert_eq!(g.face_count(1), 16);
        assert_eq!(g.boundary_face_count(), 2 * 3 + 2 * 4);
        assert!((g.cell_measure() - 0.5 * 0.5).abs() < 1e-15);
        assert!((g.face_measure(0) - 0.5).abs() < 1e-15);
        let names: Vec<_> = g.boundary_groups().iter().map(|b| b.name).collect();
        assert_eq!(names, ["x_min", "x_max", "y_min", "y_max"]);

        let g1 = MimeticGrid::new_1d(5, 0.0, 1.0).unwrap();
        assert_eq!(g1.face_measure(0), 1.0);
        assert_eq!(g1.boundary_face_count(), 2);
    }

    #[test]
    fn boundary_faces_point_outward() {
        let g = grid2();
        for bf in g.boundary_faces() {
            let (lo, hi) = g.face_cells(bf.axis, bf.face);
            match bf.side {
                Side::Low => assert_eq!((lo, hi), (None, Some(bf.cell))),
                Side::High => assert_eq!((lo, hi), (Some(bf.cell), None)),
            }
            assert_eq!(g.face_center(bf.axis, bf.face), bf.center);
        }
    }

    #[test]
    fn grad_of_constant_vanishes() {
        let g = grid2();
        let phi = ScalarField::uniform(g.cell_count(), 3.5);
        let tr = BoundaryField(vec![3.5; g.boundary_face_count()]);
        assert_eq!(g.grad(&phi, &tr).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn grad_exact_for_affine_1d() {
        let g = MimeticGrid::new_1d(8, 0.0, 1.0).unwrap();
        let phi = g.sample_cells(|p| p[0]);
        let tr = g.sample_boundary(|p| p[0]);
        let gr = g.grad(&phi, &tr).unwrap();
        for v in &gr.axes[0] {
            assert!((v - 1.0).abs() < 1e-13, "{v}");
        }
    }

    #[test]
    fn div_of_affine_flux_1d() {
        let g = MimeticGrid::new_1d(8, 0.0, 1.0).unwrap();
        let f = g.sample_faces(|_, p| p[0]);
        let d = g.div(&f).unwrap();
        for v in &d.0 {
            assert!((v - 1.0).abs() < 1e-13);
        }
        let c = g.sample_faces(|_, _| 2.0);
        assert_eq!(g.div(&c).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn boundary_integral_unit_domain() {
        let g = MimeticGrid::new_1d(4, 0.0, 1.0).unwrap();
        let one = BoundaryField(vec![1.0; 2]);
        assert_eq!(g.boundary_integral(&one, &one).unwrap(), 2.0);
        assert_eq!(g.boundary_integral(&one, &g.zero_boundary()).unwrap(), 0.0);
    }

    #[test]
    fn ibp_vanishing_boundary() {
        let g = grid2();
        let phi = g.sample_cells(|p| (p[0] * 1.3).sin() + p[1] * p[1]);
        let mut f = g.sample_faces(|a, p| (a as f64 + 1.0) * p[0] * p[1]);
        for bf in g.boundary_faces() {
            f.axes[bf.axis][bf.face] = 0.0;
        }
        let r = g.ibp_residual(&phi, &f, &g.zero_boundary()).unwrap();
        assert!(r.abs() < 1e-13, "{r}");
    }

    #[test]
    fn averaging_is_adjoint_of_interpolation() {
        // <phi, A f>_cells == <I0 phi, f>_faces with I0 the zero-trace interpolation
        let g = grid2();
        let phi = g.sample_cells(|p| 1.0 + p[0] - 2.0 * p[1] * p[0]);
        let f = g.sample_faces(|a, p| (p[0] + 0.3 * a as f64).cos() * p[1]);
        let lhs = g.cell_inner(&phi, &g.average_to_cells(&f).unwrap()).unwrap();
        let i0 = g.interpolate(&phi, &g.zero_boundary()).unwrap();
        let rhs = g.face_inner(&i0, &f).unwrap();
        assert!((lhs - rhs).abs() < 1e-13, "{lhs} {rhs}");
    }

    #[test]
    fn dimension_errors() {
        let g = grid2();
        let bad = ScalarField(vec![0.0; 3]);
        assert!(matches!(g.grad(&bad, &g.zero_boundary()), Err(Error::DimensionMismatch { .. })));
        let short = FaceField { axes: vec![vec![0.0; 15]] };
        assert!(g.div(&short).is_err());
        assert!(g.boundary_integral(&BoundaryField(vec![1.0]), &g.zero_boundary()).is_err());
    }

    #[test]
    fn compensated_sum_recovers_cancellation() {
        let v = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(compensated_sum(v), 2.0);
    }

    #[test]
    fn csv_headers() {
        let g1 = MimeticGrid::new_1d(2, 0.0, 1.0).unwrap();
        let s = g1.field_csv(&ScalarField(vec![1.0, 2.0])).unwrap();
        assert!(s.starts_with("axis0_index,value\n0,1e0\n"));
        let g = grid2();
        let s = g.field_csv(&g.zero_scalar()).unwrap();
        assert!(s.starts_with("axis0_index,axis1_index,value\n"));
        assert_eq!(s.lines().count(), 13);
    }
}
