//! Uniform vertex-centered grid on the unit cube with homogeneous Dirichlet
//! boundary, plus the discrete calculus shared by every solver component.
//!
//! Interior nodes sit at `x_d = (i_d + 1) h` for `i_d = 0..n_x-1`; the boundary
//! nodes (`x_d = 0` and `x_d = 1`) carry the value zero and are never stored.
//! Node arrays are laid out with axis 0 varying fastest.
//!
//! Faces on axis `d` join two consecutive nodes along `d`, including the two
//! faces on every line that touch a boundary node. Face arrays are grouped by
//! line: face `line * n_x + j` joins global nodes `j` and `j + 1` of that line.

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("grid dimension must be 1, 2 or 3, got {0}")]
    InvalidDimension(usize),
    #[error("at least 4 cells per axis are required, got {0}")]
    TooFewCells(usize),
    #[error("invalid Lebesgue exponent {0}: must be >= 1 or +inf")]
    InvalidExponent(f64),
    #[error("field has {got} values, grid expects {expected}")]
    SizeMismatch { expected: usize, got: usize },
    #[error("non-finite value {value} at node {index}")]
    NonFinite { index: usize, value: f64 },
    #[error("fields live on different grids")]
    GridMismatch,
}

/// Uniform tensor grid on `(0,1)^N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct SpaceGrid {
    dim: usize,
    cells: usize,
}

impl SpaceGrid {
    /// `dim` is normally 2 or 3; 1 is accepted for slice-level checks.
    pub fn new(dim: usize, cells_per_axis: usize) -> Result<Self, GridError> {
        if !(1..=3).contains(&dim) {
            return Err(GridError::InvalidDimension(dim));
        }
        if cells_per_axis < 4 {
            return Err(GridError::TooFewCells(cells_per_axis));
        }
        Ok(Self {
            dim,
            cells: cells_per_axis,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cells_per_axis(&self) -> usize {
        self.cells
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.cells as f64
    }

    /// Quadrature weight `h^N` attached to every node.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// Interior nodes per axis, `n_x - 1`.
    pub fn interior_per_axis(&self) -> usize {
        self.cells - 1
    }

    pub fn num_nodes(&self) -> usize {
        self.interior_per_axis().pow(self.dim as u32)
    }

    pub fn num_lines(&self) -> usize {
        self.interior_per_axis().pow(self.dim as u32 - 1)
    }

    pub fn faces_per_axis(&self) -> usize {
        self.cells * self.num_lines()
    }

    /// Measure of the region covered by the node quadrature, `h^N (n_x-1)^N`.
    pub fn interior_measure(&self) -> f64 {
        self.cell_volume() * self.num_nodes() as f64
    }

    fn stride(&self, axis: usize) -> usize {
        self.interior_per_axis().pow(axis as u32)
    }

    /// Coordinate of global lattice index `g` (0 and `n_x` are boundary).
    pub fn lattice_coordinate(&self, g: usize) -> f64 {
        g as f64 / self.cells as f64
    }

    pub fn node_multi_index(&self, node: usize) -> [usize; 3] {
        let m = self.interior_per_axis();
        let mut out = [0; 3];
        let mut rest = node;
        for item in out.iter_mut().take(self.dim) {
            *item = rest % m;
            rest /= m;
        }
        out
    }

    pub fn node_position(&self, node: usize) -> [f64; 3] {
        let idx = self.node_multi_index(node);
        let mut x = [0.0; 3];
        for d in 0..self.dim {
            x[d] = self.lattice_coordinate(idx[d] + 1);
        }
        x
    }

    /// Base node (index 0 along `axis`) of every line parallel to `axis`,
    /// in line order.
    pub fn line_bases(&self, axis: usize) -> Vec<usize> {
        let m = self.interior_per_axis();
        let stride = self.stride(axis);
        (0..self.num_nodes())
            .filter(|&node| (node / stride) % m == 0)
            .collect()
    }

    /// Interior node indices on either side of face `j` of a line starting at
    /// `base`; `None` marks a boundary node.
    #[inline]
    pub fn face_neighbors(
        &self,
        axis: usize,
        base: usize,
        j: usize,
    ) -> (Option<usize>, Option<usize>) {
        let stride = self.stride(axis);
        let left = (j >= 1).then(|| base + (j - 1) * stride);
        let right = (j < self.interior_per_axis()).then(|| base + j * stride);
        (left, right)
    }

    /// Positions of the two lattice nodes joined by face `j` of the line at
    /// `base` (boundary positions included).
    pub fn face_endpoints(&self, axis: usize, base: usize, j: usize) -> ([f64; 3], [f64; 3]) {
        let mut left = self.node_position(base);
        let mut right = left;
        left[axis] = self.lattice_coordinate(j);
        right[axis] = self.lattice_coordinate(j + 1);
        (left, right)
    }

    pub fn zeros(&self) -> ScalarField {
        ScalarField {
            grid: *self,
            values: vec![0.0; self.num_nodes()],
        }
    }

    pub fn zero_flux(&self) -> FluxField {
        FluxField {
            grid: *self,
            faces: vec![vec![0.0; self.faces_per_axis()]; self.dim],
        }
    }

    /// Samples `f` at every interior node.
    pub fn sample<F: Fn(&[f64]) -> f64>(&self, f: F) -> Result<ScalarField, GridError> {
        let values = (0..self.num_nodes())
            .map(|node| {
                let x = self.node_position(node);
                f(&x[..self.dim])
            })
            .collect();
        ScalarField::new(*self, values)
    }

    /// `(v_right - v_left) / h` on every face, boundary values read as zero.
    pub fn gradient_into(&self, values: &[f64], out: &mut [Vec<f64>]) {
        let n = self.cells;
        let inv_h = self.cells as f64;
        for (axis, faces) in out.iter_mut().enumerate().take(self.dim) {
            for (line, base) in self.line_bases(axis).into_iter().enumerate() {
                for j in 0..n {
                    let (l, r) = self.face_neighbors(axis, base, j);
                    let vl = l.map_or(0.0, |i| values[i]);
                    let vr = r.map_or(0.0, |i| values[i]);
                    faces[line * n + j] = (vr - vl) * inv_h;
                }
            }
        }
    }

    /// `sum_d (F_right - F_left) / h` at every interior node.
    pub fn divergence_into(&self, faces: &[Vec<f64>], out: &mut [f64]) {
        let n = self.cells;
        let inv_h = self.cells as f64;
        out.iter_mut().for_each(|v| *v = 0.0);
        for (axis, flux) in faces.iter().enumerate().take(self.dim) {
            for (line, base) in self.line_bases(axis).into_iter().enumerate() {
                for j in 0..n {
                    let (l, r) = self.face_neighbors(axis, base, j);
                    let f = flux[line * n + j] * inv_h;
                    // face j is the right face of node l and the left face of node r
                    if let Some(l) = l {
                        out[l] += f;
                    }
                    if let Some(r) = r {
                        out[r] -= f;
                    }
                }
            }
        }
    }
}

fn check_finite(values: &[f64]) -> Result<(), GridError> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(GridError::NonFinite {
            index,
            value: values[index],
        }),
        None => Ok(()),
    }
}

fn check_exponent(p: f64) -> Result<(), GridError> {
    if p.is_nan() || p < 1.0 {
        Err(GridError::InvalidExponent(p))
    } else {
        Ok(())
    }
}

/// `(h^N sum |v|^p)^(1/p)`, or `max |v|` for `p = inf`, over a flat value list.
pub(crate) fn weighted_lp(values: impl Iterator<Item = f64>, weight: f64, p: f64) -> f64 {
    if p.is_infinite() {
        values.fold(0.0, |acc: f64, v| acc.max(v.abs()))
    } else if p == 1.0 {
        weight * values.map(f64::abs).sum::<f64>()
    } else if p == 2.0 {
        (weight * values.map(|v| v * v).sum::<f64>()).sqrt()
    } else {
        (weight * values.map(|v| v.abs().powf(p)).sum::<f64>()).powf(1.0 / p)
    }
}

/// Nodal values on the interior lattice; the Dirichlet zero is implicit.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: SpaceGrid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: SpaceGrid, values: Vec<f64>) -> Result<Self, GridError> {
        if values.len() != grid.num_nodes() {
            return Err(GridError::SizeMismatch {
                expected: grid.num_nodes(),
                got: values.len(),
            });
        }
        check_finite(&values)?;
        Ok(Self { grid, values })
    }

    pub fn constant(grid: SpaceGrid, c: f64) -> Result<Self, GridError> {
        Self::new(grid, vec![c; grid.num_nodes()])
    }

    pub fn grid(&self) -> &SpaceGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Value at a global lattice index (components in `0..=n_x`); every
    /// boundary index returns exactly zero.
    pub fn at_lattice(&self, lattice: &[usize]) -> f64 {
        let n = self.grid.cells;
        let m = self.grid.interior_per_axis();
        let mut node = 0;
        let mut stride = 1;
        for &g in lattice.iter().take(self.grid.dim) {
            if g == 0 || g >= n {
                return 0.0;
            }
            node += (g - 1) * stride;
            stride *= m;
        }
        self.values[node]
    }

    pub fn lp_norm(&self, p: f64) -> Result<f64, GridError> {
        check_exponent(p)?;
        Ok(weighted_lp(
            self.values.iter().copied(),
            self.grid.cell_volume(),
            p,
        ))
    }

    pub fn gradient(&self) -> FluxField {
        let mut flux = self.grid.zero_flux();
        self.grid.gradient_into(&self.values, &mut flux.faces);
        flux
    }

    /// `h^N * #{nodes : v >= k}`.
    pub fn level_set_measure(&self, k: f64) -> f64 {
        let count = self.values.iter().filter(|&&v| v >= k).count();
        count as f64 * self.grid.cell_volume()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// `h^N sum v w`.
    pub fn inner(&self, other: &ScalarField) -> Result<f64, GridError> {
        if self.grid != other.grid {
            return Err(GridError::GridMismatch);
        }
        let dot: f64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum();
        Ok(dot * self.grid.cell_volume())
    }

    pub fn map<F: Fn(f64) -> f64>(&self, f: F) -> Result<ScalarField, GridError> {
        ScalarField::new(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }
}

/// One value per face per axis; carrier for discrete gradients and fluxes.
#[derive(Debug, Clone, PartialEq)]
pub struct FluxField {
    grid: SpaceGrid,
    faces: Vec<Vec<f64>>,
}

impl FluxField {
    pub fn new(grid: SpaceGrid, faces: Vec<Vec<f64>>) -> Result<Self, GridError> {
        if faces.len() != grid.dim {
            return Err(GridError::SizeMismatch {
                expected: grid.dim,
                got: faces.len(),
            });
        }
        for axis in &faces {
            if axis.len() != grid.faces_per_axis() {
                return Err(GridError::SizeMismatch {
                    expected: grid.faces_per_axis(),
                    got: axis.len(),
                });
            }
            check_finite(axis)?;
        }
        Ok(Self { grid, faces })
    }

    pub fn grid(&self) -> &SpaceGrid {
        &self.grid
    }

    pub fn axis(&self, axis: usize) -> &[f64] {
        &self.faces[axis]
    }

    pub fn faces(&self) -> &[Vec<f64>] {
        &self.faces
    }

    pub fn divergence(&self) -> ScalarField {
        let mut out = self.grid.zeros();
        self.grid.divergence_into(&self.faces, &mut out.values);
        out
    }

    /// `h^N sum_d sum_faces F_d G_d`.
    pub fn inner(&self, other: &FluxField) -> Result<f64, GridError> {
        if self.grid != other.grid {
            return Err(GridError::GridMismatch);
        }
        let dot: f64 = self
            .faces
            .iter()
            .zip(&other.faces)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| x * y))
            .sum();
        Ok(dot * self.grid.cell_volume())
    }

    /// Face-wise `(h^N sum_d sum_faces |F_d|^q)^(1/q)`. Equals the Euclidean
    /// `L^2` norm of the vector field for `q = 2`.
    pub fn lq_norm(&self, q: f64) -> Result<f64, GridError> {
        check_exponent(q)?;
        Ok(weighted_lp(
            self.faces.iter().flatten().copied(),
            self.grid.cell_volume(),
            q,
        ))
    }

    pub fn max_abs(&self) -> f64 {
        self.faces
            .iter()
            .flatten()
            .fold(0.0, |a: f64, v| a.max(v.abs()))
    }
}
