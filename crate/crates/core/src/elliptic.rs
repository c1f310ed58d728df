//! Slice-wise elliptic solve `-div(M grad psi) = g` with zero Dirichlet data,
//! and the shared symmetric diffusion operator used by the time stepper.

use serde::Serialize;
use thiserror::Error;

use crate::coefficients::{CoefficientError, CoefficientField};
use crate::grid::{FluxField, GridError, ScalarField, SpaceGrid};

pub const DEFAULT_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error(transparent)]
    Coefficient(#[from] CoefficientError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(
        "linear solver hit the iteration limit {iterations} with relative residual {residual:e}"
    )]
    IterationLimit { iterations: usize, residual: f64 },
    #[error("elliptic coefficient must not depend on time")]
    TimeDependentCoefficient,
    #[error("tolerance must lie in (0, 1), got {0}")]
    InvalidTolerance(f64),
    #[error(
        "fixed point did not converge in {iterations} iterations (last residual {residual:e})"
    )]
    FixedPoint { iterations: usize, residual: f64 },
    #[error("invalid problem: {0}")]
    Config(String),
    #[error("step {step} failed: {source}")]
    Step {
        step: usize,
        #[source]
        source: Box<SolverError>,
    },
}

/// `(shift I + L)` with `L = -div(K grad .)`, `K` given by face coefficients.
///
/// Faces are stored flat as `(left, right, c / h^2)` with `usize::MAX`
/// standing for a boundary node.
#[derive(Debug, Clone)]
pub struct DiffusionOperator {
    grid: SpaceGrid,
    shift: f64,
    faces: Vec<(usize, usize, f64)>,
    diagonal: Vec<f64>,
}

const BOUNDARY: usize = usize::MAX;

impl DiffusionOperator {
    /// Assembles `shift I - div(coeff grad .)`; `coeff` holds one value per face.
    pub fn from_face_coefficients(coeff: &FluxField, shift: f64) -> Self {
        let grid = *coeff.grid();
        let n = grid.cells_per_axis();
        let inv_h2 = (n * n) as f64;
        let mut faces = Vec::with_capacity(grid.dim() * grid.faces_per_axis());
        let mut diagonal = vec![shift; grid.num_nodes()];
        for axis in 0..grid.dim() {
            let c = coeff.axis(axis);
            for (line, base) in grid.line_bases(axis).into_iter().enumerate() {
                for j in 0..n {
                    let (l, r) = grid.face_neighbors(axis, base, j);
                    let w = c[line * n + j] * inv_h2;
                    if let Some(l) = l {
                        diagonal[l] += w;
                    }
                    if let Some(r) = r {
                        diagonal[r] += w;
                    }
                    faces.push((l.unwrap_or(BOUNDARY), r.unwrap_or(BOUNDARY), w));
                }
            }
        }
        Self {
            grid,
            shift,
            faces,
            diagonal,
        }
    }

    pub fn grid(&self) -> &SpaceGrid {
        &self.grid
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diagonal
    }

    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        for (o, (&xi, &d)) in out.iter_mut().zip(x.iter().zip(&self.diagonal)) {
            *o = d * xi;
        }
        for &(l, r, w) in &self.faces {
            if l != BOUNDARY && r != BOUNDARY {
                out[l] -= w * x[r];
                out[r] -= w * x[l];
            }
        }
    }

    pub fn apply_field(&self, x: &ScalarField) -> ScalarField {
        let mut out = vec![0.0; x.values().len()];
        self.apply(x.values(), &mut out);
        ScalarField::new(self.grid, out).expect("operator output is finite")
    }

    /// Checks the M-matrix sign pattern and weak diagonal dominance.
    pub fn is_m_matrix(&self) -> bool {
        let mut off = vec![0.0; self.diagonal.len()];
        for &(l, r, w) in &self.faces {
            if w < 0.0 {
                return false;
            }
            if l != BOUNDARY && r != BOUNDARY {
                off[l] += w;
                off[r] += w;
            }
        }
        self.shift >= 0.0
            && self
                .diagonal
                .iter()
                .zip(&off)
                .all(|(d, o)| *d > 0.0 && d >= o)
    }
}

/// Result of a conjugate-gradient solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CgStats {
    pub iterations: usize,
    pub relative_residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Jacobi-preconditioned conjugate gradients; `x` holds the initial guess
/// on entry and the solution on exit. Stops on `|b - Ax|_2 <= tol |b|_2`.
pub fn conjugate_gradient(
    op: &DiffusionOperator,
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
) -> Result<CgStats, SolverError> {
    let n = b.len();
    let b_norm = dot(b, b).sqrt();
    if b_norm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(CgStats {
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    let mut r = vec![0.0; n];
    op.apply(x, &mut r);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    let inv_diag: Vec<f64> = op.diagonal().iter().map(|d| 1.0 / d).collect();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(a, d)| a * d).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let mut res = dot(&r, &r).sqrt() / b_norm;
    let mut iterations = 0;
    while res > tol {
        if iterations >= max_iter {
            return Err(SolverError::IterationLimit {
                iterations,
                residual: res,
            });
        }
        op.apply(&p, &mut ap);
        let alpha = rz / dot(&p, &ap);
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        iterations += 1;
        res = dot(&r, &r).sqrt() / b_norm;
        if res <= tol {
            break;
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    // report the true residual, not the recursively updated one
    op.apply(x, &mut ap);
    let true_res = b
        .iter()
        .zip(&ap)
        .map(|(bi, ai)| (bi - ai).powi(2))
        .sum::<f64>()
        .sqrt()
        / b_norm;
    if true_res > tol {
        return refine(op, b, x, tol, max_iter, iterations);
    }
    Ok(CgStats {
        iterations,
        relative_residual: true_res,
    })
}

// Restart when the recursive residual drifted below the true one.
fn refine(
    op: &DiffusionOperator,
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
    used: usize,
) -> Result<CgStats, SolverError> {
    if used >= max_iter {
        let mut ax = vec![0.0; b.len()];
        op.apply(x, &mut ax);
        let b_norm = dot(b, b).sqrt();
        let residual = b
            .iter()
            .zip(&ax)
            .map(|(bi, ai)| (bi - ai).powi(2))
            .sum::<f64>()
            .sqrt()
            / b_norm;
        return Err(SolverError::IterationLimit {
            iterations: used,
            residual,
        });
    }
    let stats = conjugate_gradient(op, b, x, tol, max_iter - used)?;
    Ok(CgStats {
        iterations: used + stats.iterations,
        relative_residual: stats.relative_residual,
    })
}

/// `-div(M grad psi) = g` on one time slice.
#[derive(Debug, Clone)]
pub struct EllipticProblem {
    pub grid: SpaceGrid,
    pub coefficient: CoefficientField,
    pub rhs: ScalarField,
    pub tol: f64,
    pub max_iter: usize,
}

impl EllipticProblem {
    pub fn new(coefficient: CoefficientField, rhs: ScalarField) -> Result<Self, SolverError> {
        let grid = *rhs.grid();
        let max_iter = 20 * grid.num_nodes().max(50);
        let p = Self {
            grid,
            coefficient,
            rhs,
            tol: DEFAULT_TOLERANCE,
            max_iter,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_tolerance(mut self, tol: f64) -> Result<Self, SolverError> {
        self.tol = tol;
        self.validate()?;
        Ok(self)
    }

    fn validate(&self) -> Result<(), SolverError> {
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(SolverError::InvalidTolerance(self.tol));
        }
        if self.coefficient.is_time_dependent() {
            return Err(SolverError::TimeDependentCoefficient);
        }
        if self.rhs.grid() != &self.grid {
            return Err(GridError::GridMismatch.into());
        }
        Ok(())
    }

    pub fn assemble(&self) -> Result<DiffusionOperator, SolverError> {
        assemble_elliptic(&self.grid, &self.coefficient)
    }

    pub fn solve(&self) -> Result<(ScalarField, CgStats), SolverError> {
        let op = self.assemble()?;
        solve_with(&op, &self.rhs, None, self.tol, self.max_iter)
    }
}

pub fn assemble_elliptic(
    grid: &SpaceGrid,
    m: &CoefficientField,
) -> Result<DiffusionOperator, SolverError> {
    if m.is_time_dependent() {
        return Err(SolverError::TimeDependentCoefficient);
    }
    let coeff = m.face_coefficients(grid, 0.0)?;
    Ok(DiffusionOperator::from_face_coefficients(&coeff, 0.0))
}

/// Solves `op x = rhs` starting from `guess` (zero when absent).
pub fn solve_with(
    op: &DiffusionOperator,
    rhs: &ScalarField,
    guess: Option<&ScalarField>,
    tol: f64,
    max_iter: usize,
) -> Result<(ScalarField, CgStats), SolverError> {
    let mut x = guess.map_or_else(|| vec![0.0; rhs.values().len()], |g| g.values().to_vec());
    let stats = conjugate_gradient(op, rhs.values(), &mut x, tol, max_iter)?;
    Ok((ScalarField::new(*op.grid(), x)?, stats))
}

pub fn solve_elliptic(problem: &EllipticProblem) -> Result<ScalarField, SolverError> {
    problem.solve().map(|(psi, _)| psi)
}

/// Norms of a computed `psi` and their ratios against `|f|_1^theta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PsiAprioriReport {
    pub psi_linf: f64,
    pub grad_psi_l2: f64,
    pub data_scale: f64,
    pub linf_ratio: f64,
    pub grad_ratio: f64,
}

fn ratio(num: f64, den: f64) -> f64 {
    if num == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// The constant in the a priori bound is not quantified, so only ratios are
/// reported.
pub fn psi_apriori_report(
    psi: &ScalarField,
    _g: &ScalarField,
    f_l1_norm: f64,
    theta: f64,
) -> PsiAprioriReport {
    let psi_linf = psi.lp_norm(f64::INFINITY).expect("valid exponent");
    let grad_psi_l2 = psi.gradient().lq_norm(2.0).expect("valid exponent");
    let data_scale = f_l1_norm.powf(theta);
    PsiAprioriReport {
        psi_linf,
        grad_psi_l2,
        data_scale,
        linf_ratio: ratio(psi_linf, data_scale),
        grad_ratio: ratio(grad_psi_l2, data_scale),
    }
}
