//! Matrix-valued coefficient fields `A(x,t)` and `M(x)`.
//!
//! All built-in families are diagonal, which keeps the finite-volume
//! discretization monotone. A constant full matrix is available so that
//! ellipticity checks can be run on anisotropic data; it is rejected by
//! [`CoefficientField::face_coefficient`].

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

use crate::grid::{FluxField, SpaceGrid};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CoefficientError {
    #[error("point {0:?} lies outside the closed unit cube")]
    OutsideDomain(Vec<f64>),
    #[error("face averaging needs a diagonal coefficient family, got {0}")]
    UnsupportedAnisotropy(&'static str),
    #[error("invalid coefficient parameters: {0}")]
    InvalidParameters(String),
    #[error("dimension mismatch: coefficient has {coefficient}, grid has {grid}")]
    DimensionMismatch { coefficient: usize, grid: usize },
}

/// Coefficient family and its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum Family {
    Identity,
    /// `values[0]` on cells whose index sum is even, `values[1]` otherwise;
    /// `period` cells per axis.
    CheckerboardDiagonal {
        values: [f64; 2],
        period: usize,
    },
    /// Slabs normal to `axis`, one per entry of `values`.
    LayeredDiagonal {
        values: Vec<f64>,
        axis: usize,
    },
    /// `base * (1 + amplitude * sin(2 pi t / period))` times the identity.
    TimeModulatedDiagonal {
        base: f64,
        amplitude: f64,
        period: f64,
    },
    /// Constant symmetric matrix, row major.
    ConstantMatrix {
        entries: Vec<f64>,
    },
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Identity => "identity",
            Family::CheckerboardDiagonal { .. } => "checkerboard-diagonal",
            Family::LayeredDiagonal { .. } => "layered-diagonal",
            Family::TimeModulatedDiagonal { .. } => "time-modulated-diagonal",
            Family::ConstantMatrix { .. } => "constant-matrix",
        }
    }

    pub fn is_diagonal(&self) -> bool {
        !matches!(self, Family::ConstantMatrix { .. })
    }

    pub fn is_time_dependent(&self) -> bool {
        matches!(self, Family::TimeModulatedDiagonal { .. })
    }

    /// Exact ellipticity and boundedness constants of the family.
    pub fn natural_bounds(&self, dim: usize) -> Result<(f64, f64), CoefficientError> {
        let bad = |msg: &str| Err(CoefficientError::InvalidParameters(msg.to_string()));
        match self {
            Family::Identity => Ok((1.0, 1.0)),
            Family::CheckerboardDiagonal { values, period } => {
                if *period == 0 {
                    return bad("checkerboard period must be positive");
                }
                if values.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
                    return bad("checkerboard values must be positive");
                }
                Ok((values[0].min(values[1]), values[0].max(values[1])))
            }
            Family::LayeredDiagonal { values, axis } => {
                if values.is_empty() || values.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
                    return bad("layer values must be nonempty and positive");
                }
                if *axis >= dim {
                    return bad("layer axis exceeds dimension");
                }
                let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = values.iter().copied().fold(0.0, f64::max);
                Ok((lo, hi))
            }
            Family::TimeModulatedDiagonal {
                base,
                amplitude,
                period,
            } => {
                if !(*base > 0.0) || !(0.0..1.0).contains(amplitude) || !(*period > 0.0) {
                    return bad("time modulation needs base > 0, 0 <= amplitude < 1, period > 0");
                }
                Ok((base * (1.0 - amplitude), base * (1.0 + amplitude)))
            }
            Family::ConstantMatrix { entries } => {
                if entries.len() != dim * dim {
                    return bad("constant matrix must have dim*dim entries");
                }
                let m = DMatrix::from_row_slice(dim, dim, entries);
                if (&m - m.transpose()).abs().max() > 1e-14 * m.abs().max() {
                    return bad("constant matrix must be symmetric");
                }
                let eig = m.symmetric_eigenvalues();
                let lo = eig.min();
                if !(lo > 0.0) {
                    return bad("constant matrix must be positive definite");
                }
                Ok((lo, eig.max()))
            }
        }
    }
}

/// A coefficient family with its declared ellipticity `alpha` and bound `beta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientField {
    dim: usize,
    family: Family,
    alpha: f64,
    beta: f64,
}

/// Outcome of a randomized ellipticity check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EllipticityReport {
    pub min_rayleigh: f64,
    pub max_gain: f64,
    pub pass: bool,
}

impl CoefficientField {
    /// Builds the field with its exact bounds as the declared constants.
    pub fn new(dim: usize, family: Family) -> Result<Self, CoefficientError> {
        let (alpha, beta) = family.natural_bounds(dim)?;
        Ok(Self {
            dim,
            family,
            alpha,
            beta,
        })
    }

    /// Builds the field with user-declared constants. The declaration is not
    /// checked against the family; [`verify_ellipticity`](Self::verify_ellipticity) does that.
    pub fn with_bounds(
        dim: usize,
        family: Family,
        alpha: f64,
        beta: f64,
    ) -> Result<Self, CoefficientError> {
        family.natural_bounds(dim)?;
        if !(alpha > 0.0) || !(beta >= alpha) {
            return Err(CoefficientError::InvalidParameters(format!(
                "need 0 < alpha <= beta, got alpha={alpha}, beta={beta}"
            )));
        }
        Ok(Self {
            dim,
            family,
            alpha,
            beta,
        })
    }

    pub fn identity(dim: usize) -> Self {
        Self::new(dim, Family::Identity).expect("identity is always valid")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn is_time_dependent(&self) -> bool {
        self.family.is_time_dependent()
    }

    fn cell_index(x: f64, cells: usize) -> usize {
        ((x * cells as f64).floor() as usize).min(cells - 1)
    }

    /// Diagonal of the matrix at `(x, t)`; the point must already be in range.
    fn diagonal_value(&self, x: &[f64], t: f64) -> f64 {
        match &self.family {
            Family::Identity => 1.0,
            Family::CheckerboardDiagonal { values, period } => {
                let parity: usize = x.iter().map(|&c| Self::cell_index(c, *period)).sum();
                values[parity % 2]
            }
            Family::LayeredDiagonal { values, axis } => {
                values[Self::cell_index(x[*axis], values.len())]
            }
            Family::TimeModulatedDiagonal {
                base,
                amplitude,
                period,
            } => base * (1.0 + amplitude * (2.0 * PI * t / period).sin()),
            Family::ConstantMatrix { .. } => unreachable!("not diagonal"),
        }
    }

    fn check_point(&self, x: &[f64]) -> Result<(), CoefficientError> {
        if x.len() != self.dim || x.iter().any(|c| !(0.0..=1.0).contains(c)) {
            return Err(CoefficientError::OutsideDomain(x.to_vec()));
        }
        Ok(())
    }

    /// The `N x N` matrix at `(x, t)`.
    pub fn sample(&self, x: &[f64], t: f64) -> Result<DMatrix<f64>, CoefficientError> {
        self.check_point(x)?;
        Ok(match &self.family {
            Family::ConstantMatrix { entries } => {
                DMatrix::from_row_slice(self.dim, self.dim, entries)
            }
            _ => DMatrix::from_diagonal_element(self.dim, self.dim, self.diagonal_value(x, t)),
        })
    }

    /// Randomized check of `xi.K xi >= alpha |xi|^2` and `|K xi| <= beta |xi|`
    /// over `(x, t, xi)` with `t` in `[0, 1]`.
    pub fn verify_ellipticity(&self, samples: usize) -> EllipticityReport {
        self.verify_ellipticity_seeded(samples, 0x5eed)
    }

    pub fn verify_ellipticity_seeded(&self, samples: usize, seed: u64) -> EllipticityReport {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut min_rayleigh = f64::INFINITY;
        let mut max_gain: f64 = 0.0;
        for _ in 0..samples.max(1) {
            let x: Vec<f64> = (0..self.dim).map(|_| rng.random_range(0.0..=1.0)).collect();
            let t = rng.random_range(0.0..=1.0);
            let xi = DVector::from_fn(self.dim, |_, _| rng.random_range(-1.0..1.0));
            let norm2 = xi.norm_squared();
            if norm2 < 1e-24 {
                continue;
            }
            let k = self.sample(&x, t).expect("sampled inside the cube");
            let kxi = &k * &xi;
            min_rayleigh = min_rayleigh.min(xi.dot(&kxi) / norm2);
            max_gain = max_gain.max(kxi.norm() / norm2.sqrt());
        }
        let slack = 1e-12;
        EllipticityReport {
            min_rayleigh,
            max_gain,
            pass: min_rayleigh >= self.alpha * (1.0 - slack)
                && max_gain <= self.beta * (1.0 + slack),
        }
    }

    /// Harmonic mean of the axis diagonal entry at the two lattice nodes a
    /// face joins.
    pub fn face_coefficient(
        &self,
        axis: usize,
        left: &[f64],
        right: &[f64],
        t: f64,
    ) -> Result<f64, CoefficientError> {
        if !self.family.is_diagonal() {
            return Err(CoefficientError::UnsupportedAnisotropy(self.family.name()));
        }
        if axis >= self.dim {
            return Err(CoefficientError::InvalidParameters(format!(
                "axis {axis} out of range"
            )));
        }
        self.check_point(left)?;
        self.check_point(right)?;
        let a = self.diagonal_value(left, t);
        let b = self.diagonal_value(right, t);
        Ok(harmonic_mean(a, b))
    }

    /// Face coefficients on every face of `grid` at time `t`.
    pub fn face_coefficients(
        &self,
        grid: &SpaceGrid,
        t: f64,
    ) -> Result<FluxField, CoefficientError> {
        if grid.dim() != self.dim {
            return Err(CoefficientError::DimensionMismatch {
                coefficient: self.dim,
                grid: grid.dim(),
            });
        }
        let n = grid.cells_per_axis();
        let dim = grid.dim();
        let mut faces = Vec::with_capacity(dim);
        for axis in 0..dim {
            let mut values = vec![0.0; grid.faces_per_axis()];
            for (line, base) in grid.line_bases(axis).into_iter().enumerate() {
                for j in 0..n {
                    let (l, r) = grid.face_endpoints(axis, base, j);
                    values[line * n + j] = self.face_coefficient(axis, &l[..dim], &r[..dim], t)?;
                }
            }
            faces.push(values);
        }
        Ok(FluxField::new(*grid, faces).expect("coefficients are finite"))
    }
}

pub(crate) fn harmonic_mean(a: f64, b: f64) -> f64 {
    if a == b {
        a
    } else {
        2.0 * a * b / (a + b)
    }
}
