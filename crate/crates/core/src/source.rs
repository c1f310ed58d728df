//! Nonnegative source terms `f(x,t)` with prescribed Lebesgue summability.

use num_rational::Rational64;
use num_traits::{One, ToPrimitive};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

use crate::grid::{GridError, ScalarField, SpaceGrid};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SourceError {
    #[error("summability exponent m must be >= 1, got {0}")]
    ExponentBelowOne(String),
    #[error("singularity margin epsilon must lie in (0, 1), got {0}")]
    InvalidMargin(f64),
    #[error(
        "singularity center {center:?} coincides with a lattice node of the {cells}-cell grid"
    )]
    CenterOnLattice { center: Vec<f64>, cells: usize },
    #[error("singularity center {0:?} is not strictly inside the unit cube")]
    CenterOutside(Vec<f64>),
    #[error("source parameter out of range: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Exact rational exponent; parses `"6/5"`, `"2"` or a JSON integer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Exponent(pub Rational64);

impl Exponent {
    pub fn to_f64(self) -> f64 {
        self.0.to_f64().expect("rational fits in f64")
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl FromStr for Exponent {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Rational64::from_str(s.trim())
            .map(Exponent)
            .map_err(|e| format!("cannot parse rational {s:?}: {e}"))
    }
}

impl Serialize for Exponent {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.0.to_string())
    }
}

impl<'de> Deserialize<'de> for Exponent {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(i64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Int(i) => Ok(Exponent(Rational64::from_integer(i))),
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

fn default_amplitude() -> f64 {
    1.0
}

/// Source family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SourceSpec {
    Constant {
        value: f64,
    },
    /// `amplitude * prod_d sin(pi x_d) * (1 + sin(2 pi t / period) / 2)`.
    Separable {
        amplitude: f64,
        period: f64,
    },
    /// `amplitude * |x - x0|^{-a}` with `a = (N/m)(1 - epsilon)`.
    SpatialSingularity {
        m: Exponent,
        epsilon: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        center: Option<Vec<f64>>,
        #[serde(default = "default_amplitude")]
        amplitude: f64,
    },
}

impl SourceSpec {
    pub fn constant(value: f64) -> Self {
        SourceSpec::Constant { value }
    }

    pub fn singular(m: Rational64, epsilon: f64) -> Self {
        SourceSpec::SpatialSingularity {
            m: Exponent(m),
            epsilon,
            center: None,
            amplitude: 1.0,
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            SourceSpec::Constant { value } => *value == 0.0,
            SourceSpec::Separable { amplitude, .. } => *amplitude == 0.0,
            SourceSpec::SpatialSingularity { amplitude, .. } => *amplitude == 0.0,
        }
    }

    /// Summability index of the datum; `None` means bounded.
    pub fn summability(&self) -> Option<Rational64> {
        match self {
            SourceSpec::SpatialSingularity { m, .. } => Some(m.0),
            _ => None,
        }
    }

    /// Singularity exponent `a = (N/m)(1 - epsilon)`.
    pub fn singularity_exponent(&self, dim: usize) -> Option<f64> {
        match self {
            SourceSpec::SpatialSingularity { m, epsilon, .. } => {
                Some(dim as f64 / m.to_f64() * (1.0 - epsilon))
            }
            _ => None,
        }
    }

    /// Default singularity center `0.5 + h/3` in every component.
    pub fn default_center(grid: &SpaceGrid) -> Vec<f64> {
        vec![0.5 + grid.spacing() / 3.0; grid.dim()]
    }

    pub fn center_for(&self, grid: &SpaceGrid) -> Option<Vec<f64>> {
        match self {
            SourceSpec::SpatialSingularity { center, .. } => {
                Some(center.clone().unwrap_or_else(|| Self::default_center(grid)))
            }
            _ => None,
        }
    }

    /// Parameter checks that do not depend on a grid.
    pub fn validate(&self) -> Result<(), SourceError> {
        match self {
            SourceSpec::Constant { value } => {
                if !(value.is_finite() && *value >= 0.0) {
                    return Err(SourceError::InvalidParameter(format!(
                        "constant value {value}"
                    )));
                }
            }
            SourceSpec::Separable { amplitude, period } => {
                if !(amplitude.is_finite() && *amplitude >= 0.0 && *period > 0.0) {
                    return Err(SourceError::InvalidParameter(format!(
                        "separable amplitude {amplitude}, period {period}"
                    )));
                }
            }
            SourceSpec::SpatialSingularity {
                m,
                epsilon,
                center,
                amplitude,
            } => {
                if m.0 < Rational64::one() {
                    return Err(SourceError::ExponentBelowOne(m.to_string()));
                }
                if !(*epsilon > 0.0 && *epsilon < 1.0) {
                    return Err(SourceError::InvalidMargin(*epsilon));
                }
                if !(amplitude.is_finite() && *amplitude >= 0.0) {
                    return Err(SourceError::InvalidParameter(format!(
                        "amplitude {amplitude}"
                    )));
                }
                if let Some(c) = center {
                    if c.iter().any(|&x| !(x > 0.0 && x < 1.0)) {
                        return Err(SourceError::CenterOutside(c.clone()));
                    }
                }
            }
        }
        Ok(())
    }

    /// Full validation against a grid, including the off-lattice requirement.
    pub fn validate_for(&self, grid: &SpaceGrid) -> Result<(), SourceError> {
        self.validate()?;
        if let Some(center) = self.center_for(grid) {
            if center.len() != grid.dim() {
                return Err(SourceError::InvalidParameter(format!(
                    "center has {} components, grid has dimension {}",
                    center.len(),
                    grid.dim()
                )));
            }
            if center.iter().any(|&x| !(x > 0.0 && x < 1.0)) {
                return Err(SourceError::CenterOutside(center));
            }
            let n = grid.cells_per_axis() as f64;
            let on_lattice = center.iter().all(|&x| {
                let s = x * n;
                (s - s.round()).abs() < 1e-9
            });
            if on_lattice {
                return Err(SourceError::CenterOnLattice {
                    center,
                    cells: grid.cells_per_axis(),
                });
            }
        }
        Ok(())
    }

    /// Samples `f(., t)` at the interior nodes.
    pub fn generate(&self, grid: &SpaceGrid, t: f64) -> Result<ScalarField, SourceError> {
        self.validate_for(grid)?;
        let field = match self {
            SourceSpec::Constant { value } => ScalarField::constant(*grid, *value)?,
            SourceSpec::Separable { amplitude, period } => {
                let temporal = 1.0 + 0.5 * (2.0 * PI * t / period).sin();
                grid.sample(|x| {
                    amplitude * temporal * x.iter().map(|&c| (PI * c).sin()).product::<f64>()
                })?
            }
            SourceSpec::SpatialSingularity { amplitude, .. } => {
                let a = self
                    .singularity_exponent(grid.dim())
                    .expect("singular kind");
                let center = self.center_for(grid).expect("singular kind");
                grid.sample(|x| {
                    let r2: f64 = x.iter().zip(&center).map(|(a, b)| (a - b) * (a - b)).sum();
                    amplitude * r2.powf(-0.5 * a)
                })?
            }
        };
        Ok(field)
    }
}

pub fn generate_source(
    spec: &SourceSpec,
    grid: &SpaceGrid,
    t: f64,
) -> Result<ScalarField, SourceError> {
    spec.generate(grid, t)
}
