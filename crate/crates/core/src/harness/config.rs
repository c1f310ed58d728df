use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::path::Path;

use super::HarnessError;
use crate::coefficients::{CoefficientField, Family};
use crate::grid::SpaceGrid;
use crate::source::{SourceError, SourceSpec};
use crate::stepper::{ConfigError, ProblemConfig};

/// A coefficient family plus optional declared bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientSpec {
    #[serde(flatten)]
    pub family: Family,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
}

impl Default for CoefficientSpec {
    fn default() -> Self {
        Self {
            family: Family::Identity,
            alpha: None,
            beta: None,
        }
    }
}

impl CoefficientSpec {
    pub fn build(
        &self,
        dim: usize,
    ) -> Result<CoefficientField, crate::coefficients::CoefficientError> {
        match (self.alpha, self.beta) {
            (None, None) => CoefficientField::new(dim, self.family.clone()),
            (a, b) => {
                let (na, nb) = self.family.natural_bounds(dim)?;
                CoefficientField::with_bounds(
                    dim,
                    self.family.clone(),
                    a.unwrap_or(na),
                    b.unwrap_or(nb),
                )
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    #[serde(default)]
    pub truncation_levels: Vec<f64>,
    #[serde(default)]
    pub grid_sizes: Vec<usize>,
    /// `c` in `dt = c h^2` for refinement runs; defaults to `dt * cells^2`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt_scale: Option<f64>,
    #[serde(default = "default_p_grid")]
    pub p_grid: Vec<f64>,
    #[serde(default = "default_slope_tol")]
    pub slope_tol: f64,
}

fn default_p_grid() -> Vec<f64> {
    (4..=48).map(|i| i as f64 * 0.25).collect()
}

fn default_slope_tol() -> f64 {
    crate::norms::SLOPE_TOL
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            truncation_levels: Vec::new(),
            grid_sizes: Vec::new(),
            dt_scale: None,
            p_grid: default_p_grid(),
            slope_tol: default_slope_tol(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OutputSpec {
    /// Relative to the report directory chosen at run time.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
    #[serde(default)]
    pub dump_trajectory: bool,
}

fn default_n_trunc() -> f64 {
    64.0
}
fn default_fp_tol() -> f64 {
    1e-10
}
fn default_fp_max_iter() -> usize {
    50
}
fn default_linear_tol() -> f64 {
    crate::elliptic::DEFAULT_TOLERANCE
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub id: String,
    pub dim: usize,
    pub cells: usize,
    pub theta: f64,
    pub t_final: f64,
    pub dt: f64,
    #[serde(default)]
    pub a: CoefficientSpec,
    #[serde(default)]
    pub m: CoefficientSpec,
    pub source: SourceSpec,
    #[serde(default = "default_n_trunc")]
    pub n_trunc: f64,
    #[serde(default = "default_fp_tol")]
    pub fp_tol: f64,
    #[serde(default = "default_fp_max_iter")]
    pub fp_max_iter: usize,
    #[serde(default = "default_linear_tol")]
    pub linear_tol: f64,
    #[serde(default)]
    pub sweep: SweepSpec,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default)]
    pub seed: u64,
}

impl Scenario {
    /// Minimal scenario with identity coefficients and default sweeps.
    pub fn new(
        id: &str,
        dim: usize,
        cells: usize,
        theta: f64,
        t_final: f64,
        dt: f64,
        source: SourceSpec,
    ) -> Self {
        Self {
            id: id.to_string(),
            dim,
            cells,
            theta,
            t_final,
            dt,
            a: CoefficientSpec::default(),
            m: CoefficientSpec::default(),
            source,
            n_trunc: default_n_trunc(),
            fp_tol: default_fp_tol(),
            fp_max_iter: default_fp_max_iter(),
            linear_tol: default_linear_tol(),
            sweep: SweepSpec::default(),
            output: OutputSpec::default(),
            seed: 0,
        }
    }

    pub fn problem(&self) -> Result<ProblemConfig, HarnessError> {
        self.problem_with(self.cells, self.dt, self.n_trunc)
    }

    /// The scenario's problem with the grid size, step and truncation overridden.
    pub fn problem_with(
        &self,
        cells: usize,
        dt: f64,
        n_trunc: f64,
    ) -> Result<ProblemConfig, HarnessError> {
        let id = &self.id;
        let invalid = |message: String| HarnessError::InvalidScenario {
            id: id.clone(),
            message,
        };
        let grid = SpaceGrid::new(self.dim, cells).map_err(|e| invalid(e.to_string()))?;
        let a = self
            .a
            .build(self.dim)
            .map_err(|e| invalid(format!("A: {e}")))?;
        let m = self
            .m
            .build(self.dim)
            .map_err(|e| invalid(format!("M: {e}")))?;
        let build = || -> Result<ProblemConfig, ConfigError> {
            let mut cfg =
                ProblemConfig::new(grid, self.theta, self.t_final, dt, self.source.clone())?
                    .with_coefficients(a, m)?
                    .with_truncation(n_trunc)?;
            cfg.fp_tol = self.fp_tol;
            cfg.fp_max_iter = self.fp_max_iter;
            cfg.linear_tol = self.linear_tol;
            cfg.validate()?;
            Ok(cfg)
        };
        build().map_err(|e| match e {
            ConfigError::ThetaOutOfRange { theta, bound } => HarnessError::ThetaOutOfRange {
                id: id.clone(),
                theta,
                bound,
            },
            ConfigError::Source(SourceError::ExponentBelowOne(m)) => {
                HarnessError::ExponentBelowOne { id: id.clone(), m }
            }
            ConfigError::Source(SourceError::CenterOnLattice { center, cells }) => {
                HarnessError::CenterOnLattice {
                    id: id.clone(),
                    center,
                    cells,
                }
            }
            other => invalid(other.to_string()),
        })
    }

    /// Validates the base problem and every sweep variant.
    pub fn validate(&self) -> Result<(), HarnessError> {
        self.problem()?;
        for &n in &self.sweep.truncation_levels {
            self.problem_with(self.cells, self.dt, n)?;
        }
        for &cells in &self.sweep.grid_sizes {
            self.problem_with(cells, self.refinement_dt(cells), self.n_trunc)?;
        }
        if self.sweep.p_grid.iter().any(|&p| !(p >= 1.0)) {
            return Err(HarnessError::InvalidScenario {
                id: self.id.clone(),
                message: "p_grid entries must be >= 1".into(),
            });
        }
        Ok(())
    }

    /// `dt = c h^2` with `c` from the sweep spec or from the base scenario.
    /// Never exceeds `t_final`.
    pub fn refinement_dt(&self, cells: usize) -> f64 {
        let c = self
            .sweep
            .dt_scale
            .unwrap_or(self.dt * (self.cells * self.cells) as f64);
        let h = 1.0 / cells as f64;
        (c * h * h).min(self.t_final)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub scenarios: Vec<Scenario>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let cfg: Self =
            serde_json::from_str(text).map_err(|e| HarnessError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let mut seen = BTreeSet::new();
        for s in &self.scenarios {
            if !seen.insert(s.id.as_str()) {
                return Err(HarnessError::DuplicateId(s.id.clone()));
            }
            s.validate()?;
        }
        Ok(())
    }
}
