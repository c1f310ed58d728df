//! Experiment configuration, sweeps, invariant checks and report emission.

pub mod config;
pub mod report;
pub mod sweep;
pub mod verify;

use rayon::prelude::*;
use std::collections::BTreeMap;
use std::path::PathBuf;
use thiserror::Error;

use crate::elliptic::SolverError;
use crate::stepper::{run, ProblemConfig, Trajectory};

pub use config::{CoefficientSpec, ExperimentConfig, OutputSpec, Scenario, SweepSpec};
pub use report::{emit_report, load_trajectory, ScenarioResult, SolveSummary};
pub use sweep::{refinement_study, sweep_truncation, RefinementReport, TruncationReport, Verdict};
pub use verify::{verify_scenario, Check, VerifyReport};

/// How many times a failed run is retried with half the step.
pub const MAX_HALVINGS: usize = 3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HarnessError {
    #[error("{}: {message}", path.display())]
    Io { path: PathBuf, message: String },
    #[error("cannot parse config: {0}")]
    Parse(String),
    #[error("scenario {id}: theta = {theta} is outside (0, 2/N) = (0, {bound})")]
    ThetaOutOfRange { id: String, theta: f64, bound: f64 },
    #[error("scenario {id}: source exponent m = {m} is below 1")]
    ExponentBelowOne { id: String, m: String },
    #[error(
        "scenario {id}: singularity center {center:?} sits on a node of the {cells}-cell lattice"
    )]
    CenterOnLattice {
        id: String,
        center: Vec<f64>,
        cells: usize,
    },
    #[error("scenario id {0:?} appears more than once")]
    DuplicateId(String),
    #[error("scenario {id}: {message}")]
    InvalidScenario { id: String, message: String },
    #[error("scenario {id}: solver failed: {source}")]
    Solver {
        id: String,
        #[source]
        source: SolverError,
    },
    #[error("scenario {id}: {message}")]
    Diagnostic { id: String, message: String },
}

impl HarnessError {
    /// 2 for configuration and I/O problems, 3 for non-convergence, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Solver { .. } => 3,
            HarnessError::Diagnostic { .. } => 1,
            _ => 2,
        }
    }
}

/// A finished run together with the step actually used.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub trajectory: Trajectory,
    pub dt: f64,
    pub halvings: usize,
}

fn retryable(e: &SolverError) -> bool {
    match e {
        SolverError::FixedPoint { .. } | SolverError::IterationLimit { .. } => true,
        SolverError::Step { source, .. } => retryable(source),
        _ => false,
    }
}

/// Runs `cfg`, halving `dt` up to [`MAX_HALVINGS`] times on non-convergence.
pub fn run_with_retry(cfg: &ProblemConfig) -> Result<RunOutcome, SolverError> {
    let mut cfg = cfg.clone();
    let mut halvings = 0;
    loop {
        match run(&cfg) {
            Ok(trajectory) => {
                return Ok(RunOutcome {
                    trajectory,
                    dt: cfg.dt,
                    halvings,
                })
            }
            Err(e) if retryable(&e) && halvings < MAX_HALVINGS => {
                cfg.dt *= 0.5;
                halvings += 1;
            }
            Err(e) => return Err(e),
        }
    }
}

pub(crate) fn solver_error(id: &str, source: SolverError) -> HarnessError {
    HarnessError::Solver {
        id: id.to_string(),
        source,
    }
}

pub(crate) fn diagnostic(id: &str, message: impl ToString) -> HarnessError {
    HarnessError::Diagnostic {
        id: id.to_string(),
        message: message.to_string(),
    }
}

/// What to do with every scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Solve,
    Sweep,
    Verify,
}

/// Runs all scenarios concurrently; results are keyed by id, so the merged
/// map is independent of completion order.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    mode: Mode,
) -> Result<BTreeMap<String, ScenarioResult>, HarnessError> {
    let results: Vec<Result<ScenarioResult, HarnessError>> = cfg
        .scenarios
        .par_iter()
        .map(|s| match mode {
            Mode::Solve => report::solve_scenario(s),
            Mode::Sweep => sweep::sweep_scenario(s),
            Mode::Verify => verify::verify_scenario(s).map(|v| ScenarioResult {
                id: s.id.clone(),
                verify: Some(v),
                ..ScenarioResult::default()
            }),
        })
        .collect();
    let mut merged = BTreeMap::new();
    for r in results {
        let r = r?;
        merged.insert(r.id.clone(), r);
    }
    Ok(merged)
}
