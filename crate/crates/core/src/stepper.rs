//! Backward-Euler time integration of the truncated approximating system.
//!
//! Each step runs the frozen-density iteration: with `w` fixed, solve the
//! elliptic equation `-div(M grad eta) = T_n(w)^theta`, then one implicit
//! diffusion step whose drift `-div(T_n(w) M grad eta)` is evaluated
//! explicitly with upwinding, and feed the result back as the next `w`.

use serde::{Deserialize, Serialize};
use std::sync::Arc;
use thiserror::Error;

use crate::coefficients::{CoefficientError, CoefficientField};
use crate::elliptic::{
    assemble_elliptic, solve_with, DiffusionOperator, SolverError, DEFAULT_TOLERANCE,
};
use crate::grid::{FluxField, ScalarField, SpaceGrid};
use crate::source::{SourceError, SourceSpec};
use crate::truncation::TruncationLevel;

/// Values of `w` below this are rejected instead of clipped before `w^theta`.
pub const CLIP_FLOOR: f64 = -1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("theta must lie in (0, 2/N) = (0, {bound}), got {theta}")]
    ThetaOutOfRange { theta: f64, bound: f64 },
    #[error("need 0 < dt <= T_final, got dt={dt}, T_final={t_final}")]
    InvalidTime { dt: f64, t_final: f64 },
    #[error("truncation level must be >= 1, got {0}")]
    InvalidTruncation(f64),
    #[error("fixed-point tolerance must be positive and max iterations >= 1")]
    InvalidFixedPoint,
    #[error("coefficient dimension {coefficient} does not match grid dimension {grid}")]
    DimensionMismatch { coefficient: usize, grid: usize },
    #[error("M must not depend on time")]
    TimeDependentM,
    #[error(transparent)]
    Coefficient(#[from] CoefficientError),
    #[error(transparent)]
    Source(#[from] SourceError),
}

/// Everything needed to integrate one instance of the truncated system.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProblemConfig {
    pub grid: SpaceGrid,
    pub theta: f64,
    pub t_final: f64,
    pub dt: f64,
    pub a: CoefficientField,
    pub m: CoefficientField,
    pub source: SourceSpec,
    pub n_trunc: f64,
    pub fp_tol: f64,
    pub fp_max_iter: usize,
    pub linear_tol: f64,
    pub linear_max_iter: usize,
}

impl ProblemConfig {
    /// Identity coefficients, `n = 64`, tolerances `1e-10`.
    pub fn new(
        grid: SpaceGrid,
        theta: f64,
        t_final: f64,
        dt: f64,
        source: SourceSpec,
    ) -> Result<Self, ConfigError> {
        let cfg = Self {
            grid,
            theta,
            t_final,
            dt,
            a: CoefficientField::identity(grid.dim()),
            m: CoefficientField::identity(grid.dim()),
            source,
            n_trunc: 64.0,
            fp_tol: 1e-10,
            fp_max_iter: 50,
            linear_tol: DEFAULT_TOLERANCE,
            linear_max_iter: 20 * grid.num_nodes().max(50),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_coefficients(
        mut self,
        a: CoefficientField,
        m: CoefficientField,
    ) -> Result<Self, ConfigError> {
        self.a = a;
        self.m = m;
        self.validate()?;
        Ok(self)
    }

    pub fn with_truncation(mut self, n: f64) -> Result<Self, ConfigError> {
        self.n_trunc = n;
        self.validate()?;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bound = 2.0 / self.dim() as f64;
        if !(self.theta > 0.0 && self.theta < bound) {
            return Err(ConfigError::ThetaOutOfRange {
                theta: self.theta,
                bound,
            });
        }
        if !(self.dt > 0.0 && self.t_final > 0.0 && self.dt <= self.t_final) {
            return Err(ConfigError::InvalidTime {
                dt: self.dt,
                t_final: self.t_final,
            });
        }
        if !(self.n_trunc >= 1.0) {
            return Err(ConfigError::InvalidTruncation(self.n_trunc));
        }
        if !(self.fp_tol > 0.0)
            || self.fp_max_iter == 0
            || !(self.linear_tol > 0.0 && self.linear_tol < 1.0)
        {
            return Err(ConfigError::InvalidFixedPoint);
        }
        for k in [&self.a, &self.m] {
            if k.dim() != self.dim() {
                return Err(ConfigError::DimensionMismatch {
                    coefficient: k.dim(),
                    grid: self.dim(),
                });
            }
        }
        if self.m.is_time_dependent() {
            return Err(ConfigError::TimeDependentM);
        }
        self.source.validate_for(&self.grid)?;
        Ok(())
    }

    /// Time stamps `t_j = j dt`, with the last one clamped to `T_final`.
    pub fn time_stamps(&self) -> Vec<f64> {
        let ratio = self.t_final / self.dt;
        let steps = if (ratio - ratio.round()).abs() < 1e-9 {
            ratio.round() as usize
        } else {
            ratio.ceil() as usize
        };
        let mut times: Vec<f64> = (0..steps).map(|j| j as f64 * self.dt).collect();
        times.push(self.t_final);
        times
    }

    fn truncation(&self) -> TruncationLevel {
        TruncationLevel::new(self.n_trunc).expect("validated")
    }
}

/// Per-step metadata.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepInfo {
    pub fixed_point_iterations: usize,
    pub fixed_point_residual: f64,
    pub linear_iterations: usize,
}

/// Time-indexed `(u, psi)` pairs. Index 0 is the zero initial state.
#[derive(Debug, Clone)]
pub struct Trajectory {
    grid: SpaceGrid,
    times: Vec<f64>,
    u: Vec<ScalarField>,
    psi: Vec<ScalarField>,
    steps: Vec<StepInfo>,
    problem: Option<Arc<ProblemConfig>>,
}

impl Trajectory {
    /// Builds a trajectory from precomputed fields (no solver metadata).
    pub fn from_fields(
        times: Vec<f64>,
        u: Vec<ScalarField>,
        psi: Vec<ScalarField>,
    ) -> Result<Self, String> {
        if times.is_empty() || times.len() != u.len() || times.len() != psi.len() {
            return Err("times, u and psi must be nonempty and equally long".into());
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err("time stamps must increase strictly".into());
        }
        let grid = *u[0].grid();
        if u.iter().chain(&psi).any(|f| f.grid() != &grid) {
            return Err("all fields must share one grid".into());
        }
        Ok(Self {
            grid,
            times,
            u,
            psi,
            steps: Vec::new(),
            problem: None,
        })
    }

    pub fn grid(&self) -> &SpaceGrid {
        &self.grid
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn u(&self) -> &[ScalarField] {
        &self.u
    }

    pub fn psi(&self) -> &[ScalarField] {
        &self.psi
    }

    pub fn steps(&self) -> &[StepInfo] {
        &self.steps
    }

    pub fn problem(&self) -> Option<&ProblemConfig> {
        self.problem.as_deref()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Width of the interval ending at stamp `j >= 1`.
    pub fn step_width(&self, j: usize) -> f64 {
        self.times[j] - self.times[j - 1]
    }

    pub fn min_u(&self) -> f64 {
        self.u
            .iter()
            .map(ScalarField::min)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn min_psi(&self) -> f64 {
        self.psi
            .iter()
            .map(ScalarField::min)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_u(&self) -> f64 {
        self.u
            .iter()
            .map(ScalarField::max)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_fixed_point_iterations(&self) -> usize {
        self.steps
            .iter()
            .map(|s| s.fixed_point_iterations)
            .max()
            .unwrap_or(0)
    }
}

/// Upwinded drift flux `c_M (d psi / dx_d) T_n(u_up)` on every face, where
/// `u_up` is taken from the node the velocity `M grad psi` points away from.
pub fn drift_flux(
    u: &ScalarField,
    psi: &ScalarField,
    m: &CoefficientField,
    n_trunc: f64,
) -> Result<FluxField, SolverError> {
    let coeff = m.face_coefficients(u.grid(), 0.0)?;
    let level = TruncationLevel::new(n_trunc).map_err(|e| SolverError::Config(e.to_string()))?;
    Ok(upwind_flux(u.values(), psi, &coeff, |v| level.t(v)))
}

pub(crate) fn upwind_flux(
    u: &[f64],
    psi: &ScalarField,
    coeff: &FluxField,
    transfer: impl Fn(f64) -> f64,
) -> FluxField {
    let grid = *psi.grid();
    let n = grid.cells_per_axis();
    let velocity = psi.gradient();
    let mut faces = Vec::with_capacity(grid.dim());
    for axis in 0..grid.dim() {
        let c = coeff.axis(axis);
        let vel = velocity.axis(axis);
        let mut out = vec![0.0; grid.faces_per_axis()];
        for (line, base) in grid.line_bases(axis).into_iter().enumerate() {
            for j in 0..n {
                let idx = line * n + j;
                let b = c[idx] * vel[idx];
                if b == 0.0 {
                    continue;
                }
                let (l, r) = grid.face_neighbors(axis, base, j);
                let up = if b > 0.0 { l } else { r };
                out[idx] = b * up.map_or(0.0, |i| transfer(u[i]));
            }
        }
        faces.push(out);
    }
    FluxField::new(grid, faces).expect("finite flux")
}

/// Result of one converged step.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub u: ScalarField,
    pub psi: ScalarField,
    pub info: StepInfo,
}

/// Assembled operators for one configuration.
pub struct Stepper {
    cfg: ProblemConfig,
    elliptic: DiffusionOperator,
    m_faces: FluxField,
    parabolic: Option<(f64, f64, DiffusionOperator)>,
}

impl Stepper {
    pub fn new(cfg: ProblemConfig) -> Result<Self, SolverError> {
        cfg.validate()
            .map_err(|e| SolverError::Config(e.to_string()))?;
        let elliptic = assemble_elliptic(&cfg.grid, &cfg.m)?;
        let m_faces = cfg.m.face_coefficients(&cfg.grid, 0.0)?;
        Ok(Self {
            cfg,
            elliptic,
            m_faces,
            parabolic: None,
        })
    }

    pub fn config(&self) -> &ProblemConfig {
        &self.cfg
    }

    /// `I + dt L_A(t)`, cached while `(t, dt)` repeat or `A` is static.
    fn parabolic_operator(&mut self, t: f64, dt: f64) -> Result<&DiffusionOperator, SolverError> {
        let reuse = match &self.parabolic {
            Some((t0, dt0, _)) => *dt0 == dt && (*t0 == t || !self.cfg.a.is_time_dependent()),
            None => false,
        };
        if !reuse {
            let mut coeff = self.cfg.a.face_coefficients(&self.cfg.grid, t)?;
            let scaled: Vec<Vec<f64>> = coeff
                .faces()
                .iter()
                .map(|f| f.iter().map(|c| c * dt).collect())
                .collect();
            coeff = FluxField::new(self.cfg.grid, scaled)?;
            self.parabolic = Some((
                t,
                dt,
                DiffusionOperator::from_face_coefficients(&coeff, 1.0),
            ));
        }
        Ok(&self.parabolic.as_ref().expect("just set").2)
    }

    /// `T_n(w)^theta` with `w` clipped at zero.
    fn density_power(&self, w: &ScalarField) -> ScalarField {
        let level = self.cfg.truncation();
        let theta = self.cfg.theta;
        let values = w
            .values()
            .iter()
            .map(|&v| {
                assert!(v >= CLIP_FLOOR, "density {v:e} below the clipping floor");
                let v = level.t(v.max(0.0));
                if v == 0.0 {
                    0.0
                } else {
                    v.powf(theta)
                }
            })
            .collect();
        ScalarField::new(self.cfg.grid, values).expect("finite powers")
    }

    /// One step from `u_prev` at time `t` to `t + dt`.
    pub fn step(
        &mut self,
        u_prev: &ScalarField,
        psi_guess: Option<&ScalarField>,
        t: f64,
        dt: f64,
    ) -> Result<StepOutcome, SolverError> {
        let grid = self.cfg.grid;
        let t_next = t + dt;
        let level = self.cfg.truncation();
        let source = self
            .cfg
            .source
            .generate(&grid, t_next)
            .map_err(|e| SolverError::Config(e.to_string()))?
            .map(|v| level.t(v))?;
        let tol = self.cfg.linear_tol;
        let max_iter = self.cfg.linear_max_iter;
        let fp_tol = self.cfg.fp_tol;
        let fp_max = self.cfg.fp_max_iter;

        let mut w = u_prev.clone();
        let mut eta = psi_guess.cloned().unwrap_or_else(|| grid.zeros());
        let mut linear_iterations = 0;
        let mut residual = f64::INFINITY;
        for iteration in 1..=fp_max {
            let g = self.density_power(&w);
            let (eta_new, stats) = solve_with(&self.elliptic, &g, Some(&eta), tol, max_iter)?;
            linear_iterations += stats.iterations;
            eta = eta_new;

            let flux = upwind_flux(w.values(), &eta, &self.m_faces, |v| level.t(v));
            let div = flux.divergence();
            let rhs: Vec<f64> = u_prev
                .values()
                .iter()
                .zip(div.values())
                .zip(source.values())
                .map(|((&up, &d), &f)| up + dt * (f - d))
                .collect();
            let rhs = ScalarField::new(grid, rhs)?;
            let op = self.parabolic_operator(t_next, dt)?;
            let (v, stats) = solve_with(op, &rhs, Some(&w), tol, max_iter)?;
            linear_iterations += stats.iterations;

            let diff: Vec<f64> = v
                .values()
                .iter()
                .zip(w.values())
                .map(|(a, b)| a - b)
                .collect();
            let diff_norm = ScalarField::new(grid, diff)?.lp_norm(2.0)?;
            let scale = w.lp_norm(2.0)?.max(1.0);
            residual = diff_norm / scale;
            if diff_norm <= fp_tol * scale {
                return Ok(StepOutcome {
                    u: v,
                    psi: eta,
                    info: StepInfo {
                        fixed_point_iterations: iteration,
                        fixed_point_residual: residual,
                        linear_iterations,
                    },
                });
            }
            w = v;
        }
        Err(SolverError::FixedPoint {
            iterations: fp_max,
            residual,
        })
    }
}

/// One fixed-point step of size `cfg.dt` from `u_prev` at time `t`.
pub fn schauder_step(
    u_prev: &ScalarField,
    t: f64,
    cfg: &ProblemConfig,
) -> Result<StepOutcome, SolverError> {
    Stepper::new(cfg.clone())?.step(u_prev, None, t, cfg.dt)
}

/// Integrates from the zero state to `T_final`.
pub fn run(cfg: &ProblemConfig) -> Result<Trajectory, SolverError> {
    let mut stepper = Stepper::new(cfg.clone())?;
    let grid = cfg.grid;
    let times = cfg.time_stamps();
    let mut u = vec![grid.zeros()];
    let mut psi = vec![grid.zeros()];
    let mut steps = Vec::with_capacity(times.len() - 1);
    for j in 1..times.len() {
        let dt = times[j] - times[j - 1];
        let out = stepper
            .step(&u[j - 1], Some(&psi[j - 1]), times[j - 1], dt)
            .map_err(|e| SolverError::Step {
                step: j,
                source: Box::new(e),
            })?;
        u.push(out.u);
        psi.push(out.psi);
        steps.push(out.info);
    }
    Ok(Trajectory {
        grid,
        times,
        u,
        psi,
        steps,
        problem: Some(Arc::new(cfg.clone())),
    })
}
