use num_rational::Rational64;
use num_traits::ToPrimitive;
use serde::Serialize;

use super::{diagnostic, run_with_retry, solver_error, HarnessError, Scenario, ScenarioResult};
use crate::norms::{empirical_exponent_with_tol, psi_bounds, space_time_lp, NormError};
use crate::regime::classify;

/// Uniformity threshold for the two largest truncation levels.
pub const UNIFORMITY_TOL: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TruncationRow {
    pub n: f64,
    pub psi_linf: f64,
    pub grad_psi_linf_l2: f64,
    pub u_mdstar: f64,
    /// Largest relative change of the two `psi` norms against the previous row.
    pub rel_change: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TruncationReport {
    /// Exponent used for the `u` column; `inf` when `m**` is undefined.
    pub u_exponent: f64,
    pub rows: Vec<TruncationRow>,
    pub uniform: bool,
}

pub(crate) fn rel(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// `m**` of the source as a float, `inf` for bounded data or when undefined.
fn mdstar_exponent(s: &Scenario) -> (Option<Rational64>, f64) {
    let m = s
        .source
        .summability()
        .and_then(|m| classify(m, s.dim as i64).ok())
        .and_then(|r| r.m_dstar);
    (
        m,
        m.map_or(f64::INFINITY, |m| m.to_f64().expect("finite rational")),
    )
}

fn norm_err(id: &str) -> impl Fn(NormError) -> HarnessError + '_ {
    move |e| diagnostic(id, e)
}

/// Runs the scenario at each truncation level in `n_values`.
pub fn sweep_truncation(s: &Scenario, n_values: &[f64]) -> Result<TruncationReport, HarnessError> {
    if n_values.len() < 2 {
        return Err(HarnessError::InvalidScenario {
            id: s.id.clone(),
            message: format!(
                "truncation sweep needs at least 2 levels, got {}",
                n_values.len()
            ),
        });
    }
    let (_, q) = mdstar_exponent(s);
    let mut rows: Vec<TruncationRow> = Vec::with_capacity(n_values.len());
    for &n in n_values {
        let cfg = s.problem_with(s.cells, s.dt, n)?;
        let out = run_with_retry(&cfg).map_err(|e| solver_error(&s.id, e))?;
        let (psi_linf, grad) = psi_bounds(&out.trajectory);
        let u_mdstar = space_time_lp(&out.trajectory, q).map_err(norm_err(&s.id))?;
        let rel_change = rows.last().map_or(0.0, |p| {
            rel(psi_linf, p.psi_linf).max(rel(grad, p.grad_psi_linf_l2))
        });
        rows.push(TruncationRow {
            n,
            psi_linf,
            grad_psi_linf_l2: grad,
            u_mdstar,
            rel_change,
        });
    }
    let mut sorted: Vec<&TruncationRow> = rows.iter().collect();
    sorted.sort_by(|a, b| a.n.total_cmp(&b.n));
    let (hi, lo) = (sorted[sorted.len() - 1], sorted[sorted.len() - 2]);
    let uniform = rel(hi.psi_linf, lo.psi_linf).max(rel(hi.grad_psi_linf_l2, lo.grad_psi_linf_l2))
        < UNIFORMITY_TOL;
    Ok(TruncationReport {
        u_exponent: q,
        rows,
        uniform,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Consistent,
    Inconsistent,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RefinementRow {
    pub cells: usize,
    pub h: f64,
    pub dt: f64,
    /// Space-time `L^p` norms, aligned with the report's `p_grid`.
    pub norms: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RefinementReport {
    pub p_grid: Vec<f64>,
    pub rows: Vec<RefinementRow>,
    pub empirical_exponent: Option<f64>,
    pub m_dstar: Option<String>,
    pub target: f64,
    pub verdict: Verdict,
}

/// Runs the scenario on each grid with `dt = c h^2` and estimates the largest
/// refinement-stable Lebesgue exponent.
pub fn refinement_study(
    s: &Scenario,
    grid_sizes: &[usize],
) -> Result<RefinementReport, HarnessError> {
    if grid_sizes.len() < 3 {
        return Err(HarnessError::InvalidScenario {
            id: s.id.clone(),
            message: format!(
                "refinement study needs at least 3 grids, got {}",
                grid_sizes.len()
            ),
        });
    }
    let p_grid = s.sweep.p_grid.clone();
    let mut rows = Vec::with_capacity(grid_sizes.len());
    for &cells in grid_sizes {
        let cfg = s.problem_with(cells, s.refinement_dt(cells), s.n_trunc)?;
        let out = run_with_retry(&cfg).map_err(|e| solver_error(&s.id, e))?;
        let norms = p_grid
            .iter()
            .map(|&p| space_time_lp(&out.trajectory, p))
            .collect::<Result<Vec<_>, _>>()
            .map_err(norm_err(&s.id))?;
        rows.push(RefinementRow {
            cells,
            h: 1.0 / cells as f64,
            dt: out.dt,
            norms,
        });
    }
    let levels: Vec<(f64, Vec<f64>)> = rows.iter().map(|r| (r.h, r.norms.clone())).collect();
    let estimate = empirical_exponent_with_tol(&levels, &p_grid, s.sweep.slope_tol)
        .map_err(norm_err(&s.id))?;
    let (m_dstar, q) = mdstar_exponent(s);
    let p_max = p_grid.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let target = 0.8 * q.min(p_max);
    let verdict = match estimate {
        Some(p) if p >= target => Verdict::Consistent,
        _ => Verdict::Inconsistent,
    };
    Ok(RefinementReport {
        p_grid,
        rows,
        empirical_exponent: estimate,
        m_dstar: m_dstar.map(|m| m.to_string()),
        target,
        verdict,
    })
}

/// Truncation sweep and refinement study where the scenario asks for them.
pub fn sweep_scenario(s: &Scenario) -> Result<ScenarioResult, HarnessError> {
    let truncation = if s.sweep.truncation_levels.len() >= 2 {
        Some(sweep_truncation(s, &s.sweep.truncation_levels)?)
    } else {
        None
    };
    let refinement = if s.sweep.grid_sizes.len() >= 3 {
        Some(refinement_study(s, &s.sweep.grid_sizes)?)
    } else {
        None
    };
    Ok(ScenarioResult {
        id: s.id.clone(),
        truncation,
        refinement,
        ..ScenarioResult::default()
    })
}
