use serde::Serialize;

use super::{diagnostic, run_with_retry, solver_error, sweep_truncation, HarnessError, Scenario};
use crate::norms::{entropy_terms, gn_ratio};
use crate::stepper::Trajectory;

/// Absolute slack of the discrete mass bound.
pub const MASS_TOL: f64 = 1e-10;
/// Entropy residual allowance relative to the size of its terms.
pub const ENTROPY_REL_TOL: f64 = 1e-6;
const ELLIPTICITY_SAMPLES: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub value: f64,
    pub bound: f64,
}

impl Check {
    fn new(name: &str, value: f64, bound: f64, pass: bool) -> Self {
        Self {
            name: name.to_string(),
            pass,
            value,
            bound,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
    pub pass: bool,
}

/// `max_j (|u(t_j)|_1 - int_0^{t_j} int f)` with the source integral taken on
/// the solver's own stamps and nodes.
pub fn mass_excess(traj: &Trajectory, s: &Scenario) -> Result<f64, HarnessError> {
    let grid = *traj.grid();
    let mut supplied = 0.0;
    let mut worst = f64::NEG_INFINITY;
    for j in 0..traj.len() {
        if j > 0 {
            let f = s
                .source
                .generate(&grid, traj.times()[j])
                .map_err(|e| diagnostic(&s.id, e))?;
            supplied += traj.step_width(j) * f.lp_norm(1.0).expect("valid exponent");
        }
        let mass = traj.u()[j].lp_norm(1.0).expect("valid exponent");
        worst = worst.max(mass - supplied);
    }
    Ok(worst)
}

/// Largest `residual / scale` over `k in {max/2, 2 max}` and three stamps.
/// The level `k = 0` must give exactly zero; otherwise the result is `inf`.
pub fn entropy_worst(traj: &Trajectory, id: &str) -> Result<f64, HarnessError> {
    let max = traj.max_u().max(0.0);
    let last = traj.len() - 1;
    let stamps = [1.min(last), last / 2, last];
    let mut worst = f64::NEG_INFINITY;
    for k in [0.0, 0.5 * max, 2.0 * max] {
        for &t in &stamps {
            let terms = entropy_terms(traj, k, t).map_err(|e| diagnostic(id, e))?;
            let scale = terms.scale();
            let r = terms.residual();
            if k == 0.0 {
                if r != 0.0 {
                    return Ok(f64::INFINITY);
                }
                continue;
            }
            let ratio = if scale == 0.0 { r } else { r / scale };
            worst = worst.max(ratio);
        }
    }
    Ok(worst)
}

/// Runs the base problem and checks positivity, mass, entropy, the
/// Gagliardo-Nirenberg ratio, ellipticity and, when configured, uniformity
/// of `psi` across truncation levels.
pub fn verify_scenario(s: &Scenario) -> Result<VerifyReport, HarnessError> {
    let cfg = s.problem()?;
    let mut checks = Vec::new();
    for (name, field) in [("ellipticity_a", &cfg.a), ("ellipticity_m", &cfg.m)] {
        let rep = field.verify_ellipticity_seeded(ELLIPTICITY_SAMPLES, s.seed);
        checks.push(Check::new(name, rep.min_rayleigh, field.alpha(), rep.pass));
    }
    let out = run_with_retry(&cfg).map_err(|e| solver_error(&s.id, e))?;
    let traj = &out.trajectory;

    let min = traj.min_u().min(traj.min_psi());
    checks.push(Check::new("positivity", min, 0.0, min >= 0.0));

    let excess = mass_excess(traj, s)?;
    checks.push(Check::new("mass", excess, MASS_TOL, excess <= MASS_TOL));

    let entropy = entropy_worst(traj, &s.id)?;
    checks.push(Check::new(
        "entropy",
        entropy,
        ENTROPY_REL_TOL,
        entropy <= ENTROPY_REL_TOL,
    ));

    let gn = gn_ratio(traj).map_err(|e| diagnostic(&s.id, e))?;
    checks.push(Check::new(
        "gn_ratio",
        gn,
        f64::INFINITY,
        gn.is_finite() && gn >= 0.0,
    ));

    if s.sweep.truncation_levels.len() >= 2 {
        let rep = sweep_truncation(s, &s.sweep.truncation_levels)?;
        let mut rows: Vec<_> = rep.rows.iter().collect();
        rows.sort_by(|a, b| a.n.total_cmp(&b.n));
        let (lo, hi) = (rows[rows.len() - 2], rows[rows.len() - 1]);
        let change = super::sweep::rel(hi.psi_linf, lo.psi_linf)
            .max(super::sweep::rel(hi.grad_psi_linf_l2, lo.grad_psi_linf_l2));
        checks.push(Check::new(
            "psi_uniformity",
            change,
            super::sweep::UNIFORMITY_TOL,
            rep.uniform,
        ));
    }
    let pass = checks.iter().all(|c| c.pass);
    Ok(VerifyReport { checks, pass })
}
