use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use super::{
    run_with_retry, solver_error, HarnessError, RefinementReport, Scenario, TruncationReport,
    VerifyReport,
};
use crate::grid::{ScalarField, SpaceGrid};
use crate::stepper::Trajectory;

pub const CSV_HEADER: &str = "scenario_id,axis_name,axis_value,norm_name,value";

/// Per-stamp norms of a single run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveSummary {
    pub cells: usize,
    pub dt: f64,
    pub halvings: usize,
    pub times: Vec<f64>,
    pub mass_l1: Vec<f64>,
    pub u_linf: Vec<f64>,
    pub psi_linf: Vec<f64>,
    pub grad_psi_l2: Vec<f64>,
    pub min_u: f64,
    pub min_psi: f64,
    pub max_fixed_point_iterations: usize,
}

impl SolveSummary {
    pub fn from_trajectory(traj: &Trajectory, dt: f64, halvings: usize) -> Self {
        let norm = |f: &ScalarField, p: f64| f.lp_norm(p).expect("valid exponent");
        Self {
            cells: traj.grid().cells_per_axis(),
            dt,
            halvings,
            times: traj.times().to_vec(),
            mass_l1: traj.u().iter().map(|u| norm(u, 1.0)).collect(),
            u_linf: traj.u().iter().map(|u| norm(u, f64::INFINITY)).collect(),
            psi_linf: traj.psi().iter().map(|p| norm(p, f64::INFINITY)).collect(),
            grad_psi_l2: traj
                .psi()
                .iter()
                .map(|p| p.gradient().lq_norm(2.0).expect("valid exponent"))
                .collect(),
            min_u: traj.min_u(),
            min_psi: traj.min_psi(),
            max_fixed_point_iterations: traj.max_fixed_point_iterations(),
        }
    }

    fn series(&self) -> [(&'static str, &[f64]); 4] {
        [
            ("mass_l1", &self.mass_l1),
            ("u_linf", &self.u_linf),
            ("psi_linf", &self.psi_linf),
            ("grad_psi_l2", &self.grad_psi_l2),
        ]
    }
}

/// Everything computed for one scenario.
#[derive(Debug, Clone, Default, Serialize)]
pub struct ScenarioResult {
    pub id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solve: Option<SolveSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truncation: Option<TruncationReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub refinement: Option<RefinementReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verify: Option<VerifyReport>,
    #[serde(skip)]
    pub trajectory: Option<Arc<Trajectory>>,
    #[serde(skip)]
    pub output_dir: Option<String>,
    #[serde(skip)]
    pub dump_trajectory: bool,
}

/// Single run of the base problem.
pub fn solve_scenario(s: &Scenario) -> Result<ScenarioResult, HarnessError> {
    let cfg = s.problem()?;
    let out = run_with_retry(&cfg).map_err(|e| solver_error(&s.id, e))?;
    Ok(ScenarioResult {
        id: s.id.clone(),
        solve: Some(SolveSummary::from_trajectory(
            &out.trajectory,
            out.dt,
            out.halvings,
        )),
        trajectory: Some(Arc::new(out.trajectory)),
        output_dir: s.output.dir.clone(),
        dump_trajectory: s.output.dump_trajectory,
        ..ScenarioResult::default()
    })
}

fn fmt_value(v: f64) -> String {
    format!("{v:?}")
}

struct Csv {
    id: String,
    body: String,
}

impl Csv {
    fn new(id: &str) -> Self {
        Self {
            id: id.to_string(),
            body: format!("{CSV_HEADER}\n"),
        }
    }

    fn row(&mut self, axis: &str, axis_value: f64, norm: &str, value: f64) {
        writeln!(
            self.body,
            "{},{axis},{},{norm},{}",
            self.id,
            fmt_value(axis_value),
            fmt_value(value)
        )
        .expect("string write");
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), HarnessError> {
    std::fs::write(path, contents).map_err(|e| HarnessError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

fn dat(x: &[f64], y: &[f64]) -> String {
    x.iter()
        .zip(y)
        .map(|(a, b)| format!("{} {}\n", fmt_value(*a), fmt_value(*b)))
        .collect()
}

#[derive(Serialize, Deserialize)]
struct TrajectoryDump {
    dim: usize,
    cells: usize,
    times: Vec<f64>,
    u: Vec<Vec<f64>>,
    psi: Vec<Vec<f64>>,
}

pub fn dump_trajectory(traj: &Trajectory, path: &Path) -> Result<(), HarnessError> {
    let dump = TrajectoryDump {
        dim: traj.grid().dim(),
        cells: traj.grid().cells_per_axis(),
        times: traj.times().to_vec(),
        u: traj.u().iter().map(|f| f.values().to_vec()).collect(),
        psi: traj.psi().iter().map(|f| f.values().to_vec()).collect(),
    };
    write_file(path, &serde_json::to_string(&dump).expect("serializable"))
}

pub fn load_trajectory(path: &Path) -> Result<Trajectory, HarnessError> {
    let io = |message: String| HarnessError::Io {
        path: path.to_path_buf(),
        message,
    };
    let text = std::fs::read_to_string(path).map_err(|e| io(e.to_string()))?;
    let dump: TrajectoryDump = serde_json::from_str(&text).map_err(|e| io(e.to_string()))?;
    let grid = SpaceGrid::new(dump.dim, dump.cells).map_err(|e| io(e.to_string()))?;
    let fields = |v: Vec<Vec<f64>>| -> Result<Vec<ScalarField>, HarnessError> {
        v.into_iter()
            .map(|x| ScalarField::new(grid, x).map_err(|e| io(e.to_string())))
            .collect()
    };
    Trajectory::from_fields(dump.times, fields(dump.u)?, fields(dump.psi)?).map_err(io)
}

/// Writes `summary.json`, one long-format CSV per sweep, two-column `.dat`
/// series, and trajectory dumps where requested. Returns the written paths
/// in a fixed order.
pub fn emit_report(
    results: &BTreeMap<String, ScenarioResult>,
    dir: &Path,
) -> Result<Vec<PathBuf>, HarnessError> {
    let mkdir = |p: &Path| {
        std::fs::create_dir_all(p).map_err(|e| HarnessError::Io {
            path: p.to_path_buf(),
            message: e.to_string(),
        })
    };
    mkdir(dir)?;
    let mut written = Vec::new();
    let put =
        |path: PathBuf, contents: String, written: &mut Vec<PathBuf>| -> Result<(), HarnessError> {
            write_file(&path, &contents)?;
            written.push(path);
            Ok(())
        };

    let summary = serde_json::json!({
        "scenario_count": results.len(),
        "scenarios": results,
    });
    put(
        dir.join("summary.json"),
        serde_json::to_string_pretty(&summary).expect("serializable") + "\n",
        &mut written,
    )?;

    for (id, r) in results {
        let sub = match &r.output_dir {
            Some(d) => dir.join(d),
            None => dir.to_path_buf(),
        };
        mkdir(&sub)?;
        if let Some(s) = &r.solve {
            let mut csv = Csv::new(id);
            for (name, values) in s.series() {
                for (t, v) in s.times.iter().zip(values) {
                    csv.row("t", *t, name, *v);
                }
            }
            put(sub.join(format!("{id}_solve.csv")), csv.body, &mut written)?;
            for (name, values) in s.series() {
                put(
                    sub.join(format!("{id}_solve_{name}.dat")),
                    dat(&s.times, values),
                    &mut written,
                )?;
            }
            if r.dump_trajectory {
                if let Some(traj) = &r.trajectory {
                    let path = sub.join(format!("{id}_trajectory.json"));
                    dump_trajectory(traj, &path)?;
                    written.push(path);
                }
            }
        }
        if let Some(t) = &r.truncation {
            let mut csv = Csv::new(id);
            let n: Vec<f64> = t.rows.iter().map(|row| row.n).collect();
            let columns: [(&str, Vec<f64>); 4] = [
                ("psi_linf", t.rows.iter().map(|row| row.psi_linf).collect()),
                (
                    "grad_psi_linf_l2",
                    t.rows.iter().map(|row| row.grad_psi_linf_l2).collect(),
                ),
                ("u_mdstar", t.rows.iter().map(|row| row.u_mdstar).collect()),
                (
                    "rel_change",
                    t.rows.iter().map(|row| row.rel_change).collect(),
                ),
            ];
            for (name, values) in &columns {
                for (x, v) in n.iter().zip(values) {
                    csv.row("n", *x, name, *v);
                }
            }
            put(
                sub.join(format!("{id}_truncation.csv")),
                csv.body,
                &mut written,
            )?;
            for (name, values) in &columns {
                put(
                    sub.join(format!("{id}_truncation_{name}.dat")),
                    dat(&n, values),
                    &mut written,
                )?;
            }
        }
        if let Some(rf) = &r.refinement {
            let mut csv = Csv::new(id);
            let h: Vec<f64> = rf.rows.iter().map(|row| row.h).collect();
            for (i, p) in rf.p_grid.iter().enumerate() {
                let name = format!("lp_{p}");
                let values: Vec<f64> = rf.rows.iter().map(|row| row.norms[i]).collect();
                for (x, v) in h.iter().zip(&values) {
                    csv.row("h", *x, &name, *v);
                }
                put(
                    sub.join(format!("{id}_refinement_{name}.dat")),
                    dat(&h, &values),
                    &mut written,
                )?;
            }
            put(
                sub.join(format!("{id}_refinement.csv")),
                csv.body,
                &mut written,
            )?;
        }
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_results_give_summary_only() {
        let dir = tempfile::tempdir().unwrap();
        let written = emit_report(&BTreeMap::new(), dir.path()).unwrap();
        assert_eq!(written, vec![dir.path().join("summary.json")]);
        let text = std::fs::read_to_string(&written[0]).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["scenario_count"], 0);
    }

    #[test]
    fn value_formatting_round_trips() {
        for v in [0.0, 1.0 / 3.0, 1e-300, 123456.789, -2.5e17] {
            assert_eq!(fmt_value(v).parse::<f64>().unwrap(), v);
        }
    }
}
