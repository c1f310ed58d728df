use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use kstrunc::harness::{
    emit_report, run_experiment, ExperimentConfig, HarnessError, Mode, ScenarioResult, Verdict,
};
use kstrunc::regime::{classify, stampacchia_zero};
use kstrunc::Exponent;

#[derive(Parser)]
#[command(
    name = "kstrunc",
    version,
    about = "Truncated Keller-Segel solver and regularity diagnostics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exponents and regime for data in L^m.
    Exponents {
        #[arg(long = "N")]
        n: i64,
        #[arg(long)]
        m: Exponent,
    },
    /// Single run of every scenario.
    Solve(RunArgs),
    /// Truncation and refinement sweeps.
    Sweep(RunArgs),
    /// Positivity, mass, entropy, GN ratio and psi uniformity checks.
    Verify(RunArgs),
    /// Zero of a function satisfying the level-set decay hypothesis.
    Stampacchia {
        #[arg(long = "M")]
        m: f64,
        #[arg(long)]
        delta: f64,
        #[arg(long)]
        gamma: f64,
        #[arg(long)]
        psi0: f64,
    },
}

#[derive(clap::Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Report directory.
    #[arg(long, default_value = "report")]
    out: PathBuf,
}

fn run(args: &RunArgs, mode: Mode) -> Result<bool, HarnessError> {
    let cfg = ExperimentConfig::load(&args.config)?;
    let results = run_experiment(&cfg, mode)?;
    let written = emit_report(&results, &args.out)?;
    for r in results.values() {
        print_result(r);
    }
    println!("wrote {} files to {}", written.len(), args.out.display());
    Ok(results.values().all(result_passes))
}

fn result_passes(r: &ScenarioResult) -> bool {
    let verify = r.verify.as_ref().is_none_or(|v| v.pass);
    let trunc = r.truncation.as_ref().is_none_or(|t| t.uniform);
    let refine = r
        .refinement
        .as_ref()
        .is_none_or(|f| f.verdict == Verdict::Consistent);
    let positive = r
        .solve
        .as_ref()
        .is_none_or(|s| s.min_u >= 0.0 && s.min_psi >= 0.0);
    verify && trunc && refine && positive
}

fn print_result(r: &ScenarioResult) {
    if let Some(s) = &r.solve {
        println!(
            "{}: {} steps, dt={}, final mass {:.6e}, max psi {:.6e}",
            r.id,
            s.times.len() - 1,
            s.dt,
            s.mass_l1.last().copied().unwrap_or(0.0),
            s.psi_linf.iter().copied().fold(0.0, f64::max)
        );
    }
    if let Some(t) = &r.truncation {
        for row in &t.rows {
            println!(
                "{}: n={} psi_inf={:.6e} grad_psi={:.6e} u={:.6e} change={:.3e}",
                r.id, row.n, row.psi_linf, row.grad_psi_linf_l2, row.u_mdstar, row.rel_change
            );
        }
        println!("{}: uniform={}", r.id, t.uniform);
    }
    if let Some(f) = &r.refinement {
        println!(
            "{}: empirical exponent {:?}, target {}, verdict {:?}",
            r.id, f.empirical_exponent, f.target, f.verdict
        );
    }
    if let Some(v) = &r.verify {
        for c in &v.checks {
            println!(
                "{}: {:<16} {} value={:e} bound={:e}",
                r.id,
                c.name,
                if c.pass { "PASS" } else { "FAIL" },
                c.value,
                c.bound
            );
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome: Result<bool, (i32, String)> = match &cli.command {
        Command::Exponents { n, m } => classify(m.0, *n)
            .map(|report| {
                print!("{}", report.table());
                println!("{}", serde_json::to_string(&report).expect("serializable"));
                true
            })
            .map_err(|e| (2, e.to_string())),
        Command::Stampacchia {
            m,
            delta,
            gamma,
            psi0,
        } => stampacchia_zero(*m, *delta, *gamma, *psi0)
            .map(|d| {
                println!("d = {d}");
                true
            })
            .map_err(|e| (2, e.to_string())),
        Command::Solve(a) => run(a, Mode::Solve).map_err(|e| (e.exit_code(), e.to_string())),
        Command::Sweep(a) => run(a, Mode::Sweep).map_err(|e| (e.exit_code(), e.to_string())),
        Command::Verify(a) => run(a, Mode::Verify).map_err(|e| (e.exit_code(), e.to_string())),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("invariant violation");
            ExitCode::from(1)
        }
        Err((code, message)) => {
            eprintln!("error: {message}");
            ExitCode::from(code as u8)
        }
    }
}
