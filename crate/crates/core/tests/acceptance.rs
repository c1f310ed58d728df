//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on failure.

use num_rational::Rational64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use kstrunc::coefficients::{CoefficientField, Family};
use kstrunc::elliptic::{assemble_elliptic, solve_with, EllipticProblem};
use kstrunc::grid::{ScalarField, SpaceGrid};
use kstrunc::norms::{entropy_terms, gn_ratio, psi_bounds};
use kstrunc::regime::{
    classify, conjugate, dstar, fit_constant, gamma, stampacchia_verify, star, Regime,
};
use kstrunc::source::SourceSpec;
use kstrunc::stepper::{run, ProblemConfig, Trajectory};
use kstrunc::truncation::TruncationLevel;

const SOLVER_TOL: f64 = 1e-10;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn q(a: i64, b: i64) -> Rational64 {
    Rational64::new(a, b)
}

fn base_problem(cells: usize, source: SourceSpec, n_trunc: f64) -> ProblemConfig {
    let grid = SpaceGrid::new(3, cells).unwrap();
    ProblemConfig::new(grid, 0.5, 0.05, 1e-3, source)
        .unwrap()
        .with_truncation(n_trunc)
        .unwrap()
}

fn f_one(cells: usize) -> Trajectory {
    run(&base_problem(cells, SourceSpec::constant(1.0), 64.0)).unwrap()
}

fn exponents() -> Outcome {
    type Row = (
        i64,
        Rational64,
        Option<Rational64>,
        Option<Rational64>,
        Option<Rational64>,
        Regime,
    );
    let table: [Row; 8] = [
        (
            3,
            q(1, 1),
            Some(q(5, 4)),
            Some(q(5, 3)),
            None,
            Regime::Entropy,
        ),
        (
            3,
            q(6, 5),
            Some(q(30, 19)),
            Some(q(30, 13)),
            Some(q(9, 13)),
            Regime::Distributional,
        ),
        (
            3,
            q(10, 9),
            Some(q(10, 7)),
            Some(q(2, 1)),
            Some(q(3, 5)),
            Regime::Distributional,
        ),
        (
            3,
            q(10, 7),
            Some(q(2, 1)),
            Some(q(10, 3)),
            Some(q(1, 1)),
            Regime::FiniteEnergy,
        ),
        (
            3,
            q(2, 1),
            Some(q(10, 3)),
            Some(q(10, 1)),
            Some(q(3, 1)),
            Regime::FiniteEnergy,
        ),
        (3, q(3, 1), Some(q(15, 2)), None, None, Regime::Bounded),
        (
            4,
            q(1, 1),
            Some(q(6, 5)),
            Some(q(3, 2)),
            None,
            Regime::Entropy,
        ),
        (
            4,
            q(2, 1),
            Some(q(3, 1)),
            Some(q(6, 1)),
            Some(q(2, 1)),
            Regime::FiniteEnergy,
        ),
    ];
    let mut bad = Vec::new();
    for (n, m, s, d, g, regime) in table {
        let rep = classify(m, n).unwrap();
        let ok = star(m, n).ok() == s
            && dstar(m, n).ok() == d
            && gamma(m, n).ok() == g
            && rep.regime == regime
            && rep.m_star == s
            && rep.m_dstar == d
            && rep.gamma == g;
        if !ok {
            bad.push(format!("(N={n}, m={m})"));
        }
    }
    outcome(bad.is_empty(), format!("8 cases, mismatches: {bad:?}"))
}

fn mass_and_positivity() -> (Outcome, Outcome) {
    let traj = f_one(12);
    let measure = traj.grid().interior_measure();
    let mut worst = f64::NEG_INFINITY;
    for (u, &t) in traj.u().iter().zip(traj.times()) {
        // f = 1 on the unit cube supplies mass t; the nodal sum covers the
        // interior measure, which is the tighter bound
        let supplied = t * measure;
        worst = worst.max(u.lp_norm(1.0).unwrap() - supplied);
    }
    let mass = outcome(
        worst <= 1e-10,
        format!("max excess over supplied mass {worst:e}"),
    );

    let singular = run(&base_problem(12, SourceSpec::singular(q(2, 1), 0.1), 64.0)).unwrap();
    let mins = [
        traj.min_u(),
        traj.min_psi(),
        singular.min_u(),
        singular.min_psi(),
    ];
    let pos = outcome(
        mins.iter().all(|&v| v >= 0.0),
        format!(
            "min u, psi (f=1): {:e}, {:e}; (m=2): {:e}, {:e}",
            mins[0], mins[1], mins[2], mins[3]
        ),
    );
    (mass, pos)
}

fn elliptic_convergence() -> Outcome {
    let exact = |x: &[f64]| (PI * x[0]).sin() * (PI * x[1]).sin();
    let mut errors = Vec::new();
    for n in [8, 16, 32] {
        let grid = SpaceGrid::new(2, n).unwrap();
        let rhs = grid.sample(|x| 2.0 * PI * PI * exact(x)).unwrap();
        let (psi, _) = EllipticProblem::new(CoefficientField::identity(2), rhs)
            .unwrap()
            .with_tolerance(1e-12)
            .unwrap()
            .solve()
            .unwrap();
        let reference = grid.sample(exact).unwrap();
        let err = psi
            .values()
            .iter()
            .zip(reference.values())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        errors.push(err);
    }
    let orders: Vec<f64> = errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    let min_order = orders.iter().copied().fold(f64::INFINITY, f64::min);
    outcome(
        min_order >= 1.8,
        format!("max-norm errors {errors:.3?}, orders {orders:.3?}"),
    )
}

fn psi_uniformity() -> Outcome {
    let mut bounds = Vec::new();
    for n in [8.0, 32.0, 128.0] {
        let traj = run(&base_problem(12, SourceSpec::singular(q(2, 1), 0.1), n)).unwrap();
        bounds.push(psi_bounds(&traj));
    }
    let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs());
    let c_inf = rel(bounds[1].0, bounds[2].0);
    let c_grad = rel(bounds[1].1, bounds[2].1);
    outcome(
        c_inf < 0.05 && c_grad < 0.05,
        format!(
            "psi_inf {:.6e}/{:.6e}/{:.6e}, change 32->128 {:.2}% (inf), {:.2}% (grad)",
            bounds[0].0,
            bounds[1].0,
            bounds[2].0,
            100.0 * c_inf,
            100.0 * c_grad
        ),
    )
}

fn stampacchia() -> Outcome {
    let cube = |h: f64| (1.0 - h).max(0.0).powi(3);
    let sharp = stampacchia_verify(&cube, 1.0 / 64.0, 2.0, 3.0, 2.0, 401).unwrap();
    let m_fit = fit_constant(&cube, 3.0, 3.0, 2.0, 201);
    let fitted = stampacchia_verify(&cube, m_fit, 3.0, 3.0, 2.0, 201).unwrap();
    let zero = stampacchia_verify(&|_| 0.0, 1.0, 2.0, 1.0, 5.0, 101).unwrap();
    let counter = stampacchia_verify(&|h| 1.0 / (1.0 + h), 1.0, 2.0, 1.0, 10.0, 101).unwrap();
    let passing = [sharp, fitted, zero];
    let ok = passing
        .iter()
        .all(|r| r.hypothesis_holds && r.psi_at_d <= 1e-12)
        && fitted.d >= 1.0
        && !counter.hypothesis_holds;
    outcome(
        ok,
        format!(
            "d = {:.6}, {:.4}, {}; psi(d) = {:e}, {:e}, {:e}; counterexample holds = {}",
            sharp.d,
            fitted.d,
            zero.d,
            sharp.psi_at_d,
            fitted.psi_at_d,
            zero.psi_at_d,
            counter.hypothesis_holds
        ),
    )
}

fn gagliardo_nirenberg() -> Outcome {
    let ratios: Vec<f64> = [8, 12, 16]
        .iter()
        .map(|&n| gn_ratio(&f_one(n)).unwrap())
        .collect();
    let bounded = ratios.iter().all(|r| r.is_finite() && *r > 0.0)
        && ratios
            .windows(2)
            .all(|w| w[0].max(w[1]) / w[0].min(w[1]) < 2.0);
    let traj = f_one(8);
    let doubled = Trajectory::from_fields(
        traj.times().to_vec(),
        traj.u()
            .iter()
            .map(|u| u.map(|v| 2.0 * v).unwrap())
            .collect(),
        traj.psi().to_vec(),
    )
    .unwrap();
    let (a, b) = (gn_ratio(&traj).unwrap(), gn_ratio(&doubled).unwrap());
    let scale_err = (a - b).abs() / a;
    outcome(
        bounded && scale_err <= 1e-12,
        format!("ratios {ratios:.5?}, scaling error {scale_err:e}"),
    )
}

fn entropy() -> Outcome {
    let traj = run(&base_problem(12, SourceSpec::singular(q(1, 1), 0.1), 64.0)).unwrap();
    let max = traj.max_u();
    let last = traj.len() - 1;
    let mut worst = f64::NEG_INFINITY;
    let mut k0_exact = true;
    for k in [0.0, 0.5 * max, 2.0 * max] {
        for t in [1, last / 2, last] {
            let terms = entropy_terms(&traj, k, t).unwrap();
            let r = terms.residual();
            if k == 0.0 {
                k0_exact &= r == 0.0;
            } else {
                worst = worst.max(r / terms.scale());
            }
        }
    }
    outcome(
        k0_exact && worst <= 1e-6,
        format!("max residual/scale {worst:e}, k=0 exact: {k0_exact}"),
    )
}

fn truncation_consistency() -> Outcome {
    let a = run(&base_problem(12, SourceSpec::constant(1.0), 64.0)).unwrap();
    let b = run(&base_problem(12, SourceSpec::constant(1.0), 128.0)).unwrap();
    let mut diff: f64 = 0.0;
    let mut scale: f64 = 1.0;
    for (fa, fb) in a.u().iter().zip(b.u()).chain(a.psi().iter().zip(b.psi())) {
        for (x, y) in fa.values().iter().zip(fb.values()) {
            diff = diff.max((x - y).abs());
            scale = scale.max(x.abs());
        }
    }
    outcome(
        diff <= 10.0 * SOLVER_TOL * scale,
        format!("max |difference| {diff:e}"),
    )
}

fn invariant_suites() -> Outcome {
    const CASES: usize = 1000;
    let mut rng = ChaCha8Rng::seed_from_u64(20261014);
    let mut failures = Vec::new();

    // summation by parts: <grad v, F> = -<v, div F>
    let mut sbp = 0;
    for _ in 0..CASES {
        let grid = SpaceGrid::new(rng.random_range(2..=3), rng.random_range(4..=9)).unwrap();
        let v = ScalarField::new(
            grid,
            (0..grid.num_nodes())
                .map(|_| rng.random_range(-1.0..1.0))
                .collect(),
        )
        .unwrap();
        let w = ScalarField::new(
            grid,
            (0..grid.num_nodes())
                .map(|_| rng.random_range(-1.0..1.0))
                .collect(),
        )
        .unwrap();
        let flux = w.gradient();
        let lhs = v.gradient().inner(&flux).unwrap();
        let rhs = -v.inner(&flux.divergence()).unwrap();
        if (lhs - rhs).abs() > 1e-10 * lhs.abs().max(1.0) {
            sbp += 1;
        }
    }
    if sbp > 0 {
        failures.push(format!("sbp {sbp}"));
    }

    // T_k + G_k = s and Theta_k' = T_k
    let mut trunc = 0;
    for _ in 0..CASES {
        let s: f64 = rng.random_range(-100.0..100.0);
        let k = TruncationLevel::new(rng.random_range(0.01..50.0)).unwrap();
        let eps = 1e-6;
        let fd = (k.theta(s + eps) - k.theta(s - eps)) / (2.0 * eps);
        let sum_ok = (k.t(s) + k.g(s) - s).abs() <= 4.0 * f64::EPSILON * s.abs();
        let deriv_ok = (fd - k.t(s)).abs() <= 1e-6 * s.abs().max(1.0);
        if !(sum_ok && deriv_ok) {
            trunc += 1;
        }
    }
    if trunc > 0 {
        failures.push(format!("truncation {trunc}"));
    }

    // M-matrix monotonicity: 0 <= g1 <= g2 gives 0 <= psi1 <= psi2
    let mut mono = 0;
    for _ in 0..CASES {
        let grid = SpaceGrid::new(2, rng.random_range(4..=8)).unwrap();
        let lo = rng.random_range(0.1..1.0);
        let hi = lo + rng.random_range(0.0..10.0);
        let m = CoefficientField::new(
            2,
            Family::CheckerboardDiagonal {
                values: [lo, hi],
                period: rng.random_range(1..=4),
            },
        )
        .unwrap();
        let op = assemble_elliptic(&grid, &m).unwrap();
        let g1: Vec<f64> = (0..grid.num_nodes())
            .map(|_| rng.random_range(0.0..1.0))
            .collect();
        let g2: Vec<f64> = g1.iter().map(|&g| g + rng.random_range(0.0..1.0)).collect();
        let solve = |g: Vec<f64>| {
            solve_with(
                &op,
                &ScalarField::new(grid, g).unwrap(),
                None,
                1e-13,
                10_000,
            )
            .unwrap()
            .0
        };
        let (p1, p2) = (solve(g1), solve(g2));
        let scale = p2.max().max(1e-300);
        let ok = op.is_m_matrix()
            && p1.min() >= -1e-12 * scale
            && p1
                .values()
                .iter()
                .zip(p2.values())
                .all(|(a, b)| *a <= b + 1e-12 * scale);
        if !ok {
            mono += 1;
        }
    }
    if mono > 0 {
        failures.push(format!("monotonicity {mono}"));
    }

    // dstar = star o star and (2 gamma - 1) m' = m**
    let mut rational = 0;
    let mut checked = 0;
    while checked < CASES {
        let n: i64 = rng.random_range(2..=8);
        let den: i64 = rng.random_range(1..=60);
        let num: i64 = rng.random_range(den..=4 * den);
        let p = q(num, den);
        let composed = match (star(p, n), dstar(p, n)) {
            (Ok(s), Ok(d)) => star(s, n).map(|ss| ss == d).unwrap_or(false),
            _ => continue,
        };
        let conj = match (gamma(p, n), conjugate(p), dstar(p, n)) {
            (Ok(g), Some(mp), Ok(d)) => (q(2, 1) * g - q(1, 1)) * mp == d,
            _ => true,
        };
        checked += 1;
        if !(composed && conj) {
            rational += 1;
        }
    }
    if rational > 0 {
        failures.push(format!("rational {rational}"));
    }

    outcome(
        failures.is_empty(),
        format!("{CASES} cases per suite, failures: {failures:?}"),
    )
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let start = Instant::now();
    let value = f();
    (value, start.elapsed())
}

fn main() -> ExitCode {
    let mut results: Vec<(usize, &str, Outcome, Duration, Duration)> = Vec::new();
    let secs = Duration::from_secs;

    let (o, t) = timed(exponents);
    results.push((1, "exponent calculus", o, t, secs(1)));
    let ((mass, pos), t) = timed(mass_and_positivity);
    results.push((2, "mass bound", mass, t, secs(60)));
    results.push((3, "positivity", pos, t, secs(60)));
    let (o, t) = timed(elliptic_convergence);
    results.push((4, "elliptic convergence", o, t, secs(10)));
    let (o, t) = timed(psi_uniformity);
    results.push((5, "psi uniformity in n", o, t, secs(300)));
    let (o, t) = timed(stampacchia);
    results.push((6, "level-set decay zero", o, t, secs(1)));
    let (o, t) = timed(gagliardo_nirenberg);
    results.push((7, "Gagliardo-Nirenberg ratio", o, t, secs(120)));
    let (o, t) = timed(entropy);
    results.push((8, "entropy residual", o, t, secs(120)));
    let (o, t) = timed(truncation_consistency);
    results.push((9, "truncation consistency", o, t, secs(60)));
    let (o, t) = timed(invariant_suites);
    results.push((10, "randomized invariant suites", o, t, secs(30)));

    let mut all = true;
    for (id, name, o, elapsed, limit) in &results {
        let pass = o.pass && elapsed <= limit;
        all &= pass;
        println!(
            "criterion {id:>2} {} {name}: {} [{:.3}s, limit {}s]",
            if pass { "PASS" } else { "FAIL" },
            o.detail,
            elapsed.as_secs_f64(),
            limit.as_secs()
        );
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
