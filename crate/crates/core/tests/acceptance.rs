//! Acceptance checks, one PASS/FAIL line each. Exits nonzero on any failure.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::*;
use periodic_dividends::quadrature::Integrator;
use periodic_dividends::simulator::{simulate, McConfig};
use periodic_dividends::verification::{
    default_grid, dominance_scan, hjb_check, max_term, max_term_brute_force, CLOSED_FORM_TOL, HJB_TOL,
    SIDE_TOL,
};
use periodic_dividends::{r_sweep, PeriodicProblem, ScaleFunctionRep, SmoothCurve};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn laplace_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for m in [exp_bv(), exp_diffusive(), case1()] {
        let w = ScaleFunctionRep::new(&m, Q).unwrap();
        let phi = w.phi();
        for _ in 0..5 {
            let theta = phi + rng.random_range(0.2..5.0) * phi.max(1.0);
            let decay = theta - phi;
            let upper = 45.0 / decay;
            let breaks: Vec<f64> = (0..=30).map(|k| upper * k as f64 / 30.0).collect();
            let numeric = Integrator::new(0.0, 1e-12)
                .integrate_with_breaks(|x| (-theta * x).exp() * w.w(x), &breaks)
                .unwrap()
                .value;
            let closed = w.laplace_transform(theta);
            worst = worst.max((numeric - closed).abs() / closed.abs());
        }
    }
    outcome(worst <= 1e-8, format!("max relative error {worst:.2e} (tol 1e-8), 3 models x 5 θ"))
}

fn boundary_behaviour() -> Outcome {
    let bv = exp_bv();
    let w_bv = ScaleFunctionRep::new(&bv, Q).unwrap();
    let e1 = (w_bv.w(0.0) - 1.0 / bv.c()).abs();
    let diff = case1();
    let w_d = ScaleFunctionRep::new(&diff, Q).unwrap();
    let e2 = w_d.w(0.0).abs();
    let e3 = (w_d.w_prime(0.0) - 2.0 / diff.sigma().powi(2)).abs() / (2.0 / diff.sigma().powi(2));
    let worst = e1.max(e2).max(e3);
    outcome(
        worst <= 1e-9,
        format!("|W(0)−1/c| = {e1:.1e}, |W(0)| = {e2:.1e}, W′(0+) vs 2/σ² rel {e3:.1e} (tol 1e-9)"),
    )
}

fn smooth_fit() -> Outcome {
    let p = dividends(&case1(), R, 0.0);
    let sol = p.solve_b_star().unwrap();
    let gaps = sol.smoothfit.gaps();
    let bv = dividends(&case1_bv(), R, 0.0).solve_b_star().unwrap();
    let bv_gaps = bv.smoothfit.gaps();
    let passed = !sol.is_zero && gaps[2] < 1e-7 && gaps[3] < 1e-7 && !bv.is_zero && bv_gaps[2] < 1e-7;
    outcome(
        passed,
        format!(
            "b* = {:.7}: v″ gap {:.1e}, v‴ gap {:.1e}; σ=0 b* = {:.7}: v″ gap {:.1e} (tol 1e-7)",
            sol.level, gaps[2], gaps[3], bv.level, bv_gaps[2]
        ),
    )
}

fn case_dichotomy() -> Outcome {
    let p2 = dividends(&case2(), R, 0.0);
    let s2 = p2.solve_b_star().unwrap();
    let zero_rule = p2.psi_prime_at_zero() >= p2.zero_barrier_threshold().unwrap();
    let p1 = dividends(&case1(), R, 0.0);
    let s1 = p1.solve_b_star().unwrap();
    let f1 = p1.f(s1.level).unwrap().abs();
    outcome(
        s2.is_zero && s2.level == 0.0 && zero_rule && !s1.is_zero && s1.level > 0.0 && f1 <= 1e-10,
        format!(
            "case 2: b* = {}, ψ′(0+) = {:.4} ≥ I = {:.4}; case 1: b* = {:.7}, |f(b*)| = {f1:.1e} (tol 1e-10)",
            s2.level,
            p2.psi_prime_at_zero(),
            p2.zero_barrier_threshold().unwrap(),
            s1.level
        ),
    )
}

fn hjb(p: &PeriodicProblem) -> (f64, periodic_dividends::verification::HjbReport) {
    let b = p.solve().unwrap().level;
    let grid = default_grid(4.0 * b.max(1.0), 200);
    (b, hjb_check(p, b, &grid).unwrap())
}

fn hjb_dividends() -> Outcome {
    let (b, report) = hjb(&dividends(&case1(), R, 0.0));
    let (hjb_max, cf) = (report.max_abs_hjb(), report.max_closed_form_error());
    outcome(
        report.certified() && hjb_max <= HJB_TOL && cf <= CLOSED_FORM_TOL,
        format!(
            "b* = {b:.7}, 200 points: max |HJB| {hjb_max:.1e} (tol 1e-5), closed form rel {cf:.1e} (tol 1e-6), {} failures",
            report.failures().len()
        ),
    )
}

fn hjb_bailout() -> Outcome {
    let p = bailout(&case1(), R, BETA);
    let (b, report) = hjb(&p);
    let (hjb_max, cf) = (report.max_abs_hjb(), report.max_closed_form_error());
    let slope0 = p.u_dagger(b).unwrap().derivative(0.0);
    let sides: Vec<&str> = report
        .side_conditions
        .iter()
        .map(|c| if c.passed { c.name } else { "FAILED" })
        .collect();
    outcome(
        report.certified() && hjb_max <= HJB_TOL && cf <= CLOSED_FORM_TOL && (slope0 - BETA).abs() <= SIDE_TOL,
        format!(
            "b† = {b:.7}: max |HJB| {hjb_max:.1e}, closed form rel {cf:.1e}, |u′(0)−β| {:.1e}; {}",
            (slope0 - BETA).abs(),
            sides.join(", ")
        ),
    )
}

fn monte_carlo() -> Outcome {
    let m = case1();
    let cfg = McConfig {
        paths: 100_000,
        seed: 42,
        ..McConfig::default()
    };
    let mut passed = true;
    let mut parts = Vec::new();
    for p in [dividends(&m, R, 0.0), bailout(&m, R, BETA)] {
        let b = p.solve().unwrap().level;
        let curve = p.optimal_curve(b).unwrap();
        let mut worst: f64 = 0.0;
        for x in [0.5, 1.0, 2.0, 4.0] {
            let est = simulate(&m, p.spec(), b, x, &cfg).unwrap();
            let exact = curve.value(x);
            let tol = 3.0 * est.stderr + est.bias_bound();
            passed &= (est.mean - exact).abs() <= tol;
            worst = worst.max((est.mean - exact).abs() / est.stderr);
        }
        let name = if p.spec().is_bailout() { "bail-out" } else { "dividends" };
        parts.push(format!("{name} max |z| {worst:.2}"));
    }
    outcome(passed, format!("{} at 1e5 paths (tol 3·stderr + bias bound)", parts.join(", ")))
}

fn dominance() -> Outcome {
    let mut passed = true;
    let mut parts = Vec::new();
    for p in [dividends(&case1(), R, 0.0), bailout(&case1(), R, BETA)] {
        let b = p.solve().unwrap().level;
        let alts = [0.0, 0.5 * b, 1.5 * b, 2.0 * b];
        let grid = linspace(0.0, 4.0 * b, 400);
        let report = dominance_scan(&p, b, &alts, &grid).unwrap();
        passed &= report.holds(1e-9);
        parts.push(format!("max violation {:.1e}", report.max_violation()));
    }
    outcome(passed, format!("dividends {}, bail-out {} (tol 1e-9)", parts[0], parts[1]))
}

fn classical_limit() -> Outcome {
    let mut passed = true;
    let mut parts = Vec::new();
    for p in [dividends(&case1(), R, 0.0), bailout(&case1(), R, BETA)] {
        let (classical, rows) = r_sweep(&p, &R_LIST).unwrap();
        let gaps: Vec<f64> = rows.iter().map(|r| r.gap_to_classical).collect();
        let monotone = gaps.windows(2).all(|w| w[1] <= w[0]);
        let at = |r: f64| rows.iter().find(|row| row.r == r).unwrap().gap_to_classical;
        passed &= monotone && at(5.0) < at(0.5);
        parts.push(format!("b̃ = {classical:.5}, gap {:.3} → {:.3}", gaps[0], gaps[gaps.len() - 1]));
    }
    let base = dividends(&case1(), R, 0.0);
    let (b_classical, classical) = base.classical_limit().unwrap();
    let grid = linspace(0.0, 3.0 * b_classical, 200);
    let mut excess = f64::NEG_INFINITY;
    for r in R_LIST {
        let p = dividends(&case1(), r, 0.0);
        let curve = p.optimal_curve(p.solve().unwrap().level).unwrap();
        for &x in &grid {
            excess = excess.max(curve.value(x) - classical.value(x));
        }
    }
    passed &= excess <= 1e-12;
    outcome(
        passed,
        format!("dividends {}; bail-out {}; max v* − ṽ {excess:.2e}", parts[0], parts[1]),
    )
}

fn rho_sweep() -> Outcome {
    let m = case1();
    let rhos: Vec<f64> = (-20..=20).map(f64::from).collect();
    let levels: Vec<f64> = rhos
        .iter()
        .map(|&rho| dividends(&m, R, rho).solve_b_star().unwrap().level)
        .collect();
    let nonincreasing = levels.windows(2).all(|w| w[1] <= w[0]);
    let grid = linspace(0.0, 5.0, 400);
    let decreasing_somewhere = |rho: f64| {
        let p = dividends(&m, R, rho);
        let curve = p.optimal_curve(p.solve_b_star().unwrap().level).unwrap();
        grid.iter().any(|&x| curve.derivative(x) < 0.0)
    };
    let nonmonotone: Vec<f64> = rhos.iter().copied().filter(|&rho| decreasing_somewhere(rho)).collect();
    let largest = nonmonotone.contains(&19.0) && nonmonotone.contains(&20.0);
    outcome(
        nonincreasing && largest && !nonmonotone.contains(&0.0),
        format!(
            "b*(−20) = {:.4} … b*(20) = {:.4}, nonincreasing: {nonincreasing}; v* not monotone for ρ ∈ {:?}",
            levels[0],
            levels[levels.len() - 1],
            nonmonotone
        ),
    )
}

fn max_term_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut passed = true;
    let mut worst: f64 = 0.0;
    for p in [dividends(&case1(), R, 0.0), bailout(&case1(), R, BETA)] {
        let b = p.solve().unwrap().level;
        let curve = p.optimal_curve(b).unwrap();
        for _ in 0..50 {
            let x = rng.random_range(0.0..4.0 * b);
            let exact = max_term(&curve, R, x);
            let (brute, bound) = max_term_brute_force(&curve, R, x, 2000);
            passed &= brute <= exact + 1e-12 && exact - brute <= bound + 1e-12;
            worst = worst.max((exact - brute) / (bound + 1e-300));
        }
    }
    outcome(passed, format!("50 random x per problem, max gap/bound {worst:.3}"))
}

type Criterion = (&'static str, Option<Duration>, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("scale-function Laplace identity", Some(Duration::from_secs(5)), laplace_identity),
        ("boundary behaviour at zero", None, boundary_behaviour),
        ("smooth fit at b*", Some(Duration::from_secs(1)), smooth_fit),
        ("case dichotomy", None, case_dichotomy),
        ("HJB certification, dividends", Some(Duration::from_secs(30)), hjb_dividends),
        ("HJB certification, bail-out", None, hjb_bailout),
        ("Monte Carlo agreement", Some(Duration::from_secs(120)), monte_carlo),
        ("dominance over alternative barriers", None, dominance),
        ("classical limit in r", None, classical_limit),
        ("terminal payoff sweep", None, rho_sweep),
        ("max-term brute force", None, max_term_equivalence),
    ];
    let mut failures = 0;
    for (i, (name, limit, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let mut result = check();
        let elapsed = start.elapsed();
        if let Some(limit) = limit {
            if elapsed > *limit {
                result.passed = false;
                result.detail.push_str(&format!("; over the {:.0?} limit", limit));
            }
        }
        if !result.passed {
            failures += 1;
        }
        println!(
            "{} [{:>2}] {name}: {} ({:.2?})",
            if result.passed { "PASS" } else { "FAIL" },
            i + 1,
            result.detail,
            elapsed
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
