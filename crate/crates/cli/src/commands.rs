//! The six experiments. Each returns a table, summary lines and JSON results;
//! writing them out is left to the caller.

use periodic_dividends::simulator::{simulate, McConfig, RNG_NAME};
use periodic_dividends::verification::{default_grid, dominance_scan, hjb_check};
use periodic_dividends::{r_sweep, Error, PeriodicProblem, ProblemKind, ProblemSpec, SmoothCurve};
use serde_json::{json, Value};

use crate::config::Loaded;
use crate::error::{CliError, Result};
use crate::output::Table;

/// Reference surplus for the value printed by `solve`.
pub const X_REF: f64 = 1.0;

pub struct Report {
    pub table: Table,
    pub summary: Vec<String>,
    pub results: Value,
    /// Set when a certification check failed; outputs are still written.
    pub certification_failure: Option<String>,
}

impl Report {
    fn new(table: Table, summary: Vec<String>, results: Value) -> Self {
        Self {
            table,
            summary,
            results,
            certification_failure: None,
        }
    }
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    let step = (b - a) / (n - 1) as f64;
    (0..n).map(|i| if i + 1 == n { b } else { a + step * i as f64 }).collect()
}

fn barrier_symbol(problem: &PeriodicProblem) -> &'static str {
    if problem.spec().is_bailout() {
        "b†"
    } else {
        "b*"
    }
}

fn x_max(loaded: &Loaded, barrier: f64) -> f64 {
    loaded.config.grid.x_max.unwrap_or(4.0 * barrier.max(1.0))
}

pub fn solve(loaded: &Loaded) -> Result<Report> {
    let p = &loaded.problem;
    let scale = p.scale();
    let sol = p.solve()?;
    let threshold = p.zero_barrier_threshold().unwrap_or(f64::NAN);
    let curve = p.optimal_curve(sol.level)?;
    let gaps = sol.smoothfit.gaps();
    let sym = barrier_symbol(p);
    let mut summary = vec![
        format!("Φ(q)      = {:.10}", scale.base().phi()),
        format!("Φ(q+r)    = {:.10}", scale.phi_r()),
        format!("ψ′(0+)    = {:.10}", p.psi_prime_at_zero()),
    ];
    if !p.spec().is_bailout() {
        summary.push(format!("I_(r,q)   = {threshold:.10}"));
    }
    summary.push(if sol.is_zero {
        format!("{sym} = 0 (take-the-money-and-run)")
    } else {
        format!("{sym} = {:.10} (residual {:.1e}, {} iterations)", sol.level, sol.residual, sol.iterations)
    });
    summary.push(format!("value at x = {X_REF}: {:.10}", curve.value(X_REF)));
    summary.push(format!(
        "smooth fit gaps at the barrier: value {:.1e}, first {:.1e}, second {:.1e}, third {:.1e}",
        gaps[0], gaps[1], gaps[2], gaps[3]
    ));
    let mut table = Table::new([
        "phi_q", "phi_qr", "psi_prime_0", "threshold", "barrier", "is_zero", "residual", "x_ref", "value_ref",
        "gap0", "gap1", "gap2", "gap3",
    ]);
    table.push(vec![
        scale.base().phi(),
        scale.phi_r(),
        p.psi_prime_at_zero(),
        threshold,
        sol.level,
        f64::from(u8::from(sol.is_zero)),
        sol.residual,
        X_REF,
        curve.value(X_REF),
        gaps[0],
        gaps[1],
        gaps[2],
        gaps[3],
    ]);
    let results = json!({
        "barrier": sol.level,
        "is_zero": sol.is_zero,
        "residual": sol.residual,
        "iterations": sol.iterations,
        "smooth_fit_gaps": gaps,
    });
    Ok(Report::new(table, summary, results))
}

/// Alternative barriers: the configured list, or `{0, ½, 3/2, 2}×` the optimum.
pub fn alternatives(loaded: &Loaded, barrier: f64) -> Vec<f64> {
    match &loaded.config.sweep.b_list {
        Some(list) => list.clone(),
        None if barrier > 0.0 => vec![0.0, 0.5 * barrier, 1.5 * barrier, 2.0 * barrier],
        None => vec![0.5, 1.0, 1.5, 2.0],
    }
}

pub fn curve(loaded: &Loaded) -> Result<Report> {
    let p = &loaded.problem;
    let b = p.solve()?.level;
    let optimal = p.optimal_curve(b)?;
    let alts = alternatives(loaded, b);
    let curves = alts.iter().map(|&a| p.barrier_curve(a)).collect::<periodic_dividends::Result<Vec<_>>>()?;
    let grid = linspace(0.0, x_max(loaded, b), loaded.config.grid.n_points);

    let mut columns = vec!["x".to_string(), "optimal".to_string()];
    columns.extend(alts.iter().map(|a| format!("b={a}")));
    columns.push("max_alternative".into());
    let mut table = Table::new(columns);
    for &x in &grid {
        let mut row = vec![x, optimal.value(x)];
        row.extend(curves.iter().map(|c| c.value(x)));
        row.push(curves.iter().map(|c| c.value(x)).fold(f64::NEG_INFINITY, f64::max));
        table.push(row);
    }
    let dominance = dominance_scan(p, b, &alts, &grid)?;
    let sym = barrier_symbol(p);
    let mut summary = vec![format!("{sym} = {b:.10}; {} grid points", grid.len())];
    for (a, v) in &dominance.alternatives {
        summary.push(format!("  b = {a:<12.6} max(v_b − optimal) = {v:.2e}"));
    }
    let results = json!({
        "barrier": b,
        "alternatives": alts,
        "max_violation": dominance.max_violation(),
    });
    Ok(Report::new(table, summary, results))
}

pub fn fcurve(loaded: &Loaded) -> Result<Report> {
    let p = &loaded.problem;
    let sol = p.solve()?;
    let bailout = p.spec().is_bailout();
    let grid = linspace(0.0, x_max(loaded, sol.level), loaded.config.grid.n_points);
    let mut table = if bailout {
        Table::new(["b", "f_hat", "f_hat_prime"])
    } else {
        Table::new(["b", "f", "f_prime"])
    };
    for &b in &grid {
        let row = if bailout {
            vec![b, p.f_hat(b)?, p.f_hat_prime(b)?]
        } else {
            vec![b, p.f(b)?, p.f_prime(b)?]
        };
        table.push(row);
    }
    let name = if bailout { "f̂" } else { "f" };
    let summary = vec![
        format!("{name}(0) = {:.10}", table.rows[0][1]),
        format!("{} = {:.10}", barrier_symbol(p), sol.level),
    ];
    let results = json!({ "barrier": sol.level, "at_zero": table.rows[0][1] });
    Ok(Report::new(table, summary, results))
}

pub fn hjb(loaded: &Loaded) -> Result<Report> {
    let p = &loaded.problem;
    let b = p.solve()?.level;
    let grid = default_grid(x_max(loaded, b), loaded.config.grid.n_points);
    let report = hjb_check(p, b, &grid)?;
    let mut table = Table::new([
        "x",
        "value",
        "generator_residual",
        "quadrature_error",
        "max_term",
        "hjb_value",
        "closed_form",
        "closed_form_error",
        "passes",
    ]);
    for pt in &report.points {
        table.push(vec![
            pt.x,
            pt.value,
            pt.generator_residual,
            pt.quadrature_error,
            pt.max_term,
            pt.hjb_value,
            pt.closed_form.unwrap_or(f64::NAN),
            pt.closed_form_error().unwrap_or(f64::NAN),
            f64::from(u8::from(pt.passes(b))),
        ]);
    }
    let failures = report.failures();
    let mut summary = vec![
        format!("{} = {b:.10}; {} grid points", barrier_symbol(p), grid.len()),
        format!("max |HJB| = {:.2e}", report.max_abs_hjb()),
        format!("max harmonic residual = {:.2e}", report.max_harmonic_residual()),
        format!("max closed-form error = {:.2e}", report.max_closed_form_error()),
        format!("failing points: {}", failures.len()),
    ];
    for c in &report.side_conditions {
        summary.push(format!("  [{}] {}: {}", if c.passed { "ok" } else { "FAILED" }, c.name, c.detail));
    }
    let certified = report.certified();
    summary.push(if certified { "certified".into() } else { "NOT certified".into() });
    let results = json!({
        "barrier": b,
        "certified": certified,
        "max_abs_hjb": report.max_abs_hjb(),
        "max_closed_form_error": report.max_closed_form_error(),
        "failures": failures,
        "side_conditions": report.side_conditions.iter().map(|c| json!({
            "name": c.name, "passed": c.passed, "detail": c.detail,
        })).collect::<Vec<_>>(),
    });
    let mut out = Report::new(table, summary, results);
    if !certified {
        out.certification_failure = Some(match report.certify() {
            Err(e) => e.to_string(),
            Ok(_) => unreachable!("not certified"),
        });
    }
    Ok(out)
}

pub fn run_simulation(loaded: &Loaded, cfg: &McConfig) -> Result<Report> {
    let p = &loaded.problem;
    let b = p.solve()?.level;
    let curve = p.optimal_curve(b)?;
    let bailout = p.spec().is_bailout();
    let mut columns = vec!["x", "analytic", "mc_mean", "mc_stderr", "bias_bound", "z", "within_3se"];
    if bailout {
        columns.extend(["analytic_injections", "mc_injections", "mc_injections_stderr"]);
    }
    let mut table = Table::new(columns);
    let mut summary = vec![format!(
        "{} = {b:.10}; {} paths per point, seed {}{}",
        barrier_symbol(p),
        cfg.paths,
        cfg.seed,
        if cfg.antithetic { ", antithetic" } else { "" }
    )];
    for &x in &loaded.config.mc.x_list {
        let est = simulate(&loaded.model, p.spec(), b, x, cfg)?;
        let exact = curve.value(x);
        let z = (est.mean - exact) / est.stderr;
        let within = (est.mean - exact).abs() <= 3.0 * est.stderr + est.bias_bound();
        let mut row = vec![x, exact, est.mean, est.stderr, est.bias_bound(), z, f64::from(u8::from(within))];
        if let Some(inj) = est.injections {
            row.extend([p.expected_injections(b, x), inj.mean, inj.stderr]);
        }
        summary.push(format!(
            "  x = {x:<6} analytic {exact:.6}  MC {:.6} ± {:.6}  z = {z:+.2}",
            est.mean, est.stderr
        ));
        table.push(row);
    }
    let results = json!({ "barrier": b, "paths": cfg.paths, "seed": cfg.seed, "rng": RNG_NAME });
    Ok(Report::new(table, summary, results))
}

pub fn simulate_cmd(loaded: &Loaded) -> Result<Report> {
    run_simulation(loaded, &loaded.mc)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepOver {
    R,
    Rho,
}

pub fn sweep(loaded: &Loaded, over: SweepOver) -> Result<Report> {
    match over {
        SweepOver::R => sweep_r(loaded),
        SweepOver::Rho => sweep_rho(loaded),
    }
}

fn sweep_r(loaded: &Loaded) -> Result<Report> {
    let p = &loaded.problem;
    let r_list = &loaded.config.sweep.r_list;
    let (classical, rows) = match r_sweep(p, r_list) {
        Ok(out) => out,
        Err(Error::ClassicalUndefined { .. }) => {
            let rows = r_list
                .iter()
                .map(|&r| {
                    let level = p.with_spec(ProblemSpec { r, ..*p.spec() })?.solve()?.level;
                    Ok((r, level, f64::NAN))
                })
                .collect::<periodic_dividends::Result<Vec<_>>>()?;
            return sweep_table(loaded, f64::NAN, rows);
        }
        Err(e) => return Err(e.into()),
    };
    let rows = rows.iter().map(|row| (row.r, row.solution.level, row.gap_to_classical)).collect();
    sweep_table(loaded, classical, rows)
}

fn sweep_table(loaded: &Loaded, classical: f64, rows: Vec<(f64, f64, f64)>) -> Result<Report> {
    let p = &loaded.problem;
    let top = rows.iter().map(|r| r.1).fold(classical.max(0.0), f64::max);
    let grid = linspace(0.0, x_max(loaded, top), loaded.config.grid.n_points);
    let classical_curve = if classical.is_nan() { None } else { Some(p.classical_limit()?.1) };
    let mut table = Table::new(["r", "barrier", "classical_barrier", "gap", "x", "value", "classical_value"]);
    let sym = barrier_symbol(p);
    let mut summary = vec![format!("classical barrier = {classical:.10}")];
    for &(r, level, gap) in &rows {
        let problem = p.with_spec(ProblemSpec { r, ..*p.spec() })?;
        let curve = problem.optimal_curve(level)?;
        summary.push(format!("  r = {r:<6} {sym} = {level:.10}  gap = {gap:.6}"));
        for &x in &grid {
            let cv = classical_curve.as_ref().map_or(f64::NAN, |c| c.value(x));
            table.push(vec![r, level, classical, gap, x, curve.value(x), cv]);
        }
    }
    let results = json!({
        "classical_barrier": classical,
        "r": rows.iter().map(|r| r.0).collect::<Vec<_>>(),
        "barrier": rows.iter().map(|r| r.1).collect::<Vec<_>>(),
    });
    Ok(Report::new(table, summary, results))
}

fn sweep_rho(loaded: &Loaded) -> Result<Report> {
    let p = &loaded.problem;
    let ProblemKind::Dividends { .. } = p.spec().kind else {
        return Err(CliError::Config {
            path: loaded.path.clone(),
            message: "a ρ sweep needs kind = \"dividends\"".into(),
        });
    };
    let rhos = &loaded.config.sweep.rho_list;
    let solved = rhos
        .iter()
        .map(|&rho| {
            let problem = p.with_spec(ProblemSpec::dividends(p.spec().q, p.spec().r, rho)?)?;
            let level = problem.solve_b_star()?.level;
            Ok((problem, level))
        })
        .collect::<periodic_dividends::Result<Vec<_>>>()?;
    let top = solved.iter().map(|s| s.1).fold(0.0, f64::max);
    let grid = linspace(0.0, x_max(loaded, top), loaded.config.grid.n_points);
    let mut table = Table::new(["rho", "barrier", "nonmonotone", "x", "value"]);
    let mut summary = Vec::new();
    let mut flags = Vec::new();
    for (&rho, (problem, level)) in rhos.iter().zip(&solved) {
        let curve = problem.optimal_curve(*level)?;
        let nonmonotone = grid.iter().any(|&x| curve.derivative(x) < 0.0);
        flags.push(nonmonotone);
        summary.push(format!(
            "  ρ = {rho:<6} b* = {level:.10}{}",
            if nonmonotone { "  value not monotone" } else { "" }
        ));
        for &x in &grid {
            table.push(vec![rho, *level, f64::from(u8::from(nonmonotone)), x, curve.value(x)]);
        }
    }
    let results = json!({
        "rho": rhos,
        "barrier": solved.iter().map(|s| s.1).collect::<Vec<_>>(),
        "nonmonotone": flags,
    });
    Ok(Report::new(table, summary, results))
}
