//! Numerical certification of the optimal value functions.
//!
//! The generator of `X` acting on a smooth `g` is
//!
//! ```text
//! 𝓛g(x) = −c g′(x) + σ²/2 g″(x) + κ ∫₀^∞ (g(x + z) − g(x)) f_Z(z) dz
//! ```
//!
//! and a candidate value `g` with barrier `b` is certified when
//! `(𝓛 − q)g(x) + r·max_{0≤l≤x} {l + g(x − l) − g(x)}` vanishes on the grid
//! together with the side conditions of the problem.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::PhaseTypeLevyModel;
use crate::quadrature::Integrator;
use crate::scale::Side;
use crate::valuation::{BarrierCurve, PeriodicProblem, ProblemKind, SmoothCurve};

/// Jump-size tail mass beyond the quadrature range.
const TAIL_MASS: f64 = 1e-13;

/// Generator residuals are accepted below `GENERATOR_TOL·(1 + |g(x)|)`.
pub const GENERATOR_TOL: f64 = 1e-6;
/// Absolute tolerance on the full HJB expression.
pub const HJB_TOL: f64 = 1e-5;
/// Relative agreement between quadrature and closed form above the barrier.
pub const CLOSED_FORM_TOL: f64 = 1e-6;
/// Denominator floor for that relative comparison, as a multiple of `1 + |g(x)|`.
pub const CLOSED_FORM_FLOOR: f64 = 1e-3;
/// Tolerance for derivative side conditions (`u′(0) = β`, `u′ ≤ β`, ...).
pub const SIDE_TOL: f64 = 1e-9;
/// Points this close to zero are left out of generator grids.
pub const ORIGIN_EXCLUSION: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratorValue {
    /// `𝓛g(x)`; subtract `q·g(x)` for the discounted generator.
    pub value: f64,
    /// Quadrature error estimate for the jump integral, times `κ`.
    pub error: f64,
}

/// Applies `𝓛` by adaptive quadrature.
#[derive(Debug, Clone)]
pub struct Generator<'a> {
    model: &'a PhaseTypeLevyModel,
    cutoff: f64,
    rel_tol: f64,
}

impl<'a> Generator<'a> {
    pub fn new(model: &'a PhaseTypeLevyModel) -> Self {
        Self {
            model,
            cutoff: model.jumps().tail_cutoff(TAIL_MASS),
            rel_tol: 1e-10,
        }
    }

    /// `𝓛g(x)` for `x > 0`.
    ///
    /// The jump integral runs to `cutoff + max(0, b − x)`; beyond that `g` is
    /// replaced by its affine asymptote and integrated against the tail in
    /// closed form.
    pub fn apply(&self, g: &dyn SmoothCurve, x: f64) -> Result<GeneratorValue> {
        let jet = g.jet(x, Side::Right);
        let local = -self.model.c() * jet[1] + 0.5 * self.model.sigma().powi(2) * jet[2];
        if self.model.kappa() == 0.0 {
            return Ok(GeneratorValue {
                value: local,
                error: 0.0,
            });
        }
        let law = self.model.jumps();
        let gap = g.barrier() - x;
        let upper = self.cutoff + gap.max(0.0);
        let mut points = vec![0.0];
        if gap > 0.0 {
            points.push(gap);
        }
        points.push(upper);
        let scale = 1.0 + jet[0].abs();
        let integrator = Integrator {
            abs_tol: 1e-13 * scale,
            rel_tol: self.rel_tol,
            max_intervals: 4000,
        };
        let body = integrator
            .integrate_with_breaks(|z| (g.value(x + z) - jet[0]) * law.density(z), &points)?;
        let (slope, intercept) = g.asymptote();
        let tail = (intercept + slope * x - jet[0]) * law.survival(upper) + slope * law.tail_mean(upper);
        let kappa = self.model.kappa();
        Ok(GeneratorValue {
            value: local + kappa * (body.value + tail),
            error: kappa * body.error,
        })
    }
}

/// `r·max_{0≤l≤x} {l + g(x − l) − g(x)}` for a concave curve with `g′(b) = 1`
/// (or `g′ ≤ 1` everywhere when `b = 0`): zero up to `b`, `x − b + g(b) − g(x)` above.
pub fn max_term(g: &dyn SmoothCurve, r: f64, x: f64) -> f64 {
    let b = g.barrier();
    if x <= b {
        0.0
    } else {
        r * (x - b + g.value(b) - g.value(x))
    }
}

/// The same maximum over the grid `l ∈ {0, x/n, …, x}` together with the
/// discretization bound `(x/n)·sup|1 − g′|` over that grid.
pub fn max_term_brute_force(g: &dyn SmoothCurve, r: f64, x: f64, n: usize) -> (f64, f64) {
    let gx = g.value(x);
    let step = x / n as f64;
    let mut best = f64::NEG_INFINITY;
    let mut slope_gap: f64 = 0.0;
    for i in 0..=n {
        let l = if i == n { x } else { step * i as f64 };
        best = best.max(l + g.value(x - l) - gx);
        slope_gap = slope_gap.max((1.0 - g.derivative(x - l)).abs());
    }
    (r * best, r * step * slope_gap)
}

/// Closed form of `(𝓛 − q)g(x)` above the barrier of a periodic curve:
/// `qr/(r+q)·(K(e^{Φ(q+r)(b−x)} − 1) + (b − x))`.
pub fn generator_above_barrier(curve: &BarrierCurve<'_>, x: f64) -> Option<f64> {
    let k = curve.multiplier()?;
    let scale = curve.scale();
    let (q, r) = (scale.q(), scale.r());
    let y = curve.barrier() - x;
    Some(q * r / (r + q) * (k * ((scale.phi_r() * y).exp() - 1.0) + y))
}

/// Uniform grid on `[ORIGIN_EXCLUSION, x_max]`.
pub fn default_grid(x_max: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![x_max];
    }
    let step = (x_max - ORIGIN_EXCLUSION) / (n - 1) as f64;
    (0..n).map(|i| ORIGIN_EXCLUSION + step * i as f64).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HjbPoint {
    pub x: f64,
    pub value: f64,
    /// `(𝓛 − q)g(x)` by quadrature.
    pub generator_residual: f64,
    pub quadrature_error: f64,
    /// `r·max_{0≤l≤x}{…}`
    pub max_term: f64,
    pub hjb_value: f64,
    /// Analytic `(𝓛 − q)g(x)` where one is available (above the barrier).
    pub closed_form: Option<f64>,
}

impl HjbPoint {
    pub fn closed_form_error(&self) -> Option<f64> {
        self.closed_form.map(|c| {
            let floor = CLOSED_FORM_FLOOR * (1.0 + self.value.abs());
            (self.generator_residual - c).abs() / c.abs().max(floor)
        })
    }

    pub fn passes(&self, barrier: f64) -> bool {
        let tol = GENERATOR_TOL * (1.0 + self.value.abs());
        let local = if self.x <= barrier {
            self.generator_residual.abs() <= tol && self.max_term == 0.0
        } else {
            self.closed_form_error().is_none_or(|e| e <= CLOSED_FORM_TOL)
        };
        local && self.hjb_value.abs() <= HJB_TOL
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SideCondition {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HjbReport {
    pub barrier: f64,
    pub points: Vec<HjbPoint>,
    pub side_conditions: Vec<SideCondition>,
}

impl HjbReport {
    /// Grid points that fail any pointwise check.
    pub fn failures(&self) -> Vec<f64> {
        self.points
            .iter()
            .filter(|p| !p.passes(self.barrier))
            .map(|p| p.x)
            .collect()
    }

    pub fn certified(&self) -> bool {
        self.failures().is_empty() && self.side_conditions.iter().all(|c| c.passed)
    }

    /// `Ok(self)` when certified, else a certification error listing the points
    /// (side-condition failures are reported at `x = 0`).
    pub fn certify(self) -> Result<Self> {
        let mut points = self.failures();
        if self.side_conditions.iter().any(|c| !c.passed) {
            points.insert(0, 0.0);
        }
        if points.is_empty() {
            Ok(self)
        } else {
            Err(Error::Certification { points })
        }
    }

    pub fn max_abs_hjb(&self) -> f64 {
        self.points.iter().fold(0.0, |m, p| m.max(p.hjb_value.abs()))
    }

    /// Largest generator residual relative to `1 + |g|` at or below the barrier.
    pub fn max_harmonic_residual(&self) -> f64 {
        self.points
            .iter()
            .filter(|p| p.x <= self.barrier)
            .fold(0.0, |m, p| m.max(p.generator_residual.abs() / (1.0 + p.value.abs())))
    }

    pub fn max_closed_form_error(&self) -> f64 {
        self.points
            .iter()
            .filter_map(HjbPoint::closed_form_error)
            .fold(0.0, f64::max)
    }
}

fn evaluate(
    problem: &PeriodicProblem,
    curve: &BarrierCurve<'_>,
    grid: &[f64],
) -> Result<Vec<HjbPoint>> {
    let generator = Generator::new(problem.model());
    let (q, r) = (problem.spec().q, problem.spec().r);
    grid.par_iter()
        .map(|&x| {
            let applied = generator.apply(curve, x)?;
            let value = curve.value(x);
            let residual = applied.value - q * value;
            let max = max_term(curve, r, x);
            Ok(HjbPoint {
                x,
                value,
                generator_residual: residual,
                quadrature_error: applied.error,
                max_term: max,
                hjb_value: residual + max,
                closed_form: if x > curve.barrier() {
                    generator_above_barrier(curve, x)
                } else {
                    None
                },
            })
        })
        .collect()
}

fn condition(name: &'static str, passed: bool, detail: String) -> SideCondition {
    SideCondition {
        name,
        passed,
        detail,
    }
}

fn derivative_conditions(curve: &BarrierCurve<'_>, grid: &[f64], concave: bool) -> Vec<SideCondition> {
    let slopes: Vec<f64> = grid.iter().map(|&x| curve.derivative(x)).collect();
    let min_slope = slopes.iter().copied().fold(f64::INFINITY, f64::min);
    let mut out = vec![condition(
        "increasing",
        min_slope > 0.0,
        format!("min g′ on grid = {min_slope:e}"),
    )];
    if concave {
        let worst = slopes
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::NEG_INFINITY, f64::max);
        out.push(condition(
            "concave",
            worst <= SIDE_TOL,
            format!("max increase of g′ between grid points = {worst:e}"),
        ));
    }
    out
}

/// Certification data for the dividend value `v_star` at the solved barrier.
pub fn hjb_check_dividends(problem: &PeriodicProblem, b_star: f64, grid: &[f64]) -> Result<HjbReport> {
    let rho = problem.spec().rho()?;
    let curve = problem.v_star(b_star)?;
    let points = evaluate(problem, &curve, grid)?;
    let at_zero = curve.value(0.0);
    let mut side_conditions = vec![condition(
        "terminal payoff at zero",
        (at_zero - rho).abs() <= SIDE_TOL * (1.0 + rho.abs()),
        format!("v(0) = {at_zero}, ρ = {rho}"),
    )];
    if b_star > 0.0 {
        side_conditions.extend(derivative_conditions(&curve, grid, true));
        let slope = curve.derivative(b_star);
        side_conditions.push(condition(
            "unit slope at barrier",
            (slope - 1.0).abs() <= SIDE_TOL,
            format!("v′(b*) = {slope}"),
        ));
    } else {
        let worst = grid.iter().map(|&x| curve.derivative(x)).fold(f64::NEG_INFINITY, f64::max);
        side_conditions.push(condition(
            "slope at most one",
            worst <= 1.0 + SIDE_TOL,
            format!("max v′ on grid = {worst}"),
        ));
    }
    Ok(HjbReport {
        barrier: b_star,
        points,
        side_conditions,
    })
}

/// Certification data for the bail-out value `u_dagger` at the solved barrier.
pub fn hjb_check_bailout(problem: &PeriodicProblem, b_dagger: f64, grid: &[f64]) -> Result<HjbReport> {
    let beta = problem.spec().beta()?;
    let curve = problem.u_dagger(b_dagger)?;
    let points = evaluate(problem, &curve, grid)?;
    let mut side_conditions = derivative_conditions(&curve, grid, true);
    let slope0 = curve.derivative(0.0);
    side_conditions.push(condition(
        "slope beta at zero",
        (slope0 - beta).abs() <= SIDE_TOL,
        format!("u′(0) = {slope0}, β = {beta}"),
    ));
    let worst = grid.iter().map(|&x| curve.derivative(x)).fold(f64::NEG_INFINITY, f64::max);
    side_conditions.push(condition(
        "slope at most beta",
        worst <= beta + SIDE_TOL,
        format!("max u′ on grid = {worst}"),
    ));
    let floor = curve.value(0.0);
    let lowest = grid.iter().map(|&x| curve.value(x)).fold(f64::INFINITY, f64::min);
    side_conditions.push(condition(
        "bounded below",
        lowest >= floor - SIDE_TOL * (1.0 + floor.abs()),
        format!("min u on grid = {lowest}, u(0) = {floor}"),
    ));
    Ok(HjbReport {
        barrier: b_dagger,
        points,
        side_conditions,
    })
}

/// Dispatch on the problem kind.
pub fn hjb_check(problem: &PeriodicProblem, barrier: f64, grid: &[f64]) -> Result<HjbReport> {
    match problem.spec().kind {
        ProblemKind::Dividends { .. } => hjb_check_dividends(problem, barrier, grid),
        ProblemKind::Bailout { .. } => hjb_check_bailout(problem, barrier, grid),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DominanceReport {
    /// `(alternative barrier, max_x (g_alt(x) − g_opt(x)))`
    pub alternatives: Vec<(f64, f64)>,
}

impl DominanceReport {
    pub fn max_violation(&self) -> f64 {
        self.alternatives
            .iter()
            .fold(f64::NEG_INFINITY, |m, (_, v)| m.max(*v))
    }

    pub fn holds(&self, tol: f64) -> bool {
        self.max_violation() <= tol
    }
}

/// Compare the optimal curve at `barrier` with the barrier strategies at `alternatives`.
pub fn dominance_scan(
    problem: &PeriodicProblem,
    barrier: f64,
    alternatives: &[f64],
    grid: &[f64],
) -> Result<DominanceReport> {
    let optimal = problem.optimal_curve(barrier)?;
    let best = optimal.values(grid);
    let alternatives = alternatives
        .iter()
        .map(|&b| {
            let curve = problem.barrier_curve(b)?;
            let violation = grid
                .iter()
                .zip(&best)
                .map(|(&x, v)| curve.value(x) - v)
                .fold(f64::NEG_INFINITY, f64::max);
            Ok((b, violation))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DominanceReport { alternatives })
}
