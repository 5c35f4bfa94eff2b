//! Smooth-fit equations for the optimal periodic barriers.
//!
//! Dividends: `b*` is the root of
//! `f(b) = Z̄(b) + ψ′(0+)/q + (q+r)/r·ρ + (r+q)/(r Φ(q+r))·Zqr(b)`,
//! or zero when `f(0) ≥ 0`. Bail-out: `b†` is the root of `f̂(b) = Zqr(b) − β`.

use rayon::prelude::*;

use crate::error::Result;
use crate::rootfind::{grow_bracket, increasing_root};
use crate::scale::Side;
use crate::valuation::{PeriodicProblem, ProblemKind, ProblemSpec, SmoothCurve};

const RESIDUAL_TOL: f64 = 1e-11;
const BRACKET_LIMIT: f64 = 1e3;

/// One-sided jets of the optimal curve at its barrier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothFitReport {
    pub left: [f64; 4],
    pub right: [f64; 4],
}

impl SmoothFitReport {
    /// `|right − left|` for the value and its first three derivatives.
    pub fn gaps(&self) -> [f64; 4] {
        std::array::from_fn(|n| (self.right[n] - self.left[n]).abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierSolution {
    pub level: f64,
    pub is_zero: bool,
    /// `|f(level)|` or `|f̂(level)|`.
    pub residual: f64,
    pub iterations: usize,
    pub smoothfit: SmoothFitReport,
}

impl PeriodicProblem {
    /// `f(b)` for the dividend problem.
    pub fn f(&self, b: f64) -> Result<f64> {
        let rho = self.spec().rho()?;
        let (q, r) = (self.spec().q, self.spec().r);
        let jet = self.scale().jet(b);
        Ok(jet.base.zbar
            + self.psi_prime_at_zero() / q
            + (q + r) / r * rho
            + (r + q) / (r * self.scale().phi_r()) * jet.zqr[0])
    }

    /// `f′(b) = Z(b) + (q/r)·J(b)`.
    pub fn f_prime(&self, b: f64) -> Result<f64> {
        self.spec().rho()?;
        let (q, r) = (self.spec().q, self.spec().r);
        let jet = self.scale().jet(b);
        Ok(jet.base.z + q / r * jet.j)
    }

    /// `f̂(b) = Zqr(b) − β` for the bail-out problem.
    pub fn f_hat(&self, b: f64) -> Result<f64> {
        let beta = self.spec().beta()?;
        Ok(self.scale().zqr(b) - beta)
    }

    /// `f̂′(b) = q/(r+q)·Φ(q+r)·J(b)`.
    pub fn f_hat_prime(&self, b: f64) -> Result<f64> {
        self.spec().beta()?;
        Ok(self.scale().zqr_prime(b))
    }

    /// `I_{r,q} = −(q/r)(q+r)(ρ + 1/Φ(q+r))`; the dividend barrier is zero iff
    /// `ψ′(0+) ≥ I_{r,q}`.
    pub fn zero_barrier_threshold(&self) -> Result<f64> {
        let rho = self.spec().rho()?;
        let (q, r) = (self.spec().q, self.spec().r);
        Ok(-(q / r) * (q + r) * (rho + 1.0 / self.scale().phi_r()))
    }

    fn smoothfit(&self, level: f64) -> Result<SmoothFitReport> {
        let curve = self.optimal_curve(level)?;
        Ok(SmoothFitReport {
            left: curve.jet(level, Side::Left),
            right: curve.jet(level, Side::Right),
        })
    }

    fn solve_increasing<F>(&self, what: &'static str, eval: F, guess: Option<f64>) -> Result<(f64, f64, usize)>
    where
        F: Fn(f64) -> (f64, f64),
    {
        let phi = self.scale().base().phi();
        let hi = grow_bracket(what, |b| eval(b).0, 0.0, 1.0 / phi, BRACKET_LIMIT / phi)?;
        let hi = guess.map_or(hi, |g| hi.max(g));
        let root = increasing_root(what, eval, 0.0, hi, guess, RESIDUAL_TOL)?;
        Ok((root.x, root.residual, root.iterations))
    }

    /// Optimal dividend barrier `b*`.
    pub fn solve_b_star(&self) -> Result<BarrierSolution> {
        self.solve_b_star_from(None)
    }

    /// As [`solve_b_star`](Self::solve_b_star), starting Newton from `guess`.
    pub fn solve_b_star_from(&self, guess: Option<f64>) -> Result<BarrierSolution> {
        if self.psi_prime_at_zero() >= self.zero_barrier_threshold()? {
            return Ok(BarrierSolution {
                level: 0.0,
                is_zero: true,
                residual: self.f(0.0)?.abs(),
                iterations: 0,
                smoothfit: self.smoothfit(0.0)?,
            });
        }
        let (level, residual, iterations) = self.solve_increasing(
            "dividend barrier",
            |b| {
                (
                    self.f(b).expect("kind checked above"),
                    self.f_prime(b).expect("kind checked above"),
                )
            },
            guess,
        )?;
        Ok(BarrierSolution {
            level,
            is_zero: false,
            residual,
            iterations,
            smoothfit: self.smoothfit(level)?,
        })
    }

    /// Optimal bail-out barrier `b†`.
    pub fn solve_b_dagger(&self) -> Result<BarrierSolution> {
        self.solve_b_dagger_from(None)
    }

    pub fn solve_b_dagger_from(&self, guess: Option<f64>) -> Result<BarrierSolution> {
        self.spec().beta()?;
        let (level, residual, iterations) = self.solve_increasing(
            "bail-out barrier",
            |b| {
                (
                    self.f_hat(b).expect("kind checked above"),
                    self.f_hat_prime(b).expect("kind checked above"),
                )
            },
            guess,
        )?;
        Ok(BarrierSolution {
            level,
            is_zero: false,
            residual,
            iterations,
            smoothfit: self.smoothfit(level)?,
        })
    }

    /// The optimal barrier for whichever problem this is.
    pub fn solve(&self) -> Result<BarrierSolution> {
        match self.spec().kind {
            ProblemKind::Dividends { .. } => self.solve_b_star(),
            ProblemKind::Bailout { .. } => self.solve_b_dagger(),
        }
    }

    pub fn solve_from(&self, guess: f64) -> Result<BarrierSolution> {
        match self.spec().kind {
            ProblemKind::Dividends { .. } => self.solve_b_star_from(Some(guess)),
            ProblemKind::Bailout { .. } => self.solve_b_dagger_from(Some(guess)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub r: f64,
    pub solution: BarrierSolution,
    /// `|b(r) − b̃|`
    pub gap_to_classical: f64,
}

/// Solve for the optimal barrier at each decision rate in `r_list` and compare
/// with the classical barrier. Returns the classical barrier and one row per rate.
pub fn r_sweep(problem: &PeriodicProblem, r_list: &[f64]) -> Result<(f64, Vec<SweepRow>)> {
    let classical = problem.classical_barrier()?;
    let rows = r_list
        .par_iter()
        .map(|&r| {
            let spec = ProblemSpec { r, ..*problem.spec() };
            let solution = problem.with_spec(spec)?.solve()?;
            Ok(SweepRow {
                r,
                solution,
                gap_to_classical: (solution.level - classical).abs(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((classical, rows))
}
