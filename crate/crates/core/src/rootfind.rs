//! Safeguarded Newton iteration for increasing functions on a sign-change bracket.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root {
    pub x: f64,
    pub residual: f64,
    pub iterations: usize,
}

const MAX_ITER: usize = 200;

/// Find the zero of an increasing `f` inside `[lo, hi]`, where `f(lo) ≤ 0 ≤ f(hi)`.
///
/// `eval` returns `(f(x), f'(x))`. Newton steps that leave the bracket or are
/// longer than half the previous step are replaced by bisection. Iteration stops once
/// `|f(x)| ≤ ftol` or the bracket has shrunk to a few ulps.
pub fn increasing_root<F>(
    what: &'static str,
    eval: F,
    mut lo: f64,
    mut hi: f64,
    guess: Option<f64>,
    ftol: f64,
) -> Result<Root>
where
    F: Fn(f64) -> (f64, f64),
{
    let (f_lo, _) = eval(lo);
    let (f_hi, _) = eval(hi);
    if !(f_lo <= 0.0 && f_hi >= 0.0) {
        return Err(Error::Bracket {
            what,
            lo,
            hi,
            f_lo,
            f_hi,
        });
    }
    if f_lo == 0.0 {
        return Ok(Root {
            x: lo,
            residual: 0.0,
            iterations: 0,
        });
    }
    if f_hi == 0.0 {
        return Ok(Root {
            x: hi,
            residual: 0.0,
            iterations: 0,
        });
    }

    let mut x = match guess {
        Some(g) if g > lo && g < hi => g,
        _ => 0.5 * (lo + hi),
    };
    let mut best = Root {
        x,
        residual: f64::INFINITY,
        iterations: 0,
    };
    let mut last_step = hi - lo;
    for iter in 1..=MAX_ITER {
        let (fx, dfx) = eval(x);
        if fx.abs() < best.residual {
            best = Root {
                x,
                residual: fx.abs(),
                iterations: iter,
            };
        }
        if fx.abs() <= ftol {
            return Ok(Root {
                x,
                residual: fx.abs(),
                iterations: iter,
            });
        }
        if fx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let width = hi - lo;
        if width <= 4.0 * f64::EPSILON * x.abs().max(f64::MIN_POSITIVE) {
            best.iterations = iter;
            return Ok(best);
        }
        let newton = x - fx / dfx;
        let newton_ok =
            dfx > 0.0 && newton > lo && newton < hi && (2.0 * fx).abs() <= (last_step * dfx).abs();
        let next = if newton_ok { newton } else { 0.5 * (lo + hi) };
        last_step = next - x;
        x = next;
    }
    Err(Error::NoConvergence {
        what,
        iterations: MAX_ITER,
        residual: best.residual,
    })
}

/// Grow `hi` geometrically from `start` until `f(hi) > 0`, giving up beyond `limit`.
pub fn grow_bracket<F>(what: &'static str, f: F, lo: f64, start: f64, limit: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let mut hi = start.max(f64::MIN_POSITIVE);
    loop {
        let value = f(hi);
        if value > 0.0 {
            return Ok(hi);
        }
        if hi >= limit || !value.is_finite() {
            return Err(Error::Bracket {
                what,
                lo,
                hi,
                f_lo: f(lo),
                f_hi: value,
            });
        }
        hi = (2.0 * hi).min(limit);
    }
}
