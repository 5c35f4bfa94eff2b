//! Spectrally positive Lévy processes with phase-type jumps.
//!
//! The surplus is `X(t) = x − c·t + σ·B(t) + Σ_{n ≤ N(t)} Z_n` where `N` is a
//! Poisson process of rate `κ` and the `Z_n` are i.i.d. phase-type `(α, T)`.
//! Its Laplace exponent `ψ(θ) = log E[e^{−θ X(1)}]` is the rational function
//!
//! ```text
//! ψ(θ) = c·θ + σ²θ²/2 + κ·(α (θI − T)⁻¹ t − 1),   t = −T·1.
//! ```

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{shifted_solve, shifted_solve_real};
use crate::rootfind::{grow_bracket, increasing_root};

const PROB_TOL: f64 = 1e-10;

/// `e^{Tz}` is treated as zero once `η·z` falls below this, where `η` is the
/// spectral abscissa of `T`.
const EXP_UNDERFLOW: f64 = -700.0;

/// A phase-type law: absorption time of a CTMC with initial law `alpha` over
/// the transient states and sub-generator `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseTypeLaw {
    alpha: DVector<f64>,
    generator: DMatrix<f64>,
    exit: DVector<f64>,
    /// `(−T)⁻¹ 1`
    mean_residual: DVector<f64>,
    spectral_abscissa: f64,
}

impl PhaseTypeLaw {
    pub fn new(alpha: Vec<f64>, generator: DMatrix<f64>) -> Result<Self> {
        let m = alpha.len();
        if m == 0 {
            return Err(Error::InvalidModel("phase-type law needs at least one phase".into()));
        }
        if generator.nrows() != m || generator.ncols() != m {
            return Err(Error::InvalidModel(format!(
                "sub-generator is {}×{} but alpha has {m} entries",
                generator.nrows(),
                generator.ncols()
            )));
        }
        if alpha.iter().any(|a| !a.is_finite() || *a < 0.0) {
            return Err(Error::InvalidModel("alpha entries must be finite and ≥ 0".into()));
        }
        let total: f64 = alpha.iter().sum();
        if (total - 1.0).abs() > PROB_TOL {
            return Err(Error::InvalidModel(format!("alpha sums to {total}, expected 1")));
        }
        for i in 0..m {
            for j in 0..m {
                let v = generator[(i, j)];
                if !v.is_finite() {
                    return Err(Error::InvalidModel("sub-generator has non-finite entries".into()));
                }
                if i == j && v >= 0.0 {
                    return Err(Error::InvalidModel(format!(
                        "diagonal entry T[{i}][{i}] = {v} must be strictly negative"
                    )));
                }
                if i != j && v < 0.0 {
                    return Err(Error::InvalidModel(format!(
                        "off-diagonal entry T[{i}][{j}] = {v} must be ≥ 0"
                    )));
                }
            }
            let row: f64 = generator.row(i).sum();
            if row > PROB_TOL * generator[(i, i)].abs() {
                return Err(Error::InvalidModel(format!("row {i} of T sums to {row} > 0")));
            }
        }
        let spectral_abscissa = generator
            .complex_eigenvalues()
            .iter()
            .map(|z| z.re)
            .fold(f64::NEG_INFINITY, f64::max);
        if spectral_abscissa >= 0.0 {
            return Err(Error::InvalidModel(format!(
                "sub-generator has an eigenvalue with real part {spectral_abscissa} ≥ 0"
            )));
        }
        let exit = -(&generator * DVector::from_element(m, 1.0));
        let mean_residual = (-&generator)
            .lu()
            .solve(&DVector::from_element(m, 1.0))
            .ok_or_else(|| Error::InvalidModel("sub-generator is singular".into()))?;
        Ok(Self {
            alpha: DVector::from_vec(alpha),
            generator,
            exit,
            mean_residual,
            spectral_abscissa,
        })
    }

    /// Exponential law with the given rate.
    pub fn exponential(rate: f64) -> Result<Self> {
        Self::new(vec![1.0], DMatrix::from_element(1, 1, -rate))
    }

    pub fn phases(&self) -> usize {
        self.alpha.len()
    }

    pub fn alpha(&self) -> &DVector<f64> {
        &self.alpha
    }

    pub fn generator(&self) -> &DMatrix<f64> {
        &self.generator
    }

    /// Exit-rate vector `t = −T·1`.
    pub fn exit(&self) -> &DVector<f64> {
        &self.exit
    }

    /// Largest real part among the eigenvalues of `T` (strictly negative).
    pub fn spectral_abscissa(&self) -> f64 {
        self.spectral_abscissa
    }

    pub fn mean(&self) -> f64 {
        self.alpha.dot(&self.mean_residual)
    }

    /// `E[Z^k] = k!·α(−T)^{−k}1`.
    pub fn moment(&self, k: u32) -> f64 {
        let neg_t = -&self.generator;
        let lu = neg_t.lu();
        let mut v = DVector::from_element(self.phases(), 1.0);
        let mut factorial = 1.0;
        for j in 1..=k {
            v = lu.solve(&v).expect("validated sub-generator is invertible");
            factorial *= j as f64;
        }
        factorial * self.alpha.dot(&v)
    }

    /// Row vector `α·e^{Tz}`, or `None` when it has underflowed.
    fn propagate(&self, z: f64) -> Option<DVector<f64>> {
        if self.spectral_abscissa * z < EXP_UNDERFLOW {
            return None;
        }
        let e = (&self.generator * z).exp();
        Some(e.transpose() * &self.alpha)
    }

    /// Density `α e^{Tz} t`; zero for `z < 0` and once `e^{Tz}` underflows.
    pub fn density(&self, z: f64) -> f64 {
        if z < 0.0 {
            return 0.0;
        }
        self.propagate(z).map_or(0.0, |row| row.dot(&self.exit).max(0.0))
    }

    /// Survival function `P(Z > z) = α e^{Tz} 1`.
    pub fn survival(&self, z: f64) -> f64 {
        if z <= 0.0 {
            return 1.0;
        }
        self.propagate(z).map_or(0.0, |row| row.sum().clamp(0.0, 1.0))
    }

    /// `E[Z; Z > z] = z·P(Z > z) + α e^{Tz} (−T)⁻¹ 1`.
    pub fn tail_mean(&self, z: f64) -> f64 {
        if z <= 0.0 {
            return self.mean();
        }
        self.propagate(z)
            .map_or(0.0, |row| z * row.sum() + row.dot(&self.mean_residual))
    }

    /// Smallest (up to a factor 2 and bisection) `z` with `P(Z > z) ≤ eps`.
    pub fn tail_cutoff(&self, eps: f64) -> f64 {
        let mut hi = self.mean().max(1e-3);
        while self.survival(hi) > eps {
            hi *= 2.0;
        }
        let mut lo = 0.0;
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if self.survival(mid) > eps {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    }

    /// `E[e^{−θZ}] = α (θI − T)⁻¹ t` for complex `θ`.
    pub fn laplace_transform(&self, theta: Complex64) -> Result<Complex64> {
        let w = shifted_solve(&self.generator, theta, self.exit.as_slice())
            .ok_or(Error::SingularResolvent {
                re: theta.re,
                im: theta.im,
            })?;
        Ok(self.alpha.iter().zip(&w).map(|(a, w)| *a * w).sum())
    }

    /// Phase-type law with the first two moments of `|N(0, 1)|`.
    ///
    /// This is a two-phase mixture of an Erlang(1) and an Erlang(2) law with a
    /// common rate: mean `√(2/π)` and second moment `1`. It is a moment-matched
    /// stand-in for higher-order folded-normal fits, not a density fit.
    pub fn folded_normal() -> Self {
        let mean = (2.0 / std::f64::consts::PI).sqrt();
        let scv = (1.0 - mean * mean) / (mean * mean);
        // Erlang(k−1)/Erlang(k) mixture with 1/k ≤ scv ≤ 1/(k−1); here k = 2.
        let k = 2.0;
        let p = (k * scv - (k * (1.0 + scv) - k * k * scv).sqrt()) / (1.0 + scv);
        let rate = (k - p) / mean;
        let generator = DMatrix::from_row_slice(2, 2, &[-rate, rate, 0.0, -rate]);
        Self::new(vec![1.0 - p, p], generator).expect("folded-normal fit is a valid law")
    }
}

/// The spectrally positive process `X`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseTypeLevyModel {
    c: f64,
    sigma: f64,
    kappa: f64,
    jumps: PhaseTypeLaw,
}

impl PhaseTypeLevyModel {
    pub fn new(c: f64, sigma: f64, kappa: f64, jumps: PhaseTypeLaw) -> Result<Self> {
        if !c.is_finite() || !sigma.is_finite() || !kappa.is_finite() {
            return Err(Error::InvalidModel("c, sigma and kappa must be finite".into()));
        }
        if sigma < 0.0 {
            return Err(Error::InvalidModel(format!("sigma = {sigma} must be ≥ 0")));
        }
        if kappa < 0.0 {
            return Err(Error::InvalidModel(format!("kappa = {kappa} must be ≥ 0")));
        }
        if sigma == 0.0 && c <= 0.0 {
            return Err(Error::InvalidModel(
                "with sigma = 0 the drift c must be > 0 (otherwise X is a subordinator)".into(),
            ));
        }
        Ok(Self {
            c,
            sigma,
            kappa,
            jumps,
        })
    }

    /// Drift-only process `X(t) = x − c·t` (plus an inert jump law).
    pub fn drift_only(c: f64) -> Result<Self> {
        Self::new(c, 0.0, 0.0, PhaseTypeLaw::exponential(1.0)?)
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn jumps(&self) -> &PhaseTypeLaw {
        &self.jumps
    }

    pub fn is_bounded_variation(&self) -> bool {
        self.sigma == 0.0
    }

    pub fn mean_jump(&self) -> f64 {
        self.jumps.mean()
    }

    /// `ψ(θ)` for complex `θ`.
    pub fn laplace_exponent(&self, theta: Complex64) -> Result<Complex64> {
        let jump = if self.kappa == 0.0 {
            Complex64::new(0.0, 0.0)
        } else {
            self.kappa * (self.jumps.laplace_transform(theta)? - 1.0)
        };
        Ok(self.c * theta + 0.5 * self.sigma * self.sigma * theta * theta + jump)
    }

    /// `ψ′(θ)` for complex `θ`.
    pub fn laplace_exponent_derivative(&self, theta: Complex64) -> Result<Complex64> {
        let base = self.c + self.sigma * self.sigma * theta;
        if self.kappa == 0.0 {
            return Ok(base);
        }
        let t = self.jumps.generator();
        let singular = || Error::SingularResolvent {
            re: theta.re,
            im: theta.im,
        };
        let w = shifted_solve(t, theta, self.jumps.exit().as_slice()).ok_or_else(singular)?;
        // (θI − T)⁻² t, solved as two resolvent applications; the second right-hand side is complex.
        let re: Vec<f64> = w.iter().map(|z| z.re).collect();
        let im: Vec<f64> = w.iter().map(|z| z.im).collect();
        let v_re = shifted_solve(t, theta, &re).ok_or_else(singular)?;
        let v_im = shifted_solve(t, theta, &im).ok_or_else(singular)?;
        let quad: Complex64 = self
            .jumps
            .alpha()
            .iter()
            .zip(v_re.iter().zip(&v_im))
            .map(|(a, (r, i))| *a * (r + Complex64::i() * i))
            .sum();
        Ok(base - self.kappa * quad)
    }

    /// Real `ψ(θ)` and `ψ′(θ)` for `θ ≥ 0`.
    pub fn psi_with_derivative(&self, theta: f64) -> (f64, f64) {
        let mut value = self.c * theta + 0.5 * self.sigma * self.sigma * theta * theta;
        let mut slope = self.c + self.sigma * self.sigma * theta;
        if self.kappa > 0.0 {
            let t = self.jumps.generator();
            let alpha = self.jumps.alpha();
            match shifted_solve_real(t, theta, self.jumps.exit().as_slice()) {
                Some(w) => {
                    let v = shifted_solve_real(t, theta, &w).expect("same matrix as above");
                    let lt: f64 = alpha.iter().zip(&w).map(|(a, w)| a * w).sum();
                    let dlt: f64 = alpha.iter().zip(&v).map(|(a, v)| a * v).sum();
                    value += self.kappa * (lt - 1.0);
                    slope -= self.kappa * dlt;
                }
                None => return (f64::NAN, f64::NAN),
            }
        }
        (value, slope)
    }

    pub fn psi(&self, theta: f64) -> f64 {
        self.psi_with_derivative(theta).0
    }

    /// `ψ′(0+) = c − κ·E[Z] = −E[X(1)]`.
    pub fn psi_prime_at_zero(&self) -> f64 {
        self.c - self.kappa * self.mean_jump()
    }

    /// Right inverse `Φ(q)`: the unique positive root of `ψ(λ) = q`.
    pub fn phi(&self, q: f64) -> Result<f64> {
        if !(q > 0.0 && q.is_finite()) {
            return Err(Error::InvalidProblem(format!("Φ(q) needs q > 0, got {q}")));
        }
        let hi = grow_bracket("Φ(q)", |x| self.psi(x) - q, 0.0, 1.0, 1e12)?;
        let root = increasing_root(
            "Φ(q)",
            |x| {
                let (v, d) = self.psi_with_derivative(x);
                (v - q, d)
            },
            0.0,
            hi,
            None,
            1e-13 * q.max(1.0),
        )?;
        Ok(root.x)
    }

    /// Lévy density of the jumps, `κ·f_Z(z)`.
    pub fn levy_density(&self, z: f64) -> f64 {
        self.kappa * self.jumps.density(z)
    }

    /// Density `f_Z` of a single jump.
    pub fn jump_density(&self, z: f64) -> f64 {
        self.jumps.density(z)
    }
}
