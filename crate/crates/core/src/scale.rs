//! Scale functions of the spectrally negative dual `−X`, in partial-fraction form.
//!
//! With `θ_1, …, θ_n` the (simple) roots of `ψ(θ) = q` and `A_i = 1/ψ′(θ_i)`,
//!
//! ```text
//! W(x) = Σ A_i e^{θ_i x}            (x ≥ 0),   W(x) = 0 for x < 0
//! W̄(x) = ∫₀ˣ W,   Z(x) = 1 + q W̄(x),   Z̄(x) = ∫₀ˣ Z
//! ```
//!
//! and the periodic extensions with decision rate `r`, `Φ_r = Φ(q + r)`:
//!
//! ```text
//! J(x)   = r Σ A_i e^{θ_i x} / (Φ_r − θ_i)   (x ≥ 0),   J(x) = e^{Φ_r x} for x < 0
//! Zqr(x) = (r Z(x) + q J(x)) / (r + q)
//! H(y)   = r/(r+q) · (Z̄(y) + ψ′(0+)/q)
//! ```

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{charpoly, poly_axpy, poly_mul, poly_roots};
use crate::model::PhaseTypeLevyModel;

const NEWTON_STEPS: usize = 12;
const SPURIOUS_TOL: f64 = 1e-6;
const GAP_TOL: f64 = 1e-6;
const PARTIAL_FRACTION_TOL: f64 = 1e-9;

/// Which one-sided limit to take at the origin, where `W` may jump.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// `(e^z − 1)/z`
fn phi1(z: Complex64) -> Complex64 {
    if z.norm() < 0.5 {
        let mut term = Complex64::new(1.0, 0.0);
        let mut sum = term;
        for k in 2..24 {
            term *= z / k as f64;
            sum += term;
        }
        sum
    } else {
        (z.exp() - 1.0) / z
    }
}

/// `(e^z − 1 − z)/z²`
fn phi2(z: Complex64) -> Complex64 {
    if z.norm() < 0.5 {
        let mut term = Complex64::new(0.5, 0.0);
        let mut sum = term;
        for k in 3..25 {
            term *= z / k as f64;
            sum += term;
        }
        sum
    } else {
        (z.exp() - 1.0 - z) / (z * z)
    }
}

/// `W`, `W′`, `W̄`, `Z`, `Z̄` at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleJet {
    pub w: f64,
    pub w1: f64,
    pub wbar: f64,
    pub z: f64,
    pub zbar: f64,
}

/// Partial-fraction representation of the `q`-scale function.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleFunctionRep {
    model: PhaseTypeLevyModel,
    q: f64,
    phi: f64,
    roots: Vec<Complex64>,
    coeffs: Vec<Complex64>,
    /// Index of `Φ(q)` in `roots`.
    lead: usize,
}

fn root_polynomial(model: &PhaseTypeLevyModel, q: f64) -> Vec<f64> {
    let quadratic = [-q, model.c(), 0.5 * model.sigma() * model.sigma()];
    if model.kappa() == 0.0 {
        return quadratic.to_vec();
    }
    let law = model.jumps();
    let t = law.generator();
    let det_t = charpoly(t);
    let rank_one = t + law.exit() * law.alpha().transpose();
    let det_shifted = charpoly(&rank_one);
    poly_axpy(&poly_mul(&quadratic, &det_t), -model.kappa(), &det_shifted)
}

fn polish(model: &PhaseTypeLevyModel, q: f64, mut theta: Complex64) -> Complex64 {
    for _ in 0..NEWTON_STEPS {
        let (Ok(value), Ok(slope)) = (
            model.laplace_exponent(theta),
            model.laplace_exponent_derivative(theta),
        ) else {
            return theta;
        };
        let step = (value - q) / slope;
        if !step.re.is_finite() || !step.im.is_finite() {
            return theta;
        }
        theta -= step;
        if step.norm() <= 4.0 * f64::EPSILON * theta.norm() {
            break;
        }
    }
    theta
}

fn relative_residual(model: &PhaseTypeLevyModel, q: f64, theta: Complex64) -> f64 {
    let (Ok(value), Ok(transform)) = (
        model.laplace_exponent(theta),
        model.jumps().laplace_transform(theta),
    ) else {
        return f64::INFINITY;
    };
    let s2 = model.sigma() * model.sigma();
    let scale = q
        + model.c().abs() * theta.norm()
        + 0.5 * s2 * theta.norm_sqr()
        + model.kappa() * (1.0 + transform.norm());
    (value - q).norm() / scale
}

/// Fail if two roots are closer than `GAP_TOL` times the largest root modulus.
fn check_simple(roots: &[Complex64]) -> Result<()> {
    let scale = roots.iter().fold(0.0_f64, |m, z| m.max(z.norm()));
    let mut gap = f64::INFINITY;
    for (i, a) in roots.iter().enumerate() {
        for b in &roots[i + 1..] {
            gap = gap.min((a - b).norm());
        }
    }
    if gap < GAP_TOL * scale {
        return Err(Error::MultipleRoots {
            gap,
            tolerance: GAP_TOL * scale,
        });
    }
    Ok(())
}

impl ScaleFunctionRep {
    pub fn new(model: &PhaseTypeLevyModel, q: f64) -> Result<Self> {
        let phi = model.phi(q)?;
        let is_real = |z: &Complex64| z.im.abs() <= 1e-9 * z.norm().max(1.0);

        let mut reals = Vec::new();
        let mut upper = Vec::new();
        let mut lower = 0usize;
        for raw in poly_roots(&root_polynomial(model, q)) {
            let start = if is_real(&raw) {
                Complex64::new(raw.re, 0.0)
            } else {
                raw
            };
            let theta = polish(model, q, start);
            if relative_residual(model, q, theta) > SPURIOUS_TOL {
                // a common factor of the two determinants: an eigenvalue of T, not a root
                continue;
            }
            if is_real(&theta) {
                reals.push(theta.re);
            } else if theta.im > 0.0 {
                upper.push(theta);
            } else {
                lower += 1;
            }
        }
        if lower != upper.len() {
            return Err(Error::Scale(format!(
                "complex roots are not in conjugate pairs ({} above, {lower} below the real axis)",
                upper.len()
            )));
        }
        let positive: Vec<f64> = reals.iter().copied().filter(|x| *x > 0.0).collect();
        if positive.len() != 1 || upper.iter().any(|z| z.re > 0.0) {
            return Err(Error::Scale(format!(
                "expected exactly one root with positive real part, found {} real and {} complex",
                positive.len(),
                upper.iter().filter(|z| z.re > 0.0).count()
            )));
        }
        if (positive[0] - phi).abs() > 1e-6 * phi.max(1.0) {
            return Err(Error::Scale(format!(
                "positive root {} disagrees with Φ(q) = {phi}",
                positive[0]
            )));
        }

        let mut roots: Vec<Complex64> = reals
            .iter()
            .map(|&x| Complex64::new(if x > 0.0 { phi } else { x }, 0.0))
            .collect();
        roots.extend(upper.iter().flat_map(|z| [*z, z.conj()]));

        check_simple(&roots)?;

        let mut coeffs = Vec::with_capacity(roots.len());
        for theta in &roots {
            let slope = model.laplace_exponent_derivative(*theta)?;
            let mut a = 1.0 / slope;
            if theta.im == 0.0 {
                a.im = 0.0;
            }
            coeffs.push(a);
        }
        // conjugate roots carry exactly conjugate coefficients
        for k in 0..upper.len() {
            let i = reals.len() + 2 * k;
            coeffs[i + 1] = coeffs[i].conj();
        }

        let lead = roots
            .iter()
            .position(|z| z.re == phi && z.im == 0.0)
            .expect("Φ(q) was inserted above");
        let rep = Self {
            model: model.clone(),
            q,
            phi,
            roots,
            coeffs,
            lead,
        };
        rep.check_partial_fractions()?;
        Ok(rep)
    }

    fn check_partial_fractions(&self) -> Result<()> {
        for step in [0.1, 0.5, 1.0, 3.0, 10.0] {
            let theta = self.phi + step * self.phi.max(1.0);
            let exact = 1.0 / (self.model.psi(theta) - self.q);
            let approx = self.laplace_transform(theta);
            let err = (approx - exact).abs() / exact.abs();
            if err.is_nan() || err > PARTIAL_FRACTION_TOL {
                return Err(Error::Scale(format!(
                    "partial-fraction check failed at θ = {theta}: relative error {err:e}"
                )));
            }
        }
        Ok(())
    }

    pub fn model(&self) -> &PhaseTypeLevyModel {
        &self.model
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    /// `Φ(q)`
    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn roots(&self) -> &[Complex64] {
        &self.roots
    }

    /// `A_i = 1/ψ′(θ_i)`, aligned with [`roots`](Self::roots).
    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// `ψ′(0+)`
    pub fn psi_prime_at_zero(&self) -> f64 {
        self.model.psi_prime_at_zero()
    }

    /// `Σ A_i/(θ − θ_i)`, the Laplace transform of `W` at real `θ > Φ(q)`.
    pub fn laplace_transform(&self, theta: f64) -> f64 {
        self.roots
            .iter()
            .zip(&self.coeffs)
            .map(|(r, a)| a / (theta - r))
            .sum::<Complex64>()
            .re
    }

    /// The complex sum `Σ A_i e^{θ_i x}` before taking real parts.
    pub fn exp_sum(&self, x: f64) -> Complex64 {
        self.roots
            .iter()
            .zip(&self.coeffs)
            .map(|(r, a)| a * (r * x).exp())
            .sum()
    }

    /// `W`, `W′`, `W̄`, `Z`, `Z̄` at `x`; at `x = 0` the side selects the limit.
    pub fn jet_side(&self, x: f64, side: Side) -> ScaleJet {
        self.jet_parts(x, side, false)
    }

    /// Coefficient `A` of `e^{Φ(q)x}` in `W`.
    pub fn lead_coeff(&self) -> f64 {
        self.coeffs[self.lead].re
    }

    /// The jet at `x ≥ 0` with every `e^{Φ(q)x}` term removed, so that for
    /// example `Z(x) = (qA/Φ(q))·e^{Φ(q)x} + z`. Stays bounded by a polynomial in `x`.
    pub fn jet_without_lead(&self, x: f64) -> ScaleJet {
        self.jet_parts(x, Side::Right, true)
    }

    fn jet_parts(&self, x: f64, side: Side, drop_lead: bool) -> ScaleJet {
        if x < 0.0 || (x == 0.0 && side == Side::Left) {
            return ScaleJet {
                w: 0.0,
                w1: 0.0,
                wbar: 0.0,
                z: 1.0,
                zbar: x,
            };
        }
        let mut w = Complex64::new(0.0, 0.0);
        let mut w1 = w;
        let mut wbar = w;
        let mut zbar_tail = w;
        for (i, (theta, a)) in self.roots.iter().zip(&self.coeffs).enumerate() {
            if drop_lead && i == self.lead {
                wbar -= a / theta;
                zbar_tail -= a * (1.0 + theta * x) / (theta * theta);
                continue;
            }
            let z = theta * x;
            let e = z.exp();
            w += a * e;
            w1 += a * theta * e;
            wbar += a * x * phi1(z);
            zbar_tail += a * x * x * phi2(z);
        }
        ScaleJet {
            w: w.re,
            w1: w1.re,
            wbar: wbar.re,
            z: 1.0 + self.q * wbar.re,
            zbar: x + self.q * zbar_tail.re,
        }
    }

    /// Right-continuous evaluation.
    pub fn jet(&self, x: f64) -> ScaleJet {
        self.jet_side(x, Side::Right)
    }

    pub fn w(&self, x: f64) -> f64 {
        self.jet(x).w
    }

    pub fn w_prime(&self, x: f64) -> f64 {
        self.jet(x).w1
    }

    pub fn wbar(&self, x: f64) -> f64 {
        self.jet(x).wbar
    }

    pub fn z(&self, x: f64) -> f64 {
        self.jet(x).z
    }

    pub fn zbar(&self, x: f64) -> f64 {
        self.jet(x).zbar
    }

    pub fn periodic(&self, r: f64) -> Result<PeriodicScaleRep> {
        PeriodicScaleRep::new(self.clone(), r)
    }
}

/// Scale functions plus their `r`-periodic extensions at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodicJet {
    pub base: ScaleJet,
    pub j: f64,
    pub j1: f64,
    pub j2: f64,
    /// `Zqr` and its first three derivatives.
    pub zqr: [f64; 4],
    /// `H` and its first three derivatives.
    pub h: [f64; 4],
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicScaleRep {
    base: ScaleFunctionRep,
    r: f64,
    phi_r: f64,
    /// `r A_i/(Φ_r − θ_i)`
    j_coeffs: Vec<Complex64>,
}

impl PeriodicScaleRep {
    pub fn new(base: ScaleFunctionRep, r: f64) -> Result<Self> {
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::InvalidProblem(format!("decision rate r = {r} must be > 0")));
        }
        let phi_r = base.model.phi(base.q + r)?;
        let j_coeffs = base
            .roots
            .iter()
            .zip(&base.coeffs)
            .map(|(theta, a)| r * a / (phi_r - theta))
            .collect();
        Ok(Self {
            base,
            r,
            phi_r,
            j_coeffs,
        })
    }

    pub fn base(&self) -> &ScaleFunctionRep {
        &self.base
    }

    pub fn q(&self) -> f64 {
        self.base.q
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    /// `Φ(q + r)`
    pub fn phi_r(&self) -> f64 {
        self.phi_r
    }

    pub fn j_coeffs(&self) -> &[Complex64] {
        &self.j_coeffs
    }

    pub fn jet_side(&self, x: f64, side: Side) -> PeriodicJet {
        self.jet_parts(x, side, false)
    }

    /// Coefficients `(L_Zqr, L_H)` of `e^{Φ(q)y}` in `Zqr(y)` and `H(y)` for `y ≥ 0`.
    pub fn lead(&self) -> (f64, f64) {
        let (q, r) = (self.base.q, self.r);
        let (a, phi) = (self.base.lead_coeff(), self.base.phi);
        let zqr = (r * q * a / phi + q * self.j_coeffs[self.base.lead].re) / (r + q);
        let h = r / (r + q) * q * a / (phi * phi);
        (zqr, h)
    }

    /// The jet at `y ≥ 0` with the `e^{Φ(q)y}` terms removed; see [`lead`](Self::lead).
    pub fn jet_without_lead(&self, y: f64) -> PeriodicJet {
        self.jet_parts(y, Side::Right, true)
    }

    fn jet_parts(&self, x: f64, side: Side, drop_lead: bool) -> PeriodicJet {
        let base = self.base.jet_parts(x, side, drop_lead);
        let (q, r, p) = (self.base.q, self.r, self.phi_r);
        let below = x < 0.0 || (x == 0.0 && side == Side::Left);
        let j = if below {
            (p * x).exp()
        } else {
            self.base
                .roots
                .iter()
                .zip(&self.j_coeffs)
                .enumerate()
                .filter(|(i, _)| !drop_lead || *i != self.base.lead)
                .map(|(_, (theta, c))| c * (theta * x).exp())
                .sum::<Complex64>()
                .re
        };
        let j1 = p * j - r * base.w;
        let j2 = p * j1 - r * base.w1;
        let mix = q / (r + q);
        let weight = r / (r + q);
        PeriodicJet {
            base,
            j,
            j1,
            j2,
            zqr: [
                weight * base.z + mix * j,
                mix * p * j,
                mix * p * j1,
                mix * p * j2,
            ],
            h: [
                weight * (base.zbar + self.base.psi_prime_at_zero() / q),
                weight * base.z,
                weight * q * base.w,
                weight * q * base.w1,
            ],
        }
    }

    pub fn jet(&self, x: f64) -> PeriodicJet {
        self.jet_side(x, Side::Right)
    }

    pub fn j(&self, x: f64) -> f64 {
        self.jet(x).j
    }

    pub fn zqr(&self, x: f64) -> f64 {
        self.jet(x).zqr[0]
    }

    pub fn zqr_prime(&self, x: f64) -> f64 {
        self.jet(x).zqr[1]
    }

    pub fn h(&self, x: f64) -> f64 {
        self.jet(x).h[0]
    }
}
