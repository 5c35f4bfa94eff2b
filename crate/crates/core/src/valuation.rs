//! Expected NPVs of periodic barrier strategies and their classical counterparts.
//!
//! Every curve here has the shape `g(x) = K·Zqr(b − x) − H(b − x)` for some
//! constant `K`, except the classical ones, `g(x) = −Z̄(b − x) − ψ′(0+)/q`.
//! Derivatives in `x` follow from the chain rule with `y = b − x`, so the
//! right limit in `x` at the barrier is the left limit in `y` at zero.

use crate::error::{Error, Result};
use crate::model::PhaseTypeLevyModel;
use crate::rootfind::{grow_bracket, increasing_root};
use crate::scale::{PeriodicScaleRep, ScaleFunctionRep, Side};

/// Above `Φ(q)·b = SPLIT_ABOVE` barrier curves cancel their exponential parts analytically.
const SPLIT_ABOVE: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProblemKind {
    /// Dividends until ruin, with payoff `rho` at ruin.
    Dividends { rho: f64 },
    /// Dividends with capital injections costing `beta > 1` per unit.
    Bailout { beta: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProblemSpec {
    pub q: f64,
    pub r: f64,
    pub kind: ProblemKind,
}

impl ProblemSpec {
    pub fn dividends(q: f64, r: f64, rho: f64) -> Result<Self> {
        Self {
            q,
            r,
            kind: ProblemKind::Dividends { rho },
        }
        .validated()
    }

    pub fn bailout(q: f64, r: f64, beta: f64) -> Result<Self> {
        Self {
            q,
            r,
            kind: ProblemKind::Bailout { beta },
        }
        .validated()
    }

    pub fn validated(self) -> Result<Self> {
        if !(self.q > 0.0 && self.q.is_finite()) {
            return Err(Error::InvalidProblem(format!("q = {} must be > 0", self.q)));
        }
        if !(self.r > 0.0 && self.r.is_finite()) {
            return Err(Error::InvalidProblem(format!("r = {} must be > 0", self.r)));
        }
        match self.kind {
            ProblemKind::Dividends { rho } if !rho.is_finite() => {
                Err(Error::InvalidProblem(format!("rho = {rho} must be finite")))
            }
            ProblemKind::Bailout { beta } if !(beta > 1.0 && beta.is_finite()) => {
                Err(Error::InvalidProblem(format!("beta = {beta} must be > 1")))
            }
            _ => Ok(self),
        }
    }

    pub fn rho(&self) -> Result<f64> {
        match self.kind {
            ProblemKind::Dividends { rho } => Ok(rho),
            ProblemKind::Bailout { .. } => Err(Error::WrongKind {
                expected: "dividends",
            }),
        }
    }

    pub fn beta(&self) -> Result<f64> {
        match self.kind {
            ProblemKind::Bailout { beta } => Ok(beta),
            ProblemKind::Dividends { .. } => Err(Error::WrongKind { expected: "bailout" }),
        }
    }

    pub fn is_bailout(&self) -> bool {
        matches!(self.kind, ProblemKind::Bailout { .. })
    }
}

/// A value curve that can be differentiated to third order on either side of
/// its barrier and is affine-plus-decaying-exponential above it.
pub trait SmoothCurve: Sync {
    /// `[g, g′, g″, g‴]` at `x`, taking one-sided limits at kinks.
    fn jet(&self, x: f64, side: Side) -> [f64; 4];

    fn value(&self, x: f64) -> f64 {
        self.jet(x, Side::Right)[0]
    }

    fn derivative(&self, x: f64) -> f64 {
        self.jet(x, Side::Right)[1]
    }

    /// `(slope, intercept)` of the affine function approached as `x → ∞`.
    fn asymptote(&self) -> (f64, f64);

    /// Level above which the curve is affine up to terms decaying like `e^{−Φ(q+r)(x − b)}`.
    fn barrier(&self) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum CurveForm {
    /// `K·Zqr(b − x) − H(b − x)`. With `lead = Some(d)` the `e^{Φ(q)(b − x)}`
    /// parts of the two terms are combined into `d·e^{−Φ(q)x}` for `x ≤ b`.
    Periodic { k: f64, lead: Option<f64> },
    /// Liquidate everything at the first decision time.
    TakeAndRun { rho: f64 },
    /// `−Z̄(b − x) − ψ′(0+)/q`
    Classical,
}

/// A value curve attached to a barrier `b`.
#[derive(Debug, Clone, Copy)]
pub struct BarrierCurve<'a> {
    scale: &'a PeriodicScaleRep,
    barrier: f64,
    form: CurveForm,
}

impl BarrierCurve<'_> {
    /// The constant `K` in `K·Zqr(b − x) − H(b − x)`; `None` for classical curves.
    pub fn multiplier(&self) -> Option<f64> {
        match self.form {
            CurveForm::Periodic { k, .. } => Some(k),
            CurveForm::TakeAndRun { rho } => Some(self.scale.h(0.0) + rho),
            CurveForm::Classical => None,
        }
    }

    pub fn scale(&self) -> &PeriodicScaleRep {
        self.scale
    }

    /// Left and right jets at the barrier.
    pub fn one_sided_at_barrier(&self) -> ([f64; 4], [f64; 4]) {
        (
            self.jet(self.barrier, Side::Left),
            self.jet(self.barrier, Side::Right),
        )
    }

    pub fn values(&self, xs: &[f64]) -> Vec<f64> {
        xs.iter().map(|&x| self.value(x)).collect()
    }
}

impl SmoothCurve for BarrierCurve<'_> {
    fn jet(&self, x: f64, side: Side) -> [f64; 4] {
        let y = self.barrier - x;
        let y_side = match side {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        };
        let q = self.scale.q();
        match self.form {
            CurveForm::Periodic { k, lead } => {
                let split = lead.filter(|_| y > 0.0 || (y == 0.0 && y_side == Side::Right));
                let phi = self.scale.base().phi();
                let (jet, term) = match split {
                    Some(d) => (self.scale.jet_without_lead(y), d * (-phi * x).exp()),
                    None => (self.scale.jet_side(y, y_side), 0.0),
                };
                // derivatives in y, so odd orders change sign
                std::array::from_fn(|n| {
                    let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
                    sign * (term * phi.powi(n as i32) + k * jet.zqr[n] - jet.h[n])
                })
            }
            CurveForm::TakeAndRun { rho } => {
                let (r, p) = (self.scale.r(), self.scale.phi_r());
                let psi0 = self.scale.base().psi_prime_at_zero();
                let weight = r / (r + q);
                let c = psi0 / (r + q) + rho * q / r;
                let e = c * (-p * x).exp();
                [
                    weight * (x - (psi0 / (r + q) - rho) + e),
                    weight * (1.0 - p * e),
                    weight * p * p * e,
                    -weight * p * p * p * e,
                ]
            }
            CurveForm::Classical => {
                let base = self.scale.base().jet_side(y, y_side);
                let psi0 = self.scale.base().psi_prime_at_zero();
                [-base.zbar - psi0 / q, base.z, -q * base.w, q * base.w1]
            }
        }
    }

    fn asymptote(&self) -> (f64, f64) {
        let (q, r) = (self.scale.q(), self.scale.r());
        let psi0 = self.scale.base().psi_prime_at_zero();
        let weight = r / (r + q);
        match self.form {
            CurveForm::Periodic { k, .. } => (weight, weight * (k - self.barrier - psi0 / q)),
            CurveForm::TakeAndRun { rho } => (weight, weight * (rho - psi0 / (r + q))),
            CurveForm::Classical => (1.0, -self.barrier - psi0 / q),
        }
    }

    fn barrier(&self) -> f64 {
        self.barrier
    }
}

/// A model, a problem and the scale functions they need.
#[derive(Debug, Clone)]
pub struct PeriodicProblem {
    spec: ProblemSpec,
    scale: PeriodicScaleRep,
}

impl PeriodicProblem {
    pub fn new(model: &PhaseTypeLevyModel, spec: ProblemSpec) -> Result<Self> {
        let spec = spec.validated()?;
        let scale = ScaleFunctionRep::new(model, spec.q)?.periodic(spec.r)?;
        Ok(Self { spec, scale })
    }

    /// Same model and `q`, different decision rate or problem parameters.
    pub fn with_spec(&self, spec: ProblemSpec) -> Result<Self> {
        let spec = spec.validated()?;
        if spec.q != self.spec.q {
            return Self::new(self.model(), spec);
        }
        let scale = if spec.r == self.spec.r {
            self.scale.clone()
        } else {
            self.scale.base().periodic(spec.r)?
        };
        Ok(Self { spec, scale })
    }

    pub fn spec(&self) -> &ProblemSpec {
        &self.spec
    }

    pub fn model(&self) -> &PhaseTypeLevyModel {
        self.scale.base().model()
    }

    pub fn scale(&self) -> &PeriodicScaleRep {
        &self.scale
    }

    pub fn psi_prime_at_zero(&self) -> f64 {
        self.scale.base().psi_prime_at_zero()
    }

    fn check_barrier(b: f64) -> Result<()> {
        if b >= 0.0 && b.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidProblem(format!("barrier b = {b} must be ≥ 0")))
        }
    }

    fn periodic(&self, barrier: f64, k: f64) -> BarrierCurve<'_> {
        BarrierCurve {
            scale: &self.scale,
            barrier,
            form: CurveForm::Periodic { k, lead: None },
        }
    }

    fn needs_split(&self, b: f64) -> bool {
        self.scale.base().phi() * b > SPLIT_ABOVE
    }

    /// `K·Zqr(b − x) − H(b − x)` with `K = p(b)/d(b)`, where `p` and `d` are
    /// given through their `e^{Φ(q)b}` coefficient and remainder at `b`, and the
    /// coefficients satisfy `p_lead/d_lead = L_H/L_Zqr`. The exponentially
    /// large parts cancel analytically, so this stays accurate for large `b`.
    fn ratio_curve(&self, b: f64, p: (f64, f64), d: (f64, f64)) -> BarrierCurve<'_> {
        let (lz, lh) = self.scale.lead();
        let s = (-self.scale.base().phi() * b).exp();
        let den = d.0 + d.1 * s;
        BarrierCurve {
            scale: &self.scale,
            barrier: b,
            form: CurveForm::Periodic {
                k: (p.0 + p.1 * s) / den,
                lead: Some((p.1 * lz - lh * d.1) / den),
            },
        }
    }

    /// Expected NPV `v_b` of the periodic barrier strategy at level `b`.
    pub fn v_b(&self, b: f64) -> Result<BarrierCurve<'_>> {
        let rho = self.spec.rho()?;
        Self::check_barrier(b)?;
        if self.needs_split(b) {
            let (lz, lh) = self.scale.lead();
            let rest = self.scale.jet_without_lead(b);
            return Ok(self.ratio_curve(b, (lh, rest.h[0] + rho), (lz, rest.zqr[0])));
        }
        let jet = self.scale.jet(b);
        Ok(self.periodic(b, (jet.h[0] + rho) / jet.zqr[0]))
    }

    /// Optimal value for the dividend problem given the solved barrier.
    pub fn v_star(&self, b_star: f64) -> Result<BarrierCurve<'_>> {
        let rho = self.spec.rho()?;
        Self::check_barrier(b_star)?;
        if b_star == 0.0 {
            return Ok(BarrierCurve {
                scale: &self.scale,
                barrier: 0.0,
                form: CurveForm::TakeAndRun { rho },
            });
        }
        Ok(self.periodic(b_star, -1.0 / self.scale.phi_r()))
    }

    /// Expected NPV `u_b` of the periodic barrier strategy with bail-out.
    pub fn u_b(&self, b: f64) -> Result<BarrierCurve<'_>> {
        let beta = self.spec.beta()?;
        Self::check_barrier(b)?;
        Ok(self.injection_priced(b, beta))
    }

    /// `u_b` with injections charged at `beta`; `beta = 0` gives the dividends alone.
    fn injection_priced(&self, b: f64, beta: f64) -> BarrierCurve<'_> {
        if self.needs_split(b) {
            let (lz, lh) = self.scale.lead();
            let phi = self.scale.base().phi();
            let rest = self.scale.jet_without_lead(b);
            return self.ratio_curve(b, (phi * lh, rest.h[1] - beta), (phi * lz, rest.zqr[1]));
        }
        let jet = self.scale.jet(b);
        self.periodic(b, (jet.h[1] - beta) / jet.zqr[1])
    }

    /// Optimal value for the bail-out problem given the solved barrier.
    pub fn u_dagger(&self, b_dagger: f64) -> Result<BarrierCurve<'_>> {
        self.spec.beta()?;
        Self::check_barrier(b_dagger)?;
        Ok(self.periodic(b_dagger, -1.0 / self.scale.phi_r()))
    }

    /// Barrier for continuous (non-periodic) reflection: the solution of
    /// `Z̄(b) = −ψ′(0+)/q` for dividends or `Z(b) = β` for bail-out.
    pub fn classical_barrier(&self) -> Result<f64> {
        let base = self.scale.base();
        let q = self.spec.q;
        let start = 1.0 / base.phi();
        let limit = 1e3 / base.phi();
        match self.spec.kind {
            ProblemKind::Dividends { .. } => {
                let psi0 = base.psi_prime_at_zero();
                if psi0 >= 0.0 {
                    return Err(Error::ClassicalUndefined { psi_prime: psi0 });
                }
                let target = -psi0 / q;
                let hi = grow_bracket("classical dividend barrier", |b| base.zbar(b) - target, 0.0, start, limit)?;
                let root = increasing_root(
                    "classical dividend barrier",
                    |b| {
                        let jet = base.jet(b);
                        (jet.zbar - target, jet.z)
                    },
                    0.0,
                    hi,
                    None,
                    1e-13 * target.max(1.0),
                )?;
                Ok(root.x)
            }
            ProblemKind::Bailout { beta } => {
                let hi = grow_bracket("classical bail-out barrier", |b| base.z(b) - beta, 0.0, start, limit)?;
                let root = increasing_root(
                    "classical bail-out barrier",
                    |b| {
                        let jet = base.jet(b);
                        (jet.z - beta, q * jet.w)
                    },
                    0.0,
                    hi,
                    None,
                    1e-13 * beta,
                )?;
                Ok(root.x)
            }
        }
    }

    /// The classical barrier and its value curve `−Z̄(b̃ − x) − ψ′(0+)/q`.
    pub fn classical_limit(&self) -> Result<(f64, BarrierCurve<'_>)> {
        let b = self.classical_barrier()?;
        Ok((
            b,
            BarrierCurve {
                scale: &self.scale,
                barrier: b,
                form: CurveForm::Classical,
            },
        ))
    }

    /// Optimal-value curve for the problem kind at the given solved barrier.
    pub fn optimal_curve(&self, barrier: f64) -> Result<BarrierCurve<'_>> {
        match self.spec.kind {
            ProblemKind::Dividends { .. } => self.v_star(barrier),
            ProblemKind::Bailout { .. } => self.u_dagger(barrier),
        }
    }

    /// `v_b` or `u_b` depending on the problem kind.
    pub fn barrier_curve(&self, b: f64) -> Result<BarrierCurve<'_>> {
        match self.spec.kind {
            ProblemKind::Dividends { .. } => self.v_b(b),
            ProblemKind::Bailout { .. } => self.u_b(b),
        }
    }

    /// Expected discounted injected capital under the bail-out barrier strategy
    /// at `b`, `Zqr(b − x)/Zqr′(b)`.
    pub fn expected_injections(&self, b: f64, x: f64) -> f64 {
        if !self.needs_split(b) {
            return self.scale.zqr(b - x) / self.scale.zqr_prime(b);
        }
        // numerator and denominator scaled by e^{−Φ(q)b}
        let (lz, _) = self.scale.lead();
        let phi = self.scale.base().phi();
        let s = (-phi * b).exp();
        let y = b - x;
        let num = if y >= 0.0 {
            lz * (-phi * x).exp() + self.scale.jet_without_lead(y).zqr[0] * s
        } else {
            self.scale.zqr(y) * s
        };
        num / (phi * lz + self.scale.jet_without_lead(b).zqr[1] * s)
    }

    /// Expected discounted dividends under the bail-out barrier strategy at `b`.
    pub fn expected_bailout_dividends(&self, b: f64, x: f64) -> f64 {
        self.injection_priced(b, 0.0).value(x)
    }
}
