use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),

    /// The resolvent `(θI − T)⁻¹` does not exist at the requested point.
    #[error("laplace exponent undefined at θ = {re} + {im}i (eigenvalue of the sub-generator)")]
    SingularResolvent { re: f64, im: f64 },

    #[error("root bracketing failed for {what}: bracket [{lo}, {hi}] gave values ({f_lo}, {f_hi})")]
    Bracket {
        what: &'static str,
        lo: f64,
        hi: f64,
        f_lo: f64,
        f_hi: f64,
    },

    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error(
        "ψ(θ) = q has (nearly) repeated roots: minimum gap {gap:e} below {tolerance:e}; perturb q slightly"
    )]
    MultipleRoots { gap: f64, tolerance: f64 },

    #[error("scale function construction failed: {0}")]
    Scale(String),

    #[error("quadrature did not reach tolerance: estimated error {estimate:e} > {tolerance:e}")]
    Quadrature { estimate: f64, tolerance: f64 },

    #[error("classical barrier undefined: ψ'(0+) = {psi_prime} is not negative")]
    ClassicalUndefined { psi_prime: f64 },

    #[error("operation requires a {expected} problem")]
    WrongKind { expected: &'static str },

    #[error("HJB certification failed at {} grid point(s), first at x = {}", points.len(), points.first().copied().unwrap_or(f64::NAN))]
    Certification { points: Vec<f64> },
}
