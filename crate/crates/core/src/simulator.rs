//! Event-driven Monte Carlo for periodic barrier strategies.
//!
//! Event times are the superposition of jump arrivals (rate `κ`) and decision
//! times (rate `r`). Between events the surplus is a Brownian motion with drift
//! `−c`, simulated exactly at the next event time. Ruin between events is
//! detected through the Brownian-bridge crossing probability; for bail-out the
//! running minimum is resolved by recursive bridge refinement near the floor.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Open01, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::PhaseTypeLevyModel;
use crate::valuation::{ProblemKind, ProblemSpec};

pub const RNG_NAME: &str = "ChaCha8 (rand_chacha), stream = path or antithetic-pair index";

/// Bridge pieces whose probability of reaching the floor is below this are skipped.
const PRUNE_PROBABILITY: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McConfig {
    pub paths: usize,
    pub seed: u64,
    /// Paths stop at `T_max = ln(1/horizon_eps)/q`.
    pub horizon_eps: f64,
    /// Longest bridge piece over which an injection is discounted at a single time.
    pub dt_max: f64,
    pub antithetic: bool,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            paths: 100_000,
            seed: 0,
            horizon_eps: 1e-6,
            dt_max: 0.01,
            antithetic: false,
        }
    }
}

impl McConfig {
    pub fn validated(self) -> Result<Self> {
        if self.paths == 0 {
            return Err(Error::InvalidConfig("paths must be ≥ 1".into()));
        }
        if !(self.horizon_eps > 0.0 && self.horizon_eps < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "horizon_eps = {} must lie in (0, 1)",
                self.horizon_eps
            )));
        }
        if !(self.dt_max > 0.0 && self.dt_max.is_finite()) {
            return Err(Error::InvalidConfig(format!("dt_max = {} must be > 0", self.dt_max)));
        }
        Ok(self)
    }

    pub fn horizon(&self, q: f64) -> f64 {
        (1.0 / self.horizon_eps).ln() / q
    }
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Moments {
    pub mean: f64,
    pub stderr: f64,
}

impl Moments {
    fn from_samples(samples: impl Iterator<Item = f64> + Clone) -> Self {
        let n = samples.clone().count() as f64;
        let mean = samples.clone().sum::<f64>() / n;
        if n < 2.0 {
            return Self { mean, stderr: 0.0 };
        }
        let var = samples.map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0);
        Self {
            mean,
            stderr: (var / n).sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct McEstimate {
    /// NPV estimate: dividends plus terminal payoff, or dividends minus `β`·injections.
    pub mean: f64,
    pub stderr: f64,
    pub paths_used: usize,
    pub dividends: Moments,
    /// Discounted injected capital (bail-out only).
    pub injections: Option<Moments>,
    /// Fraction of paths ruined before the horizon (dividend problem only).
    pub ruin_fraction: Option<f64>,
    pub horizon: f64,
    /// Bound on the contribution lost by stopping at the horizon.
    pub horizon_bias_bound: f64,
    /// Bound on the bias from discounting injections at piece ends.
    pub discount_bias_bound: f64,
    /// Decision times observed and total simulated time, over all paths.
    pub decisions: u64,
    pub exposure: f64,
    pub rng: &'static str,
}

impl McEstimate {
    /// Total bias bound to add to statistical tolerances.
    pub fn bias_bound(&self) -> f64 {
        self.horizon_bias_bound + self.discount_bias_bound
    }
}

/// Uniform, normal and exponential draws, optionally mirrored for antithetic pairs.
pub struct PathRng {
    rng: ChaCha8Rng,
    mirrored: bool,
}

impl PathRng {
    pub fn new(seed: u64, stream: u64, mirrored: bool) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { rng, mirrored }
    }

    /// Uniform on `(0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        let u: f64 = self.rng.sample(Open01);
        if self.mirrored {
            1.0 - u
        } else {
            u
        }
    }

    pub fn normal(&mut self) -> f64 {
        let z: f64 = self.rng.sample(StandardNormal);
        if self.mirrored {
            -z
        } else {
            z
        }
    }

    pub fn exponential(&mut self, rate: f64) -> f64 {
        -self.uniform().ln() / rate
    }
}

/// `P(min < 0)` for a Brownian bridge from `a` to `b` over `dt`.
pub fn bridge_crossing_probability(a: f64, b: f64, sigma: f64, dt: f64) -> f64 {
    if a <= 0.0 || b <= 0.0 {
        1.0
    } else {
        (-2.0 * a * b / (sigma * sigma * dt)).exp()
    }
}

/// Whether a Brownian bridge from `a` to `b` over `dt` dips below zero.
pub fn sample_bridge_min(a: f64, b: f64, sigma: f64, dt: f64, rng: &mut PathRng) -> bool {
    rng.uniform() < bridge_crossing_probability(a, b, sigma, dt)
}

/// Minimum of a Brownian bridge from `x0` to `x1` over `dt`, by inverting
/// `P(min ≤ m) = exp(−2(x0 − m)(x1 − m)/(σ²dt))` at the uniform `u`.
pub fn bridge_min_from_uniform(x0: f64, x1: f64, sigma: f64, dt: f64, u: f64) -> f64 {
    let spread = (x1 - x0) * (x1 - x0) - 2.0 * sigma * sigma * dt * u.ln();
    0.5 * (x0 + x1 - spread.sqrt())
}

/// Endpoint and running minimum of `x0 + drift·s + σB(s)` over `[0, dt]`.
pub fn sample_min_and_endpoint(
    x0: f64,
    drift: f64,
    sigma: f64,
    dt: f64,
    rng: &mut PathRng,
) -> (f64, f64) {
    let x1 = x0 + drift * dt + sigma * dt.sqrt() * rng.normal();
    let u = rng.uniform();
    (x1, bridge_min_from_uniform(x0, x1, sigma, dt, u).min(x0.min(x1)))
}

/// Inverse Gaussian `IG(mean, shape)` by the transformation-with-rejection method.
fn inverse_gaussian(mean: f64, shape: f64, rng: &mut PathRng) -> f64 {
    let n = rng.normal();
    if !mean.is_finite() {
        // infinite mean: the Lévy limit shape/N²
        return shape / (n * n);
    }
    let w = mean * n * n / (2.0 * shape);
    let x = mean / (1.0 + w + (w * (w + 2.0)).sqrt());
    if rng.uniform() <= mean / (mean + x) {
        x
    } else {
        mean * mean / x
    }
}

/// Hitting time of zero for a Brownian bridge from `a > 0` to `y` over `dt`,
/// conditional on hitting. With `u = s/(dt − s)` the time `s` satisfies
/// `u ~ IG(a/|y|, a²/(σ²dt))`.
pub fn sample_bridge_hitting_time(a: f64, y: f64, sigma: f64, dt: f64, rng: &mut PathRng) -> f64 {
    if a <= 0.0 {
        return 0.0;
    }
    let mean = if y == 0.0 { f64::INFINITY } else { a / y.abs() };
    let u = inverse_gaussian(mean, a * a / (sigma * sigma * dt), rng);
    dt * u / (1.0 + u)
}

/// Precomputed CTMC tables for sampling phase-type jumps.
struct JumpSampler {
    initial: Vec<f64>,
    /// Per phase: holding rate and cumulative probabilities over (phases…, absorb).
    rates: Vec<f64>,
    moves: Vec<Vec<f64>>,
}

impl JumpSampler {
    fn new(model: &PhaseTypeLevyModel) -> Self {
        let law = model.jumps();
        let t = law.generator();
        let m = law.phases();
        let cumulative = |probs: Vec<f64>| {
            let mut acc = 0.0;
            probs
                .into_iter()
                .map(|p| {
                    acc += p;
                    acc
                })
                .collect::<Vec<_>>()
        };
        let initial = cumulative(law.alpha().iter().copied().collect());
        let rates: Vec<f64> = (0..m).map(|i| -t[(i, i)]).collect();
        let moves = (0..m)
            .map(|i| {
                let mut probs: Vec<f64> = (0..m)
                    .map(|j| if i == j { 0.0 } else { t[(i, j)] / rates[i] })
                    .collect();
                probs.push(law.exit()[i] / rates[i]);
                cumulative(probs)
            })
            .collect();
        Self {
            initial,
            rates,
            moves,
        }
    }

    fn pick(cumulative: &[f64], u: f64) -> usize {
        let total = *cumulative.last().expect("nonempty");
        cumulative
            .iter()
            .position(|&c| u * total < c)
            .unwrap_or(cumulative.len() - 1)
    }

    fn sample(&self, rng: &mut PathRng) -> f64 {
        let m = self.rates.len();
        let mut phase = Self::pick(&self.initial, rng.uniform());
        let mut size = 0.0;
        loop {
            size += rng.exponential(self.rates[phase]);
            let next = Self::pick(&self.moves[phase], rng.uniform());
            if next == m {
                return size;
            }
            phase = next;
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct PathOutcome {
    dividends: f64,
    terminal: f64,
    injections: f64,
    ruined: bool,
    final_level: f64,
    decisions: u64,
    exposure: f64,
}

struct Simulation<'a> {
    model: &'a PhaseTypeLevyModel,
    jumps: JumpSampler,
    q: f64,
    r: f64,
    barrier: f64,
    horizon: f64,
    dt_max: f64,
}

impl Simulation<'_> {
    fn event_rate(&self) -> f64 {
        self.model.kappa() + self.r
    }

    /// Jump or decision at time `t` with pre-event level `level`.
    fn event(&self, t: f64, level: &mut f64, out: &mut PathOutcome, rng: &mut PathRng) {
        if rng.uniform() * self.event_rate() < self.model.kappa() {
            *level += self.jumps.sample(rng);
        } else {
            out.decisions += 1;
            if *level > self.barrier {
                let paid = *level - self.barrier;
                debug_assert!(paid >= 0.0 && paid <= *level);
                out.dividends += paid * (-self.q * t).exp();
                *level = self.barrier;
            }
        }
    }

    fn dividends_path(&self, x: f64, rho: f64, rng: &mut PathRng) -> PathOutcome {
        let (c, sigma) = (self.model.c(), self.model.sigma());
        let mut out = PathOutcome::default();
        let mut level = x;
        let mut t = 0.0;
        if level <= 0.0 {
            out.ruined = true;
            out.terminal = rho;
            return out;
        }
        loop {
            let wait = rng.exponential(self.event_rate());
            let at_horizon = wait >= self.horizon - t;
            let dt = if at_horizon { self.horizon - t } else { wait };
            let (end, hit) = if sigma > 0.0 {
                let end = level - c * dt + sigma * dt.sqrt() * rng.normal();
                let crossed = end <= 0.0 || sample_bridge_min(level, end, sigma, dt, rng);
                let hit = if !crossed {
                    None
                } else if rho != 0.0 {
                    Some(sample_bridge_hitting_time(level, end, sigma, dt, rng))
                } else {
                    Some(dt)
                };
                (end, hit)
            } else {
                let end = level - c * dt;
                (end, (end < 0.0).then(|| level / c))
            };
            if let Some(s) = hit {
                out.ruined = true;
                out.terminal = rho * (-self.q * (t + s)).exp();
                out.exposure = t + s;
                return out;
            }
            t += dt;
            level = end;
            if at_horizon {
                out.final_level = level;
                out.exposure = t;
                return out;
            }
            self.event(t, &mut level, &mut out, rng);
        }
    }

    /// Free path over `[0, dt]` from `level`, reflected at zero. Returns the
    /// end level and adds discounted injections to `out`.
    fn reflected_interval(&self, t: f64, level: f64, dt: f64, out: &mut PathOutcome, rng: &mut PathRng) -> f64 {
        let (c, sigma) = (self.model.c(), self.model.sigma());
        if sigma == 0.0 {
            let end = level - c * dt;
            if end >= 0.0 {
                return end;
            }
            let start = level / c;
            out.injections += c * (-self.q * t).exp() * ((-self.q * start).exp() - (-self.q * dt).exp()) / self.q;
            return 0.0;
        }
        let end = level - c * dt + sigma * dt.sqrt() * rng.normal();
        // floor in free-path coordinates: minus the capital injected so far
        let mut floor: f64 = 0.0;
        let mut stack = vec![(0.0, dt, level, end)];
        while let Some((t0, t1, x0, x1)) = stack.pop() {
            let h = t1 - t0;
            if bridge_crossing_probability(x0 - floor, x1 - floor, sigma, h) < PRUNE_PROBABILITY {
                continue;
            }
            if h <= self.dt_max {
                let m = bridge_min_from_uniform(x0, x1, sigma, h, rng.uniform()).min(x0.min(x1));
                if m < floor {
                    out.injections += (floor - m) * (-self.q * (t + t1)).exp();
                    floor = m;
                }
            } else {
                let tm = 0.5 * (t0 + t1);
                let xm = 0.5 * (x0 + x1) + 0.5 * sigma * h.sqrt() * rng.normal();
                stack.push((tm, t1, xm, x1));
                stack.push((t0, tm, x0, xm));
            }
        }
        end - floor
    }

    fn bailout_path(&self, x: f64, rng: &mut PathRng) -> PathOutcome {
        let mut out = PathOutcome::default();
        let mut level = x.max(0.0);
        let mut t = 0.0;
        loop {
            let wait = rng.exponential(self.event_rate());
            let at_horizon = wait >= self.horizon - t;
            let dt = if at_horizon { self.horizon - t } else { wait };
            level = self.reflected_interval(t, level, dt, &mut out, rng);
            t += dt;
            if at_horizon {
                out.final_level = level;
                out.exposure = t;
                return out;
            }
            self.event(t, &mut level, &mut out, rng);
        }
    }
}

fn run(
    model: &PhaseTypeLevyModel,
    spec: &ProblemSpec,
    b: f64,
    x: f64,
    cfg: &McConfig,
) -> Result<McEstimate> {
    let spec = spec.validated()?;
    let cfg = cfg.validated()?;
    if !(b >= 0.0 && b.is_finite()) || !(x >= 0.0 && x.is_finite()) {
        return Err(Error::InvalidProblem(format!("need b ≥ 0 and x ≥ 0, got b = {b}, x = {x}")));
    }
    let sim = Simulation {
        model,
        jumps: JumpSampler::new(model),
        q: spec.q,
        r: spec.r,
        barrier: b,
        horizon: cfg.horizon(spec.q),
        dt_max: cfg.dt_max,
    };
    let one = |rng: &mut PathRng| match spec.kind {
        ProblemKind::Dividends { rho } => sim.dividends_path(x, rho, rng),
        ProblemKind::Bailout { .. } => sim.bailout_path(x, rng),
    };

    // antithetic pairs share a stream; their average is one sample
    let groups = if cfg.antithetic { cfg.paths.div_ceil(2) } else { cfg.paths };
    let outcomes: Vec<Vec<PathOutcome>> = (0..groups)
        .into_par_iter()
        .map(|g| {
            if cfg.antithetic {
                let a = one(&mut PathRng::new(cfg.seed, g as u64, false));
                let b = one(&mut PathRng::new(cfg.seed, g as u64, true));
                vec![a, b]
            } else {
                vec![one(&mut PathRng::new(cfg.seed, g as u64, false))]
            }
        })
        .collect();

    let beta = spec.beta().unwrap_or(0.0);
    let average = |f: &dyn Fn(&PathOutcome) -> f64| {
        let samples: Vec<f64> = outcomes
            .iter()
            .map(|g| g.iter().map(f).sum::<f64>() / g.len() as f64)
            .collect();
        Moments::from_samples(samples.into_iter())
    };
    let total = average(&|o| o.dividends + o.terminal - beta * o.injections);
    let dividends = average(&|o| o.dividends);
    let all = outcomes.iter().flatten();
    let paths_used = all.clone().count();
    let decisions = all.clone().map(|o| o.decisions).sum();
    let exposure = all.clone().map(|o| o.exposure).sum();
    let ruined = all.clone().filter(|o| o.ruined).count();
    let mean_final = all.clone().map(|o| o.final_level).sum::<f64>() / paths_used as f64;

    let q = spec.q;
    let sigma = model.sigma();
    let upward = mean_final + sigma / (2.0 * q).sqrt() + model.kappa() * model.mean_jump() / q;
    let (injections, horizon_bias_bound, discount_bias_bound, ruin_fraction) = match spec.kind {
        ProblemKind::Dividends { rho } => (
            None,
            cfg.horizon_eps * (rho.abs() + upward),
            0.0,
            Some(ruined as f64 / paths_used as f64),
        ),
        ProblemKind::Bailout { beta } => {
            let injections = average(&|o| o.injections);
            let downward = model.c().abs() / q + sigma / (2.0 * q).sqrt();
            (
                Some(injections),
                cfg.horizon_eps * (upward + beta * downward),
                beta * q * cfg.dt_max * injections.mean,
                None,
            )
        }
    };
    Ok(McEstimate {
        mean: total.mean,
        stderr: total.stderr,
        paths_used,
        dividends,
        injections,
        ruin_fraction,
        horizon: sim.horizon,
        horizon_bias_bound,
        discount_bias_bound,
        decisions,
        exposure,
        rng: RNG_NAME,
    })
}

/// NPV of the periodic barrier strategy at `b` for the dividend problem, started at `x`.
pub fn simulate_dividends(
    model: &PhaseTypeLevyModel,
    spec: &ProblemSpec,
    b: f64,
    x: f64,
    cfg: &McConfig,
) -> Result<McEstimate> {
    spec.rho()?;
    run(model, spec, b, x, cfg)
}

/// NPV of the periodic barrier strategy at `b` with bail-out, started at `x`.
pub fn simulate_bailout(
    model: &PhaseTypeLevyModel,
    spec: &ProblemSpec,
    b: f64,
    x: f64,
    cfg: &McConfig,
) -> Result<McEstimate> {
    spec.beta()?;
    run(model, spec, b, x, cfg)
}

/// Dispatch on the problem kind.
pub fn simulate(
    model: &PhaseTypeLevyModel,
    spec: &ProblemSpec,
    b: f64,
    x: f64,
    cfg: &McConfig,
) -> Result<McEstimate> {
    run(model, spec, b, x, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::PhaseTypeLaw;

    #[test]
    fn crossing_probability_values() {
        assert_eq!(bridge_crossing_probability(0.0, 1.0, 1.0, 1.0), 1.0);
        let (sigma, dt): (f64, f64) = (0.3, 0.5);
        let a = sigma * dt.sqrt();
        assert!((bridge_crossing_probability(a, a, sigma, dt) - (-2.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn bridge_min_inverts_its_law() {
        let (x0, x1, sigma, dt) = (0.4, 0.7, 0.5, 0.8);
        for u in [0.01, 0.3, 0.9] {
            let m = bridge_min_from_uniform(x0, x1, sigma, dt, u);
            assert!(m <= x0.min(x1));
            let cdf = (-2.0 * (x0 - m) * (x1 - m) / (sigma * sigma * dt)).exp();
            assert!((cdf - u).abs() < 1e-12);
        }
    }

    #[test]
    fn antithetic_draws_mirror() {
        let mut a = PathRng::new(7, 3, false);
        let mut b = PathRng::new(7, 3, true);
        for _ in 0..10 {
            assert_eq!(a.uniform(), 1.0 - b.uniform());
            assert_eq!(a.normal(), -b.normal());
        }
    }

    #[test]
    fn streams_differ() {
        let mut a = PathRng::new(7, 0, false);
        let mut b = PathRng::new(7, 1, false);
        assert_ne!(a.uniform(), b.uniform());
    }

    #[test]
    fn phase_type_sampler_mean() {
        let model = PhaseTypeLevyModel::new(0.5, 0.2, 2.0, PhaseTypeLaw::folded_normal()).unwrap();
        let sampler = JumpSampler::new(&model);
        let mut rng = PathRng::new(1, 0, false);
        let n = 200_000;
        let samples: Vec<f64> = (0..n).map(|_| sampler.sample(&mut rng)).collect();
        let m = Moments::from_samples(samples.iter().copied());
        assert!((m.mean - model.mean_jump()).abs() < 4.0 * m.stderr);
    }

    #[test]
    fn inverse_gaussian_mean() {
        let mut rng = PathRng::new(2, 0, false);
        let (mean, shape) = (1.5, 2.0);
        let samples: Vec<f64> = (0..200_000).map(|_| inverse_gaussian(mean, shape, &mut rng)).collect();
        let m = Moments::from_samples(samples.iter().copied());
        assert!((m.mean - mean).abs() < 4.0 * m.stderr);
    }

    #[test]
    fn bridge_hitting_time_mean_matches_density() {
        use crate::quadrature::Integrator;
        let (a, sigma, dt) = (0.3, 0.4, 1.0);
        for y in [-0.2, 0.25] {
            // a bridge ending at y > 0 that touches zero is a reflected bridge ending at −y
            let k: f64 = f64::abs(y);
            let density = |s: f64| {
                if s <= 0.0 || s >= dt {
                    return 0.0;
                }
                let v = sigma * sigma;
                s.powf(-1.5) * (-a * a / (2.0 * v * s)).exp() * (dt - s).powf(-0.5)
                    * (-k * k / (2.0 * v * (dt - s))).exp()
            };
            let quad = Integrator::default();
            let mass = quad.integrate(density, 0.0, dt).unwrap().value;
            let first = quad.integrate(|s| s * density(s), 0.0, dt).unwrap().value;
            let mut rng = PathRng::new(11, 0, false);
            let samples: Vec<f64> = (0..200_000)
                .map(|_| sample_bridge_hitting_time(a, y, sigma, dt, &mut rng))
                .collect();
            let m = Moments::from_samples(samples.iter().copied());
            assert!((m.mean - first / mass).abs() < 4.0 * m.stderr, "{} vs {}", m.mean, first / mass);
        }
    }

    #[test]
    fn config_validation() {
        assert!(McConfig { paths: 0, ..McConfig::default() }.validated().is_err());
        assert!(McConfig { horizon_eps: 1.0, ..McConfig::default() }.validated().is_err());
        assert!(McConfig { dt_max: 0.0, ..McConfig::default() }.validated().is_err());
        let cfg = McConfig::default();
        assert!((cfg.horizon(0.05) - (1e6f64).ln() / 0.05).abs() < 1e-12);
    }
}
