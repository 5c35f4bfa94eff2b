mod common;

use common::*;
use periodic_dividends::verification::{
    default_grid, dominance_scan, generator_above_barrier, hjb_check, max_term, max_term_brute_force,
    Generator, CLOSED_FORM_TOL, GENERATOR_TOL, HJB_TOL,
};
use periodic_dividends::{PeriodicProblem, Side, SmoothCurve};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `x + w·e^{−λx}`
struct Decaying {
    w: f64,
    lambda: f64,
}

impl SmoothCurve for Decaying {
    fn jet(&self, x: f64, _: Side) -> [f64; 4] {
        let e = self.w * (-self.lambda * x).exp();
        let l = self.lambda;
        [x + e, 1.0 - l * e, l * l * e, -l * l * l * e]
    }

    fn asymptote(&self) -> (f64, f64) {
        (1.0, 0.0)
    }

    fn barrier(&self) -> f64 {
        0.0
    }
}

#[test]
fn generator_matches_exponential_jump_closed_form() {
    let m = exp_diffusive();
    let (c, sigma, kappa, mu) = (0.5, 0.3, 1.0, 2.0);
    let g = Decaying { w: 0.7, lambda: 1.3 };
    let generator = Generator::new(&m);
    for x in [0.01, 0.4, 1.0, 3.0, 8.0] {
        let e = g.w * (-g.lambda * x).exp();
        let expected = -c * (1.0 - g.lambda * e)
            + 0.5 * sigma * sigma * g.lambda * g.lambda * e
            + kappa * (1.0 / mu + e * (mu / (mu + g.lambda) - 1.0));
        let got = generator.apply(&g, x).unwrap().value;
        assert!((got - expected).abs() < 1e-10, "x={x}: {got} vs {expected}");
    }
}

fn check_harmonic_and_closed_form(p: &PeriodicProblem, barrier: f64, x_max: f64) {
    let curve = p.optimal_curve(barrier).unwrap();
    let generator = Generator::new(p.model());
    let q = p.spec().q;
    for x in default_grid(x_max, 60) {
        let g = curve.value(x);
        let residual = generator.apply(&curve, x).unwrap().value - q * g;
        if x < barrier {
            assert!(residual.abs() <= GENERATOR_TOL * (1.0 + g.abs()), "x={x}: {residual}");
        } else if x > barrier {
            let closed = generator_above_barrier(&curve, x).unwrap();
            let tol = (CLOSED_FORM_TOL * closed.abs()).max(1e-3 * GENERATOR_TOL * (1.0 + g.abs()));
            assert!((residual - closed).abs() <= tol, "x={x}: {residual} vs {closed}");
        }
    }
}

#[test]
fn optimal_curves_are_harmonic_below_the_barrier() {
    for m in [case1(), coxian3(), case1_bv(), exp_bv()] {
        let p = dividends(&m, R, 0.0);
        let b = p.solve().unwrap().level;
        check_harmonic_and_closed_form(&p, b, 3.0 * b.max(1.0));
        let p = bailout(&m, R, BETA);
        let b = p.solve().unwrap().level;
        check_harmonic_and_closed_form(&p, b, 3.0 * b.max(1.0));
    }
}

fn certify(p: PeriodicProblem) {
    let sol = p.solve().unwrap();
    let x_max = 3.0 * sol.level.max(1.0);
    let report = hjb_check(&p, sol.level, &default_grid(x_max, 120)).unwrap();
    assert!(report.certified(), "{:?}", report.side_conditions);
    assert!(report.max_abs_hjb() <= HJB_TOL);
    report.certify().unwrap();
}

#[test]
fn hjb_certifies_both_cases() {
    for m in [case1(), case2(), case1_bv(), coxian3()] {
        certify(dividends(&m, R, 0.0));
        certify(bailout(&m, R, BETA));
    }
}

#[test]
fn hjb_certifies_across_decision_rates() {
    let m = case1();
    for r in [0.01, 0.5, 5.0] {
        certify(dividends(&m, r, 0.0));
        certify(bailout(&m, r, BETA));
    }
}

#[test]
fn hjb_rejects_a_wrong_barrier() {
    let p = dividends(&case1(), R, 0.0);
    let b = p.solve().unwrap().level;
    for wrong in [0.7 * b, 1.3 * b] {
        let report = hjb_check(&p, wrong, &default_grid(3.0 * b, 120)).unwrap();
        assert!(!report.certified(), "{:?} {}", report.side_conditions, report.max_abs_hjb());
        assert!(report.certify().is_err());
    }
    let p = bailout(&case1(), R, BETA);
    let b = p.solve().unwrap().level;
    let report = hjb_check(&p, 1.5 * b, &default_grid(3.0 * b, 120)).unwrap();
    assert!(!report.certified(), "{:?} {}", report.side_conditions, report.max_abs_hjb());
}

#[test]
fn max_term_agrees_with_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for p in [dividends(&case1(), R, 0.0), bailout(&case1(), R, BETA)] {
        let b = p.solve().unwrap().level;
        let curve = p.optimal_curve(b).unwrap();
        for _ in 0..50 {
            let x = rng.random_range(0.0..5.0 * b);
            let exact = max_term(&curve, R, x);
            let (brute, bound) = max_term_brute_force(&curve, R, x, 4000);
            assert!(brute <= exact + 1e-12, "x={x}: {brute} > {exact}");
            assert!(exact - brute <= bound + 1e-12, "x={x}: gap {} > {bound}", exact - brute);
        }
    }
}

#[test]
fn optimal_barrier_dominates_alternatives() {
    for p in [dividends(&case1(), R, 0.0), bailout(&case1(), R, BETA)] {
        let b = p.solve().unwrap().level;
        let alts: Vec<f64> = (0..=12).map(|k| b * k as f64 / 6.0).collect();
        let report = dominance_scan(&p, b, &alts, &linspace(0.0, 4.0 * b, 80)).unwrap();
        assert!(report.holds(1e-10), "{:?}", report.alternatives);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn hjb_holds_for_random_parameters(c in 0.2..2.5f64, r in 0.02..5.0f64, rho in -5.0..5.0f64) {
        let m = case(c);
        let p = dividends(&m, r, rho);
        let sol = p.solve().unwrap();
        let report = hjb_check(&p, sol.level, &default_grid(3.0 * sol.level.max(1.0), 40)).unwrap();
        prop_assert!(report.certified(), "{:?}", report.side_conditions);
    }
}
