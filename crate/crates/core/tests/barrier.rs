mod common;

use common::*;
use periodic_dividends::{r_sweep, ProblemSpec};
use proptest::prelude::*;

#[test]
fn f_is_increasing_and_eventually_positive() {
    let p = dividends(&case1(), R, 0.0);
    let grid = linspace(0.0, 10.0, 400);
    let values: Vec<f64> = grid.iter().map(|&b| p.f(b).unwrap()).collect();
    assert!(values.windows(2).all(|w| w[1] > w[0]));
    for &b in &grid {
        assert!(p.f_prime(b).unwrap() > 0.0);
    }
    let phi = p.scale().base().phi();
    assert!(p.f(20.0 / phi).unwrap() > 0.0);
}

#[test]
fn case_dichotomy() {
    let p1 = dividends(&case1(), R, 0.0);
    assert!(p1.f(0.0).unwrap() < 0.0);
    assert!(p1.psi_prime_at_zero() < p1.zero_barrier_threshold().unwrap());
    let sol = p1.solve_b_star().unwrap();
    assert!(!sol.is_zero && sol.level > 0.0 && sol.residual <= 1e-10);

    let p2 = dividends(&case2(), R, 0.0);
    assert!(p2.psi_prime_at_zero() > 0.0 && p2.zero_barrier_threshold().unwrap() < 0.0);
    let values: Vec<f64> = linspace(0.0, 10.0, 100).iter().map(|&b| p2.f(b).unwrap()).collect();
    assert!(values.iter().all(|v| *v > 0.0));
    assert!(p2.solve_b_star().unwrap().is_zero);
}

#[test]
fn barrier_decreases_in_terminal_payoff() {
    let m = case1();
    let levels: Vec<f64> = (-4..=4)
        .map(|k| dividends(&m, R, 5.0 * k as f64).solve_b_star().unwrap().level)
        .collect();
    assert!(levels.windows(2).all(|w| w[1] <= w[0]), "{levels:?}");
    assert_eq!(*levels.last().unwrap(), 0.0);
    assert!(levels[0] > 0.0);
}

#[test]
fn bailout_barrier_equation() {
    let p = bailout(&case1(), R, BETA);
    assert!((p.f_hat(0.0).unwrap() - (1.0 - BETA)).abs() < 1e-12);
    let grid = linspace(0.0, 10.0, 400);
    assert!(grid.windows(2).all(|w| p.f_hat(w[1]).unwrap() > p.f_hat(w[0]).unwrap()));
    let sol = p.solve_b_dagger().unwrap();
    assert!((p.scale().zqr(sol.level) - BETA).abs() <= 1e-10);
    assert!(sol.residual <= 1e-10);
    let expected = Q / (R + Q) * p.scale().phi_r() * p.scale().j(sol.level);
    assert!((p.f_hat_prime(sol.level).unwrap() - expected).abs() < 1e-14);
}

#[test]
fn smooth_fit_gaps() {
    for m in [case1(), coxian3()] {
        for p in [dividends(&m, R, 0.0), bailout(&m, R, BETA)] {
            let gaps = p.solve().unwrap().smoothfit.gaps();
            assert!(gaps[0] < 1e-12 && gaps[1] < 1e-12);
            assert!(gaps[2] < 1e-7 && gaps[3] < 1e-7, "{gaps:?}");
        }
    }
    for p in [dividends(&case1_bv(), R, 0.0), bailout(&case1_bv(), R, BETA)] {
        let sol = p.solve().unwrap();
        let gaps = sol.smoothfit.gaps();
        assert!(gaps[1] < 1e-12 && gaps[2] < 1e-7, "{gaps:?}");
        // bounded variation: the third derivative genuinely jumps
        assert!(gaps[3] > 1e-3);
    }
}

#[test]
fn r_sweep_approaches_the_classical_barrier() {
    let m = case1();
    for p in [dividends(&m, R, 0.0), bailout(&m, R, BETA)] {
        let (classical, rows) = r_sweep(&p, &R_LIST).unwrap();
        assert!(classical > 0.0);
        assert_eq!(rows.len(), R_LIST.len());
        let gaps: Vec<f64> = rows.iter().map(|r| r.gap_to_classical).collect();
        assert!(gaps.windows(2).all(|w| w[1] <= w[0]), "{gaps:?}");
        let at = |r: f64| rows.iter().find(|row| row.r == r).unwrap().gap_to_classical;
        assert!(at(5.0) < at(0.5));
    }
}

#[test]
fn slow_decisions_take_the_money() {
    let p = dividends(&case1(), 1e-4, 0.0);
    assert!(p.solve_b_star().unwrap().is_zero);
}

#[test]
fn bailout_barrier_exists_when_dividend_one_is_zero() {
    let p = bailout(&case2(), R, BETA);
    let sol = p.solve_b_dagger().unwrap();
    assert!(sol.level > 0.0);
    let (classical, _) = p.classical_limit().unwrap();
    assert!(sol.level < classical);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn dividend_barrier_solves_or_is_zero(rho in -20.0..20.0f64, r in 0.01..5.0f64, c in 0.2..2.5f64) {
        let base = dividends(&case(c), R, 0.0);
        let p = base.with_spec(ProblemSpec::dividends(Q, r, rho).unwrap()).unwrap();
        let sol = p.solve_b_star().unwrap();
        if sol.is_zero {
            prop_assert!(p.f(0.0).unwrap() >= 0.0);
        } else {
            prop_assert!(p.f(sol.level).unwrap().abs() <= 1e-10 * (1.0 + sol.level));
            let again = p.solve_b_star_from(Some(sol.level)).unwrap();
            prop_assert!(again.iterations <= 2);
        }
    }

    #[test]
    fn bailout_barrier_solves(beta in 1.001..10.0f64, r in 0.01..5.0f64, c in 0.2..2.5f64) {
        let base = bailout(&case(c), R, BETA);
        let p = base.with_spec(ProblemSpec::bailout(Q, r, beta).unwrap()).unwrap();
        let sol = p.solve_b_dagger().unwrap();
        prop_assert!(sol.level > 0.0);
        prop_assert!((p.scale().zqr(sol.level) - beta).abs() <= 1e-10 * beta);
    }
}
