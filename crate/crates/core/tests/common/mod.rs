#![allow(dead_code)]

use nalgebra::DMatrix;
use periodic_dividends::{PhaseTypeLaw, PhaseTypeLevyModel, PeriodicProblem, ProblemSpec};

pub const Q: f64 = 0.05;
pub const R: f64 = 0.1;
pub const BETA: f64 = 2.0;
pub const R_LIST: [f64; 11] = [0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0, 2.0, 3.0, 4.0, 5.0];

/// Folded-normal jumps, σ = 0.2, κ = 2 and drift `c`.
pub fn case(c: f64) -> PhaseTypeLevyModel {
    PhaseTypeLevyModel::new(c, 0.2, 2.0, PhaseTypeLaw::folded_normal()).unwrap()
}

pub fn case1() -> PhaseTypeLevyModel {
    case(0.5)
}

pub fn case2() -> PhaseTypeLevyModel {
    case(2.0)
}

/// Bounded-variation variant of case 1.
pub fn case1_bv() -> PhaseTypeLevyModel {
    PhaseTypeLevyModel::new(0.5, 0.0, 2.0, PhaseTypeLaw::folded_normal()).unwrap()
}

pub fn exp_bv() -> PhaseTypeLevyModel {
    PhaseTypeLevyModel::new(1.5, 0.0, 1.0, PhaseTypeLaw::exponential(1.0).unwrap()).unwrap()
}

pub fn exp_diffusive() -> PhaseTypeLevyModel {
    PhaseTypeLevyModel::new(0.5, 0.3, 1.0, PhaseTypeLaw::exponential(2.0).unwrap()).unwrap()
}

/// Three-phase Coxian with a complex pair among the roots of ψ(θ) = q.
pub fn coxian3() -> PhaseTypeLevyModel {
    let t = DMatrix::from_row_slice(3, 3, &[-3.0, 2.0, 0.0, 0.0, -3.0, 2.5, 0.0, 0.0, -3.0]);
    let law = PhaseTypeLaw::new(vec![1.0, 0.0, 0.0], t).unwrap();
    PhaseTypeLevyModel::new(0.8, 0.25, 1.5, law).unwrap()
}

pub fn dividends(model: &PhaseTypeLevyModel, r: f64, rho: f64) -> PeriodicProblem {
    PeriodicProblem::new(model, ProblemSpec::dividends(Q, r, rho).unwrap()).unwrap()
}

pub fn bailout(model: &PhaseTypeLevyModel, r: f64, beta: f64) -> PeriodicProblem {
    PeriodicProblem::new(model, ProblemSpec::bailout(Q, r, beta).unwrap()).unwrap()
}

pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}
