pub mod barrier;
pub mod error;
pub mod linalg;
pub mod model;
pub mod quadrature;
pub mod rootfind;
pub mod scale;
pub mod simulator;
pub mod valuation;
pub mod verification;

pub use barrier::{r_sweep, BarrierSolution, SmoothFitReport, SweepRow};
pub use error::{Error, Result};
pub use model::{PhaseTypeLaw, PhaseTypeLevyModel};
pub use scale::{PeriodicScaleRep, ScaleFunctionRep, Side};
pub use valuation::{BarrierCurve, PeriodicProblem, ProblemKind, ProblemSpec, SmoothCurve};
