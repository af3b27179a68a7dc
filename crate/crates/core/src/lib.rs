//! Social-welfare AC optimal power flow in which load aggregators are
//! weighted by socioeconomic scores, with an embedded interior-point solver.
//!
//! Numerical kernels are generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix them to `f64`, which is what the harness uses.

// `!(a <= b)` is used on purpose so NaN fails range checks.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod acnetwork;
pub mod casemodel;
pub mod formulation;
pub mod harness;
pub mod linalg;
mod scalar;
pub mod solver;
pub mod welfare;

pub use scalar::Scalar;

pub use casemodel::{builtin_case, scale_ses, CaseData};
pub use harness::{run_solve, ses_sweep, Metrics, SweepResult};
pub use solver::{SolverOptions, Status};

pub type Problem = formulation::Problem<f64>;
pub type Solution = solver::Solution<f64>;
pub type Admittance = acnetwork::Admittance<f64>;
pub type Dispatch = formulation::Dispatch<f64>;
pub type SatisfactionParams = welfare::SatisfactionParams<f64>;
pub type WelfareTotals = welfare::WelfareTotals<f64>;
pub type CurtailmentReport = formulation::CurtailmentReport<f64>;
