//! Embedded primal-dual interior-point solver and its verification tools:
//! a KKT residual check, a finite-difference derivative audit and a
//! copper-plate economic-dispatch oracle.

mod audit;
mod ipm;
mod kkt;
mod nlp;
mod oracle;
mod restoration;

use serde::Serialize;
use thiserror::Error;

pub use audit::{finite_difference_audit, AuditReport};
pub use ipm::solve;
pub use kkt::{kkt_check, KktReport};
pub use nlp::Nlp;
pub use oracle::{copper_plate_oracle, OracleResult};

#[derive(Debug, Error, PartialEq)]
pub enum SolverError {
    #[error("variable {index} has lower bound above upper bound")]
    EmptyBox { index: usize },
    #[error("initial point has {got} entries, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("solution carries no dual multipliers")]
    MissingDuals,
    #[error("invalid solver options: {0}")]
    InvalidOptions(&'static str),
    #[error("copper-plate dispatch is infeasible: {0}")]
    OracleInfeasible(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum HessianMode {
    /// Analytic Hessian of the Lagrangian.
    Exact,
    /// Central differences of the Lagrangian gradient.
    FiniteDifference,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverOptions {
    /// Tolerance on stationarity, feasibility and complementarity.
    pub tol: f64,
    pub max_iter: usize,
    pub mu_init: f64,
    /// Linear barrier reduction factor.
    pub mu_factor: f64,
    /// Fraction-to-boundary parameter.
    pub tau: f64,
    /// Relative distance an initial point is pushed inside its bounds.
    pub bound_push: f64,
    pub hessian: HessianMode,
    /// Run an elastic feasibility restoration when the line search fails.
    pub restoration: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iter: 200,
            mu_init: 0.1,
            mu_factor: 0.2,
            tau: 0.995,
            bound_push: 1e-2,
            hessian: HessianMode::Exact,
            restoration: true,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<(), SolverError> {
        if !(self.tol > 0.0) {
            return Err(SolverError::InvalidOptions("tol must be positive"));
        }
        if self.max_iter < 1 {
            return Err(SolverError::InvalidOptions("max_iter must be at least 1"));
        }
        if !(self.mu_init > 0.0) {
            return Err(SolverError::InvalidOptions("mu_init must be positive"));
        }
        if !(self.mu_factor > 0.0 && self.mu_factor < 1.0) {
            return Err(SolverError::InvalidOptions("mu_factor must lie in (0, 1)"));
        }
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(SolverError::InvalidOptions("tau must lie in (0, 1)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Converged,
    IterationLimit,
    InfeasibleDetected,
    NumericalFailure,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Converged => "converged",
            Status::IterationLimit => "iteration_limit",
            Status::InfeasibleDetected => "infeasible_detected",
            Status::NumericalFailure => "numerical_failure",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationRecord<T> {
    pub iteration: usize,
    pub mu: T,
    pub objective: T,
    pub primal_infeasibility: T,
    pub dual_infeasibility: T,
    pub complementarity: T,
    pub alpha_primal: T,
    pub alpha_dual: T,
    pub regularization: T,
    pub restoration: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Solution<T> {
    pub status: Status,
    pub x: Vec<T>,
    /// Multipliers of the equality constraints.
    pub y_eq: Vec<T>,
    /// Multipliers of the `≤ 0` inequalities (nonnegative at a KKT point).
    pub y_ineq: Vec<T>,
    pub z_lower: Vec<T>,
    pub z_upper: Vec<T>,
    pub iterations: usize,
    pub objective: T,
    pub log: Vec<IterationRecord<T>>,
}

impl<T> Solution<T> {
    pub fn converged(&self) -> bool {
        self.status == Status::Converged
    }
}
