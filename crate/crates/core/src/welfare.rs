//! Consumer satisfaction, generation cost and the socioeconomic-score
//! weighted welfare objective. Powers are in MW and money in $/h.

use serde::Serialize;
use thiserror::Error;

use crate::casemodel::{Aggregator, CaseData, Generator};
use crate::Scalar;

#[derive(Debug, Error, PartialEq)]
pub enum WelfareError {
    #[error("satisfaction parameters require gamma > 0 and mu > 0")]
    InvalidParams,
    #[error("power must be non-negative, got {0}")]
    NegativePower(f64),
    #[error("inverse demand is defined on [0, {limit}], got {p}")]
    OutsideDemandCurve { p: f64, limit: f64 },
    #[error("satisfaction at the normal limit is zero")]
    ZeroNormalSatisfaction,
    #[error("expected {expected} {what} values, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
}

/// Quadratic satisfaction curve that saturates at `gamma / mu`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SatisfactionParams<T> {
    gamma: T,
    mu: T,
}

impl<T: Scalar> SatisfactionParams<T> {
    pub fn new(gamma: T, mu: T) -> Result<Self, WelfareError> {
        if gamma > T::zero() && mu > T::zero() && gamma.is_finite() && mu.is_finite() {
            Ok(Self { gamma, mu })
        } else {
            Err(WelfareError::InvalidParams)
        }
    }

    pub fn of(agg: &Aggregator) -> Result<Self, WelfareError> {
        Self::new(T::lit(agg.gamma), T::lit(agg.mu))
    }

    pub fn gamma(&self) -> T {
        self.gamma
    }

    pub fn mu(&self) -> T {
        self.mu
    }

    /// Demand beyond which satisfaction no longer increases (MW).
    pub fn saturation_point(&self) -> T {
        self.gamma / self.mu
    }

    /// Maximum attainable satisfaction, `γ²/(2μ)`.
    pub fn ceiling(&self) -> T {
        T::lit(0.5) * self.gamma * self.gamma / self.mu
    }

    /// Satisfaction without the domain check. Negative `p` follows the
    /// quadratic branch, which keeps the function smooth for iterates that
    /// sit marginally below zero.
    #[inline]
    pub fn value(&self, p: T) -> T {
        if p >= self.saturation_point() {
            self.ceiling()
        } else {
            self.gamma * p - T::lit(0.5) * self.mu * p * p
        }
    }

    /// First derivative; zero on the saturated branch.
    #[inline]
    pub fn marginal(&self, p: T) -> T {
        if p >= self.saturation_point() {
            T::zero()
        } else {
            self.gamma - self.mu * p
        }
    }

    /// Second derivative; `-μ` below saturation, zero above.
    #[inline]
    pub fn curvature(&self, p: T) -> T {
        if p >= self.saturation_point() {
            T::zero()
        } else {
            -self.mu
        }
    }
}

pub fn satisfaction<T: Scalar>(params: &SatisfactionParams<T>, p: T) -> Result<T, WelfareError> {
    if !(p >= T::zero()) {
        return Err(WelfareError::NegativePower(p.as_f64()));
    }
    Ok(params.value(p))
}

/// Marginal satisfaction `γ − μp`, i.e. the price the aggregator is
/// willing to pay for one more MW at demand `p`.
pub fn inverse_demand<T: Scalar>(params: &SatisfactionParams<T>, p: T) -> Result<T, WelfareError> {
    let limit = params.saturation_point();
    if !(p >= T::zero() && p <= limit) {
        return Err(WelfareError::OutsideDemandCurve {
            p: p.as_f64(),
            limit: limit.as_f64(),
        });
    }
    Ok(params.gamma - params.mu * p)
}

/// Satisfaction at `p` relative to satisfaction at the normal demand `p_n`.
pub fn normalized_satisfaction<T: Scalar>(agg: &Aggregator, p: T) -> Result<T, WelfareError> {
    let params = SatisfactionParams::<T>::of(agg)?;
    let reference = satisfaction(&params, T::lit(agg.p_n))?;
    if !(reference > T::zero()) {
        return Err(WelfareError::ZeroNormalSatisfaction);
    }
    Ok(satisfaction(&params, p)? / reference)
}

#[inline]
pub fn gen_cost<T: Scalar>(gen: &Generator, p: T) -> T {
    (T::lit(gen.a) * p + T::lit(gen.b)) * p + T::lit(gen.c)
}

/// Marginal cost `2aP + b`.
#[inline]
pub fn gen_marginal_cost<T: Scalar>(gen: &Generator, p: T) -> T {
    T::lit(2.0 * gen.a) * p + T::lit(gen.b)
}

/// Aggregate welfare quantities of a dispatch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WelfareTotals<T> {
    /// `Σ σ·U(P) − Σ C(P_g)`, the quantity being maximized.
    pub weighted_objective: T,
    /// Unweighted `Σ U(P)`.
    pub total_satisfaction: T,
    pub total_cost: T,
}

impl<T: Scalar> WelfareTotals<T> {
    /// Unweighted satisfaction minus cost.
    pub fn social_welfare(&self) -> T {
        self.total_satisfaction - self.total_cost
    }
}

/// Evaluates the welfare objective for per-aggregator and per-generator
/// active powers (MW), both in case order.
pub fn social_objective<T: Scalar>(
    case: &CaseData,
    p_agg: &[T],
    p_gen: &[T],
) -> Result<WelfareTotals<T>, WelfareError> {
    if p_agg.len() != case.aggregators.len() {
        return Err(WelfareError::DimensionMismatch {
            what: "aggregator",
            expected: case.aggregators.len(),
            got: p_agg.len(),
        });
    }
    if p_gen.len() != case.generators.len() {
        return Err(WelfareError::DimensionMismatch {
            what: "generator",
            expected: case.generators.len(),
            got: p_gen.len(),
        });
    }
    let mut weighted = T::zero();
    let mut satisfaction = T::zero();
    for (agg, &p) in case.aggregators.iter().zip(p_agg) {
        let u = SatisfactionParams::<T>::of(agg)?.value(p);
        weighted += T::lit(agg.sigma) * u;
        satisfaction += u;
    }
    let cost = case
        .generators
        .iter()
        .zip(p_gen)
        .fold(T::zero(), |acc, (g, &p)| acc + gen_cost(g, p));
    Ok(WelfareTotals {
        weighted_objective: weighted - cost,
        total_satisfaction: satisfaction,
        total_cost: cost,
    })
}
