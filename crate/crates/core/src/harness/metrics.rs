use serde::{Deserialize, Serialize};

use crate::acnetwork::network_losses;
use crate::formulation::{curtailment_of, Problem};
use crate::welfare::normalized_satisfaction;

/// Reporting quantities of one dispatch, in $/h and MW.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// Unweighted `Σ U(P_a)`.
    pub total_satisfaction: f64,
    /// `Σ σ·U(P_a) − Σ C(P_g)`.
    pub weighted_objective: f64,
    pub total_cost: f64,
    /// Satisfaction minus cost.
    pub social_welfare: f64,
    /// `U(P_a) / U(p_n)` per aggregator.
    pub normalized_satisfaction: Vec<f64>,
    /// `p_n − P_a` per aggregator.
    pub curtailment: Vec<f64>,
    /// `Σ P_g − Σ P_a`.
    pub total_curtailment: f64,
    pub losses: f64,
}

impl Metrics {
    pub fn from_point(problem: &Problem<f64>, x: &[f64]) -> Self {
        let case = problem.case();
        let d = problem.dispatch(x);
        let w = problem.welfare(x);
        let c = curtailment_of(case, &d);
        let normalized = case
            .aggregators
            .iter()
            .zip(&d.pa)
            .map(|(a, &p)| normalized_satisfaction(a, p.max(0.0)).unwrap_or(f64::NAN))
            .collect();
        let losses = network_losses(case, &d.v, &d.theta).unwrap_or(f64::NAN);
        Self {
            total_satisfaction: w.total_satisfaction,
            weighted_objective: w.weighted_objective,
            total_cost: w.total_cost,
            social_welfare: w.total_satisfaction - w.total_cost,
            normalized_satisfaction: normalized,
            curtailment: c.per_aggregator,
            total_curtailment: c.total,
            losses,
        }
    }
}
