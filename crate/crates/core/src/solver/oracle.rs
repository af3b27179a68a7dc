use serde::Serialize;

use crate::casemodel::CaseData;
use crate::welfare::{social_objective, WelfareTotals};

use super::SolverError;

const GAP_TOL: f64 = 1e-9;
const MAX_BISECTIONS: usize = 500;

/// Lossless single-node dispatch at the market-clearing price.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleResult {
    /// Clearing price, $/MWh.
    pub lambda: f64,
    /// MW per aggregator, in case order.
    pub p_agg: Vec<f64>,
    /// MW per generator, in case order.
    pub p_gen: Vec<f64>,
    /// `Σ σ·U − Σ C`.
    pub objective: f64,
    pub totals: WelfareTotals<f64>,
}

fn demand_at(case: &CaseData, lambda: f64) -> Vec<f64> {
    case.aggregators
        .iter()
        .map(|a| ((a.gamma - lambda / a.sigma) / a.mu).clamp(a.p_c, a.p_n))
        .collect()
}

fn supply_at(case: &CaseData, lambda: f64) -> Vec<f64> {
    case.generators
        .iter()
        .map(|g| {
            if g.a > 0.0 {
                ((lambda - g.b) / (2.0 * g.a)).clamp(g.p_min, g.p_max)
            } else if lambda < g.b {
                g.p_min
            } else if lambda > g.b {
                g.p_max
            } else {
                0.5 * (g.p_min + g.p_max)
            }
        })
        .collect()
}

fn excess(case: &CaseData, lambda: f64) -> f64 {
    supply_at(case, lambda).iter().sum::<f64>() - demand_at(case, lambda).iter().sum::<f64>()
}

/// Maximizes `Σ σ·U(P_a) − Σ C(P_g)` subject to `Σ P_g = Σ P_a` and the box
/// limits, ignoring the network. Bisects on the price `λ`; at the final
/// bracket the two allocations are blended so supply meets demand exactly,
/// which also settles units with linear cost sitting at the price.
pub fn copper_plate_oracle(case: &CaseData) -> Result<OracleResult, SolverError> {
    let min_supply: f64 = case.generators.iter().map(|g| g.p_min).sum();
    let max_supply: f64 = case.generators.iter().map(|g| g.p_max).sum();
    let min_demand: f64 = case.aggregators.iter().map(|a| a.p_c).sum();
    let max_demand: f64 = case.aggregators.iter().map(|a| a.p_n).sum();
    if max_supply < min_demand {
        return Err(SolverError::OracleInfeasible(format!(
            "generation {max_supply} MW cannot cover critical demand {min_demand} MW"
        )));
    }
    if min_supply > max_demand {
        return Err(SolverError::OracleInfeasible(format!(
            "minimum generation {min_supply} MW exceeds normal demand {max_demand} MW"
        )));
    }

    let mut lo = case
        .generators
        .iter()
        .map(|g| g.b)
        .fold(0.0f64, f64::min)
        - 1.0;
    while excess(case, lo) > 0.0 {
        lo = 2.0 * lo - 1.0;
        if !lo.is_finite() {
            return Err(SolverError::OracleInfeasible("no lower price bracket".into()));
        }
    }
    let mut hi = case
        .generators
        .iter()
        .map(|g| g.b + 2.0 * g.a * g.p_max)
        .chain(case.aggregators.iter().map(|a| a.sigma * a.gamma))
        .fold(1.0f64, f64::max)
        + 1.0;
    while excess(case, hi) < 0.0 {
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(SolverError::OracleInfeasible("no upper price bracket".into()));
        }
    }

    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let gap = excess(case, mid);
        if gap.abs() < GAP_TOL {
            lo = mid;
            hi = mid;
            break;
        }
        if gap < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }

    let (e_lo, e_hi) = (excess(case, lo), excess(case, hi));
    let t = if e_hi - e_lo > 0.0 {
        (-e_lo / (e_hi - e_lo)).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let blend = |a: Vec<f64>, b: Vec<f64>| -> Vec<f64> {
        a.iter().zip(&b).map(|(x, y)| (1.0 - t) * x + t * y).collect()
    };
    let p_agg = blend(demand_at(case, lo), demand_at(case, hi));
    let p_gen = blend(supply_at(case, lo), supply_at(case, hi));
    let balance = p_gen.iter().sum::<f64>() - p_agg.iter().sum::<f64>();
    if balance.abs() > 1e-6 * max_demand.max(1.0) {
        return Err(SolverError::OracleInfeasible(format!(
            "supply and demand differ by {balance} MW at the clearing price"
        )));
    }
    let totals = social_objective(case, &p_agg, &p_gen)
        .map_err(|e| SolverError::OracleInfeasible(e.to_string()))?;
    Ok(OracleResult {
        lambda: (1.0 - t) * lo + t * hi,
        objective: totals.weighted_objective,
        p_agg,
        p_gen,
        totals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::casemodel::{builtin_case, Aggregator, Bus, CaseMetadata, Generator};

    pub(crate) fn toy() -> CaseData {
        CaseData {
            name: "toy".into(),
            s_base: 100.0,
            metadata: CaseMetadata::default(),
            buses: vec![Bus {
                id: 1,
                is_slack: true,
                v_min: 0.95,
                v_max: 1.05,
            }],
            lines: vec![],
            generators: vec![Generator {
                bus: 1,
                a: 1.0,
                b: 0.0,
                c: 0.0,
                p_min: 0.0,
                p_max: 100.0,
                q_min: -100.0,
                q_max: 100.0,
            }],
            aggregators: vec![Aggregator {
                bus: 1,
                sigma: 1.0,
                gamma: 10.0,
                mu: 1.0,
                p_n: 10.0,
                p_c: 0.0,
                q_n: 0.0,
                q_c: 0.0,
            }],
        }
    }

    #[test]
    fn toy_clears_at_analytic_price() {
        let r = copper_plate_oracle(&toy()).unwrap();
        assert!((r.lambda - 20.0 / 3.0).abs() < 1e-8);
        assert!((r.p_gen[0] - 10.0 / 3.0).abs() < 1e-9);
        assert!((r.p_agg[0] - 10.0 / 3.0).abs() < 1e-9);
        assert!((r.objective - 50.0 / 3.0).abs() < 1e-7);
    }

    #[test]
    fn scarce_generation_forces_critical_demand() {
        let mut case = builtin_case("five_bus").unwrap();
        let critical = case.total_p_critical();
        let share = critical / case.generators.len() as f64;
        for g in &mut case.generators {
            g.p_max = share;
        }
        let r = copper_plate_oracle(&case).unwrap();
        for (p, a) in r.p_agg.iter().zip(&case.aggregators) {
            assert!((p - a.p_c).abs() < 1e-6, "{p} vs {}", a.p_c);
        }
    }

    #[test]
    fn insufficient_generation_is_infeasible() {
        let mut case = builtin_case("five_bus").unwrap();
        for g in &mut case.generators {
            g.p_max = 1.0;
        }
        assert!(matches!(copper_plate_oracle(&case), Err(SolverError::OracleInfeasible(_))));
    }

    #[test]
    fn linear_cost_unit_fills_the_gap() {
        let mut case = toy();
        case.generators[0].a = 0.0;
        case.generators[0].b = 4.0;
        let r = copper_plate_oracle(&case).unwrap();
        assert!((r.lambda - 4.0).abs() < 1e-6);
        assert!((r.p_agg[0] - 6.0).abs() < 1e-6);
        assert!((r.p_gen[0] - 6.0).abs() < 1e-6);
    }

    #[test]
    fn supply_meets_demand_on_builtins() {
        for name in ["five_bus", "rts24"] {
            let r = copper_plate_oracle(&builtin_case(name).unwrap()).unwrap();
            let gap: f64 = r.p_gen.iter().sum::<f64>() - r.p_agg.iter().sum::<f64>();
            assert!(gap.abs() < 1e-6, "{name}: {gap}");
        }
    }
}
