use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

use super::CaseData;

/// Maximum number of aggregators hosted by one demand bus.
const MAX_AGGREGATORS_PER_BUS: usize = 3;

/// One broken case invariant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub entity: String,
    pub rule: String,
}

impl Violation {
    fn new(entity: impl Into<String>, rule: impl Into<String>) -> Self {
        Self {
            entity: entity.into(),
            rule: rule.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.entity, self.rule)
    }
}

/// Checks every structural and parametric invariant of a case.
///
/// Returns an empty list when the case is usable.
pub fn validate_case(case: &CaseData) -> Vec<Violation> {
    let mut out = Vec::new();

    if !(case.s_base > 0.0) || !case.s_base.is_finite() {
        out.push(Violation::new("case", "s_base must be positive"));
    }
    if case.buses.is_empty() {
        out.push(Violation::new("case", "no buses"));
    }

    let mut ids = BTreeSet::new();
    for bus in &case.buses {
        let name = format!("bus {}", bus.id);
        if !ids.insert(bus.id) {
            out.push(Violation::new(name.clone(), "duplicate bus id"));
        }
        if !(bus.v_min > 0.0) || !(bus.v_min <= bus.v_max) || !bus.v_max.is_finite() {
            out.push(Violation::new(name, "requires 0 < v_min <= v_max"));
        }
    }
    match case.buses.iter().filter(|b| b.is_slack).count() {
        0 if !case.buses.is_empty() => out.push(Violation::new("case", "no slack bus")),
        0 | 1 => {}
        _ => out.push(Violation::new("case", "multiple slack buses")),
    }

    for (k, line) in case.lines.iter().enumerate() {
        let name = format!("line {} ({}-{})", k + 1, line.from_bus, line.to_bus);
        if line.from_bus == line.to_bus {
            out.push(Violation::new(name.clone(), "from_bus equals to_bus"));
        }
        for end in [line.from_bus, line.to_bus] {
            if !ids.contains(&end) {
                out.push(Violation::new(name.clone(), format!("unknown bus {end}")));
            }
        }
        if line.x == 0.0 || !line.x.is_finite() {
            out.push(Violation::new(name.clone(), "reactance x must be nonzero"));
        }
        if !line.r.is_finite() {
            out.push(Violation::new(name.clone(), "resistance r must be finite"));
        }
        if !(line.s_max > 0.0) {
            out.push(Violation::new(name, "s_max must be positive"));
        }
    }

    for ((bus, k), gen) in case.generator_labels().into_iter().zip(&case.generators) {
        let name = format!("generator {k} at bus {bus}");
        if !ids.contains(&gen.bus) {
            out.push(Violation::new(name.clone(), "references unknown bus"));
        }
        if !(gen.p_min <= gen.p_max) {
            out.push(Violation::new(name.clone(), "p_min > p_max"));
        }
        if !(gen.q_min <= gen.q_max) {
            out.push(Violation::new(name.clone(), "q_min > q_max"));
        }
        if !(gen.a >= 0.0) {
            out.push(Violation::new(name.clone(), "cost coefficient a must be >= 0"));
        }
        if ![gen.b, gen.c].iter().all(|v| v.is_finite()) {
            out.push(Violation::new(name, "cost coefficients must be finite"));
        }
    }

    for ((bus, k), agg) in case.aggregator_labels().into_iter().zip(&case.aggregators) {
        let name = format!("aggregator {k} at bus {bus}");
        if !ids.contains(&agg.bus) {
            out.push(Violation::new(name.clone(), "references unknown bus"));
        }
        if !(agg.sigma >= 0.0) || !agg.sigma.is_finite() {
            out.push(Violation::new(name.clone(), "sigma must be >= 0"));
        }
        if !(agg.gamma > 0.0) || !agg.gamma.is_finite() {
            out.push(Violation::new(name.clone(), "gamma must be > 0"));
        }
        if !(agg.mu > 0.0) || !agg.mu.is_finite() {
            out.push(Violation::new(name.clone(), "mu must be > 0"));
        }
        if !(agg.p_c >= 0.0) {
            out.push(Violation::new(name.clone(), "p_c must be >= 0"));
        }
        if !(agg.p_c <= agg.p_n) {
            out.push(Violation::new(name.clone(), "p_c > p_n"));
        }
        if !(agg.q_c >= 0.0) {
            out.push(Violation::new(name.clone(), "q_c must be >= 0"));
        }
        if !(agg.q_c <= agg.q_n) {
            out.push(Violation::new(name, "q_c > q_n"));
        }
    }

    let mut per_bus: BTreeMap<usize, usize> = BTreeMap::new();
    for agg in &case.aggregators {
        *per_bus.entry(agg.bus).or_default() += 1;
    }
    for (bus, count) in per_bus {
        if count > MAX_AGGREGATORS_PER_BUS {
            out.push(Violation::new(
                format!("bus {bus}"),
                format!("hosts {count} aggregators (at most {MAX_AGGREGATORS_PER_BUS})"),
            ));
        }
    }

    if !is_connected(case) {
        out.push(Violation::new("network", "graph is not connected"));
    }

    out
}

fn is_connected(case: &CaseData) -> bool {
    let n = case.buses.len();
    if n <= 1 {
        return true;
    }
    let mut adjacency = vec![Vec::new(); n];
    for line in &case.lines {
        if let (Some(i), Some(j)) = (case.bus_index(line.from_bus), case.bus_index(line.to_bus)) {
            adjacency[i].push(j);
            adjacency[j].push(i);
        }
    }
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(i) = stack.pop() {
        for &j in &adjacency[i] {
            if !seen[j] {
                seen[j] = true;
                stack.push(j);
            }
        }
    }
    seen.into_iter().all(|s| s)
}
