//! Power system scenario data: buses, lines, generators and the load
//! aggregators that bid their satisfaction into the dispatch.
//!
//! All quantities are stored in engineering units (MW, MVAr, p.u. for
//! impedances and voltages). Conversion to per-unit happens when a
//! [`crate::formulation::Problem`] is built.

mod builtin;
mod io;
mod validate;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use builtin::{builtin_case, BuiltinCase, FIVE_BUS_DERATE_PCT, RTS24_SEED};
pub use io::{from_toml_str, read_case, to_toml_string, write_case};
pub use validate::{validate_case, Violation};

#[derive(Debug, Error)]
pub enum CaseError {
    #[error("unknown built-in case `{0}` (expected five_bus or rts24)")]
    UnknownBuiltin(String),
    #[error("SES scale factor must be positive, got {0}")]
    NonPositiveScale(f64),
    #[error("unknown bus id {0}")]
    UnknownBus(usize),
    #[error("expected {expected} aggregator values, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid case: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
    #[error("failed to read case file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("failed to parse case file: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("failed to serialize case: {0}")]
    Serialize(#[from] toml::ser::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    pub id: usize,
    #[serde(default)]
    pub is_slack: bool,
    pub v_min: f64,
    pub v_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub from_bus: usize,
    pub to_bus: usize,
    /// Series resistance (p.u.).
    pub r: f64,
    /// Series reactance (p.u.).
    pub x: f64,
    /// Active flow limit (MW), applied in both directions.
    pub s_max: f64,
}

/// Generator with quadratic cost `a·P² + b·P + c` in $/h, `P` in MW.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    pub bus: usize,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub p_min: f64,
    pub p_max: f64,
    pub q_min: f64,
    pub q_max: f64,
}

/// A dispatchable load aggregator.
///
/// `p_n`/`q_n` are the normal demands, `p_c`/`q_c` the critical demands that
/// must be served after curtailment. `sigma` is the socioeconomic score
/// weighting the aggregator's satisfaction in the objective.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregator {
    pub bus: usize,
    pub sigma: f64,
    pub gamma: f64,
    pub mu: f64,
    pub p_n: f64,
    pub p_c: f64,
    pub q_n: f64,
    pub q_c: f64,
}

/// Free-form provenance of a case (seed, derating, dropped data).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CaseMetadata {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator_derate_pct: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseData {
    #[serde(default)]
    pub name: String,
    /// MVA base for per-unit conversion.
    pub s_base: f64,
    #[serde(default)]
    pub metadata: CaseMetadata,
    pub buses: Vec<Bus>,
    #[serde(default)]
    pub lines: Vec<Line>,
    #[serde(default)]
    pub generators: Vec<Generator>,
    #[serde(default)]
    pub aggregators: Vec<Aggregator>,
}

impl CaseData {
    /// Position of the bus with the given id in `buses`.
    pub fn bus_index(&self, id: usize) -> Option<usize> {
        self.buses.iter().position(|b| b.id == id)
    }

    /// Position of the (first) slack bus.
    pub fn slack_index(&self) -> Option<usize> {
        self.buses.iter().position(|b| b.is_slack)
    }

    /// `(bus id, 1-based position among that bus's aggregators)` for each
    /// aggregator in case order.
    pub fn aggregator_labels(&self) -> Vec<(usize, usize)> {
        let mut seen: BTreeMap<usize, usize> = BTreeMap::new();
        self.aggregators
            .iter()
            .map(|a| {
                let k = seen.entry(a.bus).or_insert(0);
                *k += 1;
                (a.bus, *k)
            })
            .collect()
    }

    /// Generator counterpart of [`CaseData::aggregator_labels`].
    pub fn generator_labels(&self) -> Vec<(usize, usize)> {
        let mut seen: BTreeMap<usize, usize> = BTreeMap::new();
        self.generators
            .iter()
            .map(|g| {
                let k = seen.entry(g.bus).or_insert(0);
                *k += 1;
                (g.bus, *k)
            })
            .collect()
    }

    pub fn total_p_max(&self) -> f64 {
        self.generators.iter().map(|g| g.p_max).sum()
    }

    pub fn total_p_normal(&self) -> f64 {
        self.aggregators.iter().map(|a| a.p_n).sum()
    }

    pub fn total_p_critical(&self) -> f64 {
        self.aggregators.iter().map(|a| a.p_c).sum()
    }

    pub fn total_q_normal(&self) -> f64 {
        self.aggregators.iter().map(|a| a.q_n).sum()
    }

    /// Network-free variant: zero resistance and effectively unlimited lines.
    ///
    /// With losses and congestion removed the active-power optimum coincides
    /// with the single-node economic dispatch solved by
    /// [`crate::solver::copper_plate_oracle`].
    pub fn copper_plate(&self) -> CaseData {
        let mut case = self.clone();
        for line in &mut case.lines {
            line.r = 0.0;
            line.s_max = line.s_max.max(1.0e6);
        }
        case.metadata
            .notes
            .push("copper-plate reduction: r = 0, s_max >= 1e6 MW".to_string());
        case
    }
}

/// Returns a copy of `case` with every aggregator's socioeconomic score
/// multiplied by `factor`.
pub fn scale_ses(case: &CaseData, factor: f64) -> Result<CaseData, CaseError> {
    if !(factor > 0.0) || !factor.is_finite() {
        return Err(CaseError::NonPositiveScale(factor));
    }
    let mut scaled = case.clone();
    for agg in &mut scaled.aggregators {
        agg.sigma *= factor;
    }
    Ok(scaled)
}

/// Total active demand of the aggregators hosted at `bus` (MW).
pub fn bus_demand(case: &CaseData, bus: usize, p_values: &[f64]) -> Result<f64, CaseError> {
    if case.bus_index(bus).is_none() {
        return Err(CaseError::UnknownBus(bus));
    }
    if p_values.len() != case.aggregators.len() {
        return Err(CaseError::DimensionMismatch {
            expected: case.aggregators.len(),
            got: p_values.len(),
        });
    }
    Ok(case
        .aggregators
        .iter()
        .zip(p_values)
        .filter(|(a, _)| a.bus == bus)
        .map(|(_, p)| *p)
        .sum())
}
