use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::acnetwork::line_flow;

use super::{HarnessError, Metrics, SolveRun, SweepResult};

/// Relative margin under a rating at which a line counts as binding.
const BINDING_MARGIN: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BusReport {
    pub id: usize,
    pub v_pu: f64,
    pub theta_rad: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorReport {
    pub bus: usize,
    pub index: usize,
    pub p_mw: f64,
    pub q_mvar: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregatorReport {
    pub bus: usize,
    pub index: usize,
    pub p_mw: f64,
    pub q_mvar: f64,
    pub curtailment_mw: f64,
    pub normalized_satisfaction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineReport {
    pub from_bus: usize,
    pub to_bus: usize,
    pub flow_from_to_mw: f64,
    pub flow_to_from_mw: f64,
    pub s_max_mw: f64,
    pub binding: bool,
}

/// Full result of a single solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub case: String,
    pub status: String,
    pub iterations: usize,
    pub max_violation_pu: f64,
    pub metrics: Metrics,
    pub buses: Vec<BusReport>,
    pub generators: Vec<GeneratorReport>,
    pub aggregators: Vec<AggregatorReport>,
    pub lines: Vec<LineReport>,
}

pub fn solve_report(run: &SolveRun) -> SolveReport {
    let case = run.problem.case();
    let x = &run.solution.x;
    let d = run.problem.dispatch(x);
    let buses = case
        .buses
        .iter()
        .enumerate()
        .map(|(i, b)| BusReport {
            id: b.id,
            v_pu: d.v[i],
            theta_rad: d.theta[i],
        })
        .collect();
    let generators = case
        .generator_labels()
        .into_iter()
        .enumerate()
        .map(|(k, (bus, index))| GeneratorReport {
            bus,
            index,
            p_mw: d.pg[k],
            q_mvar: d.qg[k],
        })
        .collect();
    let aggregators = case
        .aggregator_labels()
        .into_iter()
        .enumerate()
        .map(|(k, (bus, index))| AggregatorReport {
            bus,
            index,
            p_mw: d.pa[k],
            q_mvar: d.qa[k],
            curtailment_mw: run.metrics.curtailment[k],
            normalized_satisfaction: run.metrics.normalized_satisfaction[k],
        })
        .collect();
    let lines = case
        .lines
        .iter()
        .enumerate()
        .map(|(k, l)| {
            let (f, b) = line_flow(case, &d.v, &d.theta, k).unwrap_or((f64::NAN, f64::NAN));
            LineReport {
                from_bus: l.from_bus,
                to_bus: l.to_bus,
                flow_from_to_mw: f,
                flow_to_from_mw: b,
                s_max_mw: l.s_max,
                binding: f.max(b) >= l.s_max * (1.0 - BINDING_MARGIN),
            }
        })
        .collect();
    SolveReport {
        case: case.name.clone(),
        status: run.solution.status.as_str().to_string(),
        iterations: run.solution.iterations,
        max_violation_pu: run.problem.max_violation(x),
        metrics: run.metrics.clone(),
        buses,
        generators,
        aggregators,
        lines,
    }
}

/// Shortest decimal form that parses back to the same `f64`.
fn number(v: f64) -> String {
    if v.is_finite() {
        format!("{v:?}")
    } else {
        String::new()
    }
}

pub fn write_sweep_csv<W: Write>(result: &SweepResult, out: W) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = [
        "scale_pct",
        "status",
        "iterations",
        "total_satisfaction",
        "weighted_objective",
        "total_cost",
        "social_welfare",
        "total_curtailment_mw",
        "losses_mw",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend(
        result
            .aggregators
            .iter()
            .map(|(bus, k)| format!("norm_sat_{bus}_{k}")),
    );
    w.write_record(&header)?;
    for r in &result.records {
        let mut row = vec![number(r.scale_pct), r.status.clone(), r.iterations.to_string()];
        match &r.metrics {
            Some(m) => {
                row.extend(
                    [
                        m.total_satisfaction,
                        m.weighted_objective,
                        m.total_cost,
                        m.social_welfare,
                        m.total_curtailment,
                        m.losses,
                    ]
                    .map(number),
                );
                row.extend(m.normalized_satisfaction.iter().map(|&v| number(v)));
            }
            None => row.extend(std::iter::repeat_n(String::new(), header.len() - 3)),
        }
        w.write_record(&row)?;
    }
    w.flush().map_err(|source| HarnessError::Io {
        path: "<csv>".into(),
        source,
    })?;
    Ok(())
}

pub fn sweep_csv_string(result: &SweepResult) -> Result<String, HarnessError> {
    let mut buf = Vec::new();
    write_sweep_csv(result, &mut buf)?;
    Ok(String::from_utf8(buf).expect("csv output is utf-8"))
}

fn write_json<T: Serialize>(value: &T, out: &mut dyn Write) -> Result<(), HarnessError> {
    serde_json::to_writer_pretty(&mut *out, value)?;
    writeln!(out).map_err(|source| HarnessError::Io {
        path: "<json>".into(),
        source,
    })
}

/// Something the harness can write out.
#[derive(Debug, Clone, Copy)]
pub enum Output<'a> {
    Solve(&'a SolveReport),
    Sweep(&'a SweepResult),
}

/// Writes `item` to `path`, or to stdout when `path` is `None`. Solve
/// reports are JSON only.
pub fn emit(item: Output<'_>, format: OutputFormat, path: Option<&Path>) -> Result<(), HarnessError> {
    if let (Output::Solve(_), OutputFormat::Csv) = (item, format) {
        return Err(HarnessError::UnsupportedFormat("solve output is JSON only"));
    }
    let io_err = |source| HarnessError::Io {
        path: path.map_or("<stdout>".into(), |p| p.display().to_string()),
        source,
    };
    let mut out: Box<dyn Write> = match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(io_err)?)),
        None => Box::new(std::io::stdout().lock()),
    };
    match (item, format) {
        (Output::Sweep(s), OutputFormat::Csv) => write_sweep_csv(s, &mut out)?,
        (Output::Sweep(s), OutputFormat::Json) => write_json(s, &mut out)?,
        (Output::Solve(r), _) => write_json(r, &mut out)?,
    }
    out.flush().map_err(io_err)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{SweepRecord, SweepResult};

    fn metrics() -> Metrics {
        Metrics {
            total_satisfaction: 1234.567890123,
            weighted_objective: 98765.4321,
            total_cost: 1000.0,
            social_welfare: 234.567890123,
            normalized_satisfaction: vec![0.5, 1.0 / 3.0],
            curtailment: vec![1.0, 2.0],
            total_curtailment: 0.125,
            losses: 0.125,
        }
    }

    #[test]
    fn csv_header_and_rows() {
        let result = SweepResult {
            case: "t".into(),
            aggregators: vec![(2, 1), (2, 2)],
            records: vec![
                SweepRecord {
                    scale_pct: 10.0,
                    status: "converged".into(),
                    iterations: 12,
                    metrics: Some(metrics()),
                },
                SweepRecord {
                    scale_pct: 12.0,
                    status: "numerical_failure".into(),
                    iterations: 0,
                    metrics: None,
                },
            ],
        };
        let text = sweep_csv_string(&result).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[0].ends_with("losses_mw,norm_sat_2_1,norm_sat_2_2"));
        assert!(lines[1].contains("0.3333333333333333"));
        assert_eq!(lines[2].split(',').count(), 11);
    }

    #[test]
    fn numbers_round_trip() {
        for v in [1.0 / 3.0, 1e-17, 123_456_789.123_456_79, -0.0] {
            assert_eq!(number(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(number(f64::NAN), "");
    }
}
