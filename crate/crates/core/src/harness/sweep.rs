use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::casemodel::{scale_ses, CaseData};
use crate::solver::{SolverOptions, Status};

use super::{run_solve, HarnessError, Metrics};

/// One scale point of a sweep. `metrics` is absent only when the point
/// could not be set up or solved at all.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub scale_pct: f64,
    pub status: String,
    pub iterations: usize,
    pub metrics: Option<Metrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub case: String,
    /// `(bus id, 1-based index at the bus)` per aggregator.
    pub aggregators: Vec<(usize, usize)>,
    pub records: Vec<SweepRecord>,
}

/// Percentages `from, from + step, …` up to `to` inclusive.
pub fn scale_points(from_pct: f64, to_pct: f64, step_pct: f64) -> Result<Vec<f64>, HarnessError> {
    if !(from_pct > 0.0 && from_pct <= to_pct && step_pct > 0.0 && to_pct.is_finite()) {
        return Err(HarnessError::InvalidRange(format!(
            "from={from_pct} to={to_pct} step={step_pct}"
        )));
    }
    let count = ((to_pct - from_pct) / step_pct + 1e-9).floor() as usize + 1;
    Ok((0..count)
        .map(|i| {
            let v = from_pct + i as f64 * step_pct;
            (v * 1e9).round() / 1e9
        })
        .collect())
}

/// Re-solves `case` with every SES multiplied by each percentage in the
/// range. Points are independent cold starts and run in parallel; records
/// come back in range order.
pub fn ses_sweep(
    case: &CaseData,
    from_pct: f64,
    to_pct: f64,
    step_pct: f64,
    opts: &SolverOptions,
) -> Result<SweepResult, HarnessError> {
    opts.validate()?;
    let points = scale_points(from_pct, to_pct, step_pct)?;
    let records = points
        .par_iter()
        .map(|&pct| {
            let run = scale_ses(case, pct / 100.0)
                .map_err(HarnessError::from)
                .and_then(|scaled| run_solve(&scaled, opts));
            match run {
                Ok(r) => SweepRecord {
                    scale_pct: pct,
                    status: r.solution.status.as_str().to_string(),
                    iterations: r.solution.iterations,
                    metrics: Some(r.metrics),
                },
                Err(_) => SweepRecord {
                    scale_pct: pct,
                    status: Status::NumericalFailure.as_str().to_string(),
                    iterations: 0,
                    metrics: None,
                },
            }
        })
        .collect();
    Ok(SweepResult {
        case: case.name.clone(),
        aggregators: case.aggregator_labels(),
        records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_range_has_71_points() {
        let p = scale_points(10.0, 150.0, 2.0).unwrap();
        assert_eq!(p.len(), 71);
        assert_eq!(p[0], 10.0);
        assert_eq!(p[45], 100.0);
        assert_eq!(p[70], 150.0);
    }

    #[test]
    fn single_point_range() {
        assert_eq!(scale_points(100.0, 100.0, 2.0).unwrap(), vec![100.0]);
    }

    #[test]
    fn fractional_steps_do_not_drift() {
        let p = scale_points(10.0, 11.0, 0.1).unwrap();
        assert_eq!(p.len(), 11);
        assert_eq!(p[3], 10.3);
    }

    #[test]
    fn invalid_ranges_rejected() {
        assert!(scale_points(0.0, 10.0, 1.0).is_err());
        assert!(scale_points(20.0, 10.0, 1.0).is_err());
        assert!(scale_points(10.0, 20.0, 0.0).is_err());
    }
}
