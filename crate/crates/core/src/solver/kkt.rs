use serde::Serialize;

use crate::Scalar;

use super::{Nlp, Solution, SolverError};

/// Infinity-norm residuals of the first-order optimality conditions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KktReport {
    pub stationarity: f64,
    /// Largest bound or constraint violation.
    pub primal_feasibility: f64,
    /// Largest negative inequality or bound multiplier, as a magnitude.
    pub dual_feasibility: f64,
    pub complementarity: f64,
}

impl KktReport {
    pub fn max_residual(&self) -> f64 {
        self.stationarity
            .max(self.primal_feasibility)
            .max(self.dual_feasibility)
            .max(self.complementarity)
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.max_residual() <= tol
    }
}

/// Evaluates the KKT residuals of `solution` on `nlp` independently of the
/// solver's own bookkeeping.
pub fn kkt_check<T: Scalar, N: Nlp<T>>(nlp: &N, solution: &Solution<T>) -> Result<KktReport, SolverError> {
    let n = nlp.num_variables();
    let me = nlp.num_equalities();
    let mi = nlp.num_inequalities();
    if solution.x.len() != n {
        return Err(SolverError::DimensionMismatch {
            expected: n,
            got: solution.x.len(),
        });
    }
    if solution.y_eq.len() != me
        || solution.y_ineq.len() != mi
        || solution.z_lower.len() != n
        || solution.z_upper.len() != n
    {
        return Err(SolverError::MissingDuals);
    }
    let x = &solution.x;
    let lower = nlp.lower_bounds();
    let upper = nlp.upper_bounds();

    let mut grad = nlp.gradient(x);
    let je = nlp.equality_jacobian(x).tr_mul_vec(&solution.y_eq);
    let ji = nlp.inequality_jacobian(x).tr_mul_vec(&solution.y_ineq);
    let mut stationarity = 0.0f64;
    for i in 0..n {
        grad[i] += je[i] + ji[i] - solution.z_lower[i] + solution.z_upper[i];
        stationarity = stationarity.max(grad[i].as_f64().abs());
    }

    let ce = nlp.equalities(x);
    let ci = nlp.inequalities(x);
    let mut primal = ce.iter().fold(0.0f64, |m, c| m.max(c.as_f64().abs()));
    primal = ci.iter().fold(primal, |m, c| m.max(c.as_f64()));
    for i in 0..n {
        primal = primal
            .max((lower[i] - x[i]).as_f64())
            .max((x[i] - upper[i]).as_f64());
    }

    let dual = solution
        .y_ineq
        .iter()
        .chain(&solution.z_lower)
        .chain(&solution.z_upper)
        .fold(0.0f64, |m, v| m.max(-v.as_f64()));

    let mut compl = 0.0f64;
    for k in 0..mi {
        compl = compl.max((solution.y_ineq[k] * ci[k]).as_f64().abs());
    }
    for i in 0..n {
        if lower[i].is_finite() {
            compl = compl.max((solution.z_lower[i] * (x[i] - lower[i])).as_f64().abs());
        }
        if upper[i].is_finite() {
            compl = compl.max((solution.z_upper[i] * (upper[i] - x[i])).as_f64().abs());
        }
    }

    Ok(KktReport {
        stationarity,
        primal_feasibility: primal.max(0.0),
        dual_feasibility: dual,
        complementarity: compl,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::DenseMatrix;
    use crate::solver::Status;

    /// min (x0 − 1)² + (x1 − 3)²  s.t. x0 + x1 = 1, x0 − 0.2 ≤ 0, x ∈ [0, 5]².
    struct Quad {
        l: Vec<f64>,
        u: Vec<f64>,
    }

    impl Nlp<f64> for Quad {
        fn num_variables(&self) -> usize {
            2
        }
        fn num_equalities(&self) -> usize {
            1
        }
        fn num_inequalities(&self) -> usize {
            1
        }
        fn lower_bounds(&self) -> &[f64] {
            &self.l
        }
        fn upper_bounds(&self) -> &[f64] {
            &self.u
        }
        fn initial_point(&self) -> Vec<f64> {
            vec![1.0, 1.0]
        }
        fn objective(&self, x: &[f64]) -> f64 {
            (x[0] - 1.0).powi(2) + (x[1] - 3.0).powi(2)
        }
        fn gradient(&self, x: &[f64]) -> Vec<f64> {
            vec![2.0 * (x[0] - 1.0), 2.0 * (x[1] - 3.0)]
        }
        fn equalities(&self, x: &[f64]) -> Vec<f64> {
            vec![x[0] + x[1] - 1.0]
        }
        fn inequalities(&self, x: &[f64]) -> Vec<f64> {
            vec![x[0] - 0.2]
        }
        fn equality_jacobian(&self, _x: &[f64]) -> DenseMatrix<f64> {
            DenseMatrix::from_rows(&[vec![1.0, 1.0]])
        }
        fn inequality_jacobian(&self, _x: &[f64]) -> DenseMatrix<f64> {
            DenseMatrix::from_rows(&[vec![1.0, 0.0]])
        }
        fn lagrangian_hessian(&self, _x: &[f64], f: f64, _y: &[f64], _yi: &[f64]) -> DenseMatrix<f64> {
            DenseMatrix::from_rows(&[vec![2.0 * f, 0.0], vec![0.0, 2.0 * f]])
        }
    }

    fn quad() -> Quad {
        Quad {
            l: vec![0.0, 0.0],
            u: vec![5.0, 5.0],
        }
    }

    fn empty_solution(x: Vec<f64>) -> Solution<f64> {
        Solution {
            status: Status::Converged,
            x,
            y_eq: vec![0.0],
            y_ineq: vec![0.0],
            z_lower: vec![0.0; 2],
            z_upper: vec![0.0; 2],
            iterations: 0,
            objective: 0.0,
            log: Vec::new(),
        }
    }

    #[test]
    fn solved_quadratic_passes() {
        let nlp = quad();
        let sol = crate::solver::solve(&nlp, &Default::default()).unwrap();
        assert!(sol.converged());
        assert!((sol.x[0] - 0.0).abs() < 1e-6 && (sol.x[1] - 1.0).abs() < 1e-6, "{:?}", sol.x);
        let report = kkt_check(&nlp, &sol).unwrap();
        assert!(report.passes(1e-6), "{report:?}");
    }

    #[test]
    fn zero_duals_report_gradient_norm() {
        let nlp = quad();
        let report = kkt_check(&nlp, &empty_solution(vec![0.5, 0.5])).unwrap();
        assert!((report.stationarity - 5.0).abs() < 1e-12);
    }

    #[test]
    fn bound_violation_is_primal_residual() {
        let nlp = quad();
        let report = kkt_check(&nlp, &empty_solution(vec![-0.25, 1.25])).unwrap();
        assert!((report.primal_feasibility - 0.25).abs() < 1e-12);
    }

    #[test]
    fn negative_multiplier_is_dual_residual() {
        let nlp = quad();
        let mut sol = empty_solution(vec![0.1, 0.9]);
        sol.y_ineq[0] = -0.7;
        let report = kkt_check(&nlp, &sol).unwrap();
        assert!((report.dual_feasibility - 0.7).abs() < 1e-12);
    }

    #[test]
    fn missing_duals_rejected() {
        let nlp = quad();
        let mut sol = empty_solution(vec![0.1, 0.9]);
        sol.y_eq.clear();
        assert_eq!(kkt_check(&nlp, &sol), Err(SolverError::MissingDuals));
    }
}
