//! Feasibility restoration: an elastic reformulation that minimizes the ℓ1
//! constraint violation near a reference point.
//!
//! ```text
//!     min  ρ Σ (p_E + n_E + p_I) + ζ/2 ‖D (x − x_R)‖²
//!     s.t. c_E(x) − p_E + n_E = 0,  c_I(x) − p_I ≤ 0,  p, n ≥ 0
//! ```

use crate::linalg::{norm_inf, DenseMatrix};
use crate::Scalar;

use super::ipm::run;
use super::{Nlp, SolverOptions};

const RHO: f64 = 1.0;
/// Required relative reduction of the infeasibility.
const REDUCTION: f64 = 0.9;
const ELASTIC_FLOOR: f64 = 1e-4;

struct Elastic<'a, T> {
    inner: &'a dyn Nlp<T>,
    reference: Vec<T>,
    weights: Vec<T>,
    zeta: T,
    lower: Vec<T>,
    upper: Vec<T>,
    start: Vec<T>,
    n: usize,
    me: usize,
    mi: usize,
}

impl<'a, T: Scalar> Elastic<'a, T> {
    fn new(inner: &'a dyn Nlp<T>, reference: &[T], mu: T) -> Self {
        let n = inner.num_variables();
        let me = inner.num_equalities();
        let mi = inner.num_inequalities();
        let weights = reference
            .iter()
            .map(|&r| T::one().min(T::one() / r.abs()))
            .collect();
        let mut lower = inner.lower_bounds().to_vec();
        let mut upper = inner.upper_bounds().to_vec();
        lower.extend(std::iter::repeat_n(T::zero(), 2 * me + mi));
        upper.extend(std::iter::repeat_n(T::infinity(), 2 * me + mi));

        let floor = T::lit(ELASTIC_FLOOR);
        let ce = inner.equalities(reference);
        let ci = inner.inequalities(reference);
        let mut start = reference.to_vec();
        start.extend(ce.iter().map(|&c| c.max(T::zero()) + floor));
        start.extend(ce.iter().map(|&c| (-c).max(T::zero()) + floor));
        start.extend(ci.iter().map(|&c| c.max(T::zero()) + floor));
        Self {
            inner,
            reference: reference.to_vec(),
            weights,
            zeta: mu.sqrt(),
            lower,
            upper,
            start,
            n,
            me,
            mi,
        }
    }
}

impl<T: Scalar> Nlp<T> for Elastic<'_, T> {
    fn num_variables(&self) -> usize {
        self.n + 2 * self.me + self.mi
    }

    fn num_equalities(&self) -> usize {
        self.me
    }

    fn num_inequalities(&self) -> usize {
        self.mi
    }

    fn lower_bounds(&self) -> &[T] {
        &self.lower
    }

    fn upper_bounds(&self) -> &[T] {
        &self.upper
    }

    fn initial_point(&self) -> Vec<T> {
        self.start.clone()
    }

    fn objective(&self, x: &[T]) -> T {
        let rho = T::lit(RHO);
        let mut f = x[self.n..].iter().fold(T::zero(), |acc, &v| acc + rho * v);
        for i in 0..self.n {
            let d = self.weights[i] * (x[i] - self.reference[i]);
            f += T::lit(0.5) * self.zeta * d * d;
        }
        f
    }

    fn gradient(&self, x: &[T]) -> Vec<T> {
        let mut g = vec![T::lit(RHO); self.num_variables()];
        for i in 0..self.n {
            let w = self.weights[i];
            g[i] = self.zeta * w * w * (x[i] - self.reference[i]);
        }
        g
    }

    fn equalities(&self, x: &[T]) -> Vec<T> {
        let mut c = self.inner.equalities(&x[..self.n]);
        let p = self.n;
        let q = self.n + self.me;
        for k in 0..self.me {
            c[k] += x[q + k] - x[p + k];
        }
        c
    }

    fn inequalities(&self, x: &[T]) -> Vec<T> {
        let mut c = self.inner.inequalities(&x[..self.n]);
        let p = self.n + 2 * self.me;
        for k in 0..self.mi {
            c[k] -= x[p + k];
        }
        c
    }

    fn equality_jacobian(&self, x: &[T]) -> DenseMatrix<T> {
        let inner = self.inner.equality_jacobian(&x[..self.n]);
        let mut j = DenseMatrix::zeros(self.me, self.num_variables());
        for r in 0..self.me {
            j.row_mut(r)[..self.n].copy_from_slice(inner.row(r));
            j.row_mut(r)[self.n + r] = -T::one();
            j.row_mut(r)[self.n + self.me + r] = T::one();
        }
        j
    }

    fn inequality_jacobian(&self, x: &[T]) -> DenseMatrix<T> {
        let inner = self.inner.inequality_jacobian(&x[..self.n]);
        let mut j = DenseMatrix::zeros(self.mi, self.num_variables());
        for r in 0..self.mi {
            j.row_mut(r)[..self.n].copy_from_slice(inner.row(r));
            j.row_mut(r)[self.n + 2 * self.me + r] = -T::one();
        }
        j
    }

    fn lagrangian_hessian(&self, x: &[T], obj_factor: T, y_eq: &[T], y_ineq: &[T]) -> DenseMatrix<T> {
        let inner = self
            .inner
            .lagrangian_hessian(&x[..self.n], T::zero(), y_eq, y_ineq);
        let dim = self.num_variables();
        let mut h = DenseMatrix::zeros(dim, dim);
        for i in 0..self.n {
            h.row_mut(i)[..self.n].copy_from_slice(inner.row(i));
            let w = self.weights[i];
            h[(i, i)] += obj_factor * self.zeta * w * w;
        }
        h
    }

    fn variable_name(&self, index: usize) -> String {
        if index < self.n {
            self.inner.variable_name(index)
        } else {
            format!("elastic[{}]", index - self.n)
        }
    }
}

fn infeasibility<T: Scalar>(nlp: &dyn Nlp<T>, x: &[T]) -> T {
    let ce = nlp.equalities(x);
    let ci = nlp.inequalities(x);
    ci.iter()
        .fold(norm_inf(&ce), |m, &c| m.max(c.max(T::zero())))
}

/// Returns a point with reduced constraint violation, or `None` when the
/// elastic problem settles at a point that is not more feasible.
pub(super) fn restore<T: Scalar>(
    nlp: &dyn Nlp<T>,
    opts: &SolverOptions,
    x: &[T],
    mu: T,
    tol: T,
    theta: T,
) -> Option<Vec<T>> {
    let elastic = Elastic::new(nlp, x, mu);
    let inner_opts = SolverOptions {
        tol: opts.tol.max(1e-8),
        mu_init: mu.as_f64().max(opts.tol),
        ..*opts
    };
    let sol = run(&elastic, &inner_opts, false).ok()?;
    let x_new = sol.x[..elastic.n].to_vec();
    let before = theta.max(infeasibility(nlp, x));
    let after = infeasibility(nlp, &x_new);
    if !after.is_finite() {
        return None;
    }
    if after <= tol || after <= T::lit(REDUCTION) * before {
        Some(x_new)
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// `x0² + x1² = 1` with `x ∈ [−2, 2]²` and `x0 ≤ 0.5`.
    struct Circle {
        lower: Vec<f64>,
        upper: Vec<f64>,
    }

    impl Circle {
        fn new() -> Self {
            Self {
                lower: vec![-2.0, -2.0],
                upper: vec![2.0, 2.0],
            }
        }
    }

    impl Nlp<f64> for Circle {
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
            &self.lower
        }
        fn upper_bounds(&self) -> &[f64] {
            &self.upper
        }
        fn initial_point(&self) -> Vec<f64> {
            vec![0.1, 0.1]
        }
        fn objective(&self, x: &[f64]) -> f64 {
            x[0] + x[1]
        }
        fn gradient(&self, _x: &[f64]) -> Vec<f64> {
            vec![1.0, 1.0]
        }
        fn equalities(&self, x: &[f64]) -> Vec<f64> {
            vec![x[0] * x[0] + x[1] * x[1] - 1.0]
        }
        fn inequalities(&self, x: &[f64]) -> Vec<f64> {
            vec![x[0] - 0.5]
        }
        fn equality_jacobian(&self, x: &[f64]) -> DenseMatrix<f64> {
            DenseMatrix::from_rows(&[vec![2.0 * x[0], 2.0 * x[1]]])
        }
        fn inequality_jacobian(&self, _x: &[f64]) -> DenseMatrix<f64> {
            DenseMatrix::from_rows(&[vec![1.0, 0.0]])
        }
        fn lagrangian_hessian(&self, _x: &[f64], _f: f64, y: &[f64], _yi: &[f64]) -> DenseMatrix<f64> {
            DenseMatrix::from_rows(&[vec![2.0 * y[0], 0.0], vec![0.0, 2.0 * y[0]]])
        }
    }

    #[test]
    fn restoration_reduces_violation() {
        let nlp = Circle::new();
        let x = [0.1, 0.1];
        let before = infeasibility(&nlp, &x);
        let out = restore(&nlp, &SolverOptions::default(), &x, 0.1, 1e-6, before).unwrap();
        assert!(infeasibility(&nlp, &out) < 0.9 * before);
    }

    #[test]
    fn elastic_start_is_feasible() {
        let nlp = Circle::new();
        let e = Elastic::new(&nlp, &[0.9, 0.0], 0.1);
        let s = e.initial_point();
        assert!(e.equalities(&s)[0].abs() < 1e-12);
        assert!(e.inequalities(&s)[0] < 0.0);
    }

    #[test]
    fn solver_finds_circle_minimum() {
        let nlp = Circle::new();
        let sol = crate::solver::solve(&nlp, &SolverOptions::default()).unwrap();
        assert!(sol.converged(), "{:?}", sol.status);
        let r = -std::f64::consts::FRAC_1_SQRT_2;
        assert!((sol.x[0] - r).abs() < 1e-5 && (sol.x[1] - r).abs() < 1e-5);
    }
}
