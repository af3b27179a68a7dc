use crate::linalg::DenseMatrix;
use crate::Scalar;

/// A smooth nonlinear program in minimization form:
///
/// ```text
///     min f(x)   s.t.   c_E(x) = 0,   c_I(x) <= 0,   l <= x <= u
/// ```
///
/// Bounds may be infinite. Jacobians are dense, rows per constraint.
pub trait Nlp<T: Scalar> {
    fn num_variables(&self) -> usize;
    fn num_equalities(&self) -> usize;
    fn num_inequalities(&self) -> usize;
    fn lower_bounds(&self) -> &[T];
    fn upper_bounds(&self) -> &[T];
    fn initial_point(&self) -> Vec<T>;

    fn objective(&self, x: &[T]) -> T;
    fn gradient(&self, x: &[T]) -> Vec<T>;
    fn equalities(&self, x: &[T]) -> Vec<T>;
    fn inequalities(&self, x: &[T]) -> Vec<T>;
    fn equality_jacobian(&self, x: &[T]) -> DenseMatrix<T>;
    fn inequality_jacobian(&self, x: &[T]) -> DenseMatrix<T>;

    /// Hessian of `obj_factor·f + y_eqᵀ c_E + y_ineqᵀ c_I`.
    fn lagrangian_hessian(&self, x: &[T], obj_factor: T, y_eq: &[T], y_ineq: &[T])
        -> DenseMatrix<T>;

    fn variable_name(&self, index: usize) -> String {
        format!("x[{index}]")
    }

    fn equality_name(&self, index: usize) -> String {
        format!("eq[{index}]")
    }

    fn inequality_name(&self, index: usize) -> String {
        format!("ineq[{index}]")
    }
}
