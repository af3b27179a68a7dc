use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::Scalar;

use super::Nlp;

/// Relative-error threshold for a passing audit.
pub const AUDIT_TOLERANCE: f64 = 1e-6;
const FD_STEP: f64 = 1e-6;
const ROUNDING_ULPS: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditReport {
    pub points: usize,
    pub max_gradient_error: f64,
    pub max_jacobian_error: f64,
    /// Entry with the largest error, e.g. `d objective / d V[bus 3]`.
    pub worst_entry: Option<String>,
    pub passed: bool,
}

impl AuditReport {
    pub fn max_error(&self) -> f64 {
        self.max_gradient_error.max(self.max_jacobian_error)
    }
}

/// Relative disagreement between an analytic derivative and a central
/// difference, after discounting the rounding noise of the difference
/// quotient itself (`noise`).
fn relative_error(analytic: f64, fd: f64, noise: f64) -> f64 {
    ((analytic - fd).abs() - noise).max(0.0) / 1f64.max(analytic.abs()).max(fd.abs())
}

/// Rounding error bound of `(f₊ − f₋) / width`.
fn rounding_noise(f_plus: f64, f_minus: f64, width: f64, eps: f64) -> f64 {
    ROUNDING_ULPS * eps * f_plus.abs().max(f_minus.abs()).max(1.0) / width
}

fn sample_point<T: Scalar, N: Nlp<T>>(nlp: &N, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let lower = nlp.lower_bounds();
    let upper = nlp.upper_bounds();
    let start = nlp.initial_point();
    (0..nlp.num_variables())
        .map(|i| {
            let (l, u) = (lower[i].as_f64(), upper[i].as_f64());
            if l == u {
                l
            } else if l.is_finite() && u.is_finite() {
                l + (u - l) * rng.gen_range(0.05..0.95)
            } else {
                let x0 = start[i].as_f64();
                let v = x0 + rng.gen_range(-0.5..0.5) * x0.abs().max(1.0);
                v.max(l + 1e-3).min(u - 1e-3)
            }
        })
        .collect()
}

fn to_t<T: Scalar>(x: &[f64]) -> Vec<T> {
    x.iter().map(|&v| T::lit(v)).collect()
}

/// Compares analytic gradients and constraint Jacobians with central finite
/// differences at `n_points` seeded random interior points.
pub fn finite_difference_audit<T: Scalar, N: Nlp<T>>(nlp: &N, n_points: usize, seed: u64) -> AuditReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let eps = T::epsilon().as_f64();
    let n = nlp.num_variables();
    let me = nlp.num_equalities();
    let mi = nlp.num_inequalities();
    let mut max_grad = 0.0f64;
    let mut max_jac = 0.0f64;
    let mut worst: Option<(f64, String)> = None;
    let mut note = |err: f64, name: &dyn Fn() -> String| {
        if worst.as_ref().map_or(err > 0.0, |(w, _)| err > *w) {
            worst = Some((err, name()));
        }
    };

    for _ in 0..n_points.max(1) {
        let x = sample_point(nlp, &mut rng);
        let xt: Vec<T> = to_t(&x);
        let grad = nlp.gradient(&xt);
        let je = nlp.equality_jacobian(&xt);
        let ji = nlp.inequality_jacobian(&xt);
        let mut xp = x.clone();
        for j in 0..n {
            let h = FD_STEP * x[j].abs().max(1.0);
            xp[j] = x[j] + h;
            let plus: Vec<T> = to_t(&xp);
            xp[j] = x[j] - h;
            let minus: Vec<T> = to_t(&xp);
            xp[j] = x[j];
            // the actual step after rounding
            let width = plus[j].as_f64() - minus[j].as_f64();

            let (fp, fm) = (nlp.objective(&plus).as_f64(), nlp.objective(&minus).as_f64());
            let fd = (fp - fm) / width;
            let err = relative_error(grad[j].as_f64(), fd, rounding_noise(fp, fm, width, eps));
            max_grad = max_grad.max(err);
            note(err, &|| format!("d objective / d {}", nlp.variable_name(j)));

            let (ep, em) = (nlp.equalities(&plus), nlp.equalities(&minus));
            for r in 0..me {
                let (fp, fm) = (ep[r].as_f64(), em[r].as_f64());
                let fd = (fp - fm) / width;
                let err = relative_error(je[(r, j)].as_f64(), fd, rounding_noise(fp, fm, width, eps));
                max_jac = max_jac.max(err);
                note(err, &|| format!("d {} / d {}", nlp.equality_name(r), nlp.variable_name(j)));
            }
            let (ip, im) = (nlp.inequalities(&plus), nlp.inequalities(&minus));
            for r in 0..mi {
                let (fp, fm) = (ip[r].as_f64(), im[r].as_f64());
                let fd = (fp - fm) / width;
                let err = relative_error(ji[(r, j)].as_f64(), fd, rounding_noise(fp, fm, width, eps));
                max_jac = max_jac.max(err);
                note(err, &|| format!("d {} / d {}", nlp.inequality_name(r), nlp.variable_name(j)));
            }
        }
    }

    AuditReport {
        points: n_points.max(1),
        max_gradient_error: max_grad,
        max_jacobian_error: max_jac,
        worst_entry: worst.map(|(_, name)| name),
        passed: max_grad < AUDIT_TOLERANCE && max_jac < AUDIT_TOLERANCE,
    }
}
