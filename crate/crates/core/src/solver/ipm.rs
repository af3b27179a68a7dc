//! Primal-dual interior-point method with slack variables on the
//! inequalities, a monotone barrier schedule, inertia-corrected Newton steps
//! and an ℓ1-merit backtracking line search with one second-order
//! correction.
//!
//! The barrier subproblem for a fixed `μ` is
//!
//! ```text
//!     min f(x) − μ Σ ln(x − l) − μ Σ ln(u − x) − μ Σ ln s
//!     s.t. c_E(x) = 0,  c_I(x) + s = 0
//! ```
//!
//! and each iteration solves the condensed primal-dual system
//!
//! ```text
//!     [ W + Σ_x + δ_w I   J_Eᵀ      J_Iᵀ          ] [dx ]     [ ∇φ + J_Eᵀy_E + J_Iᵀy_I            ]
//!     [ J_E               −δ_c I    0             ] [dy_E] = −[ c_E                                ]
//!     [ J_I               0         −Σ_s⁻¹ − δ_c I] [dy_I]     [ c_I + s + Σ_s⁻¹(μ/s − y_I)        ]
//! ```

use crate::linalg::{dot, norm_1, norm_inf, DenseMatrix, Inertia, LdlFactor};
use crate::Scalar;

use super::restoration::restore;
use super::{HessianMode, IterationRecord, Nlp, Solution, SolverError, SolverOptions, Status};

const KAPPA_EPSILON: f64 = 10.0;
const KAPPA_SIGMA: f64 = 1e10;
const ARMIJO_ETA: f64 = 1e-4;
const PENALTY_RHO: f64 = 0.1;
const MIN_STEP: f64 = 1e-12;
const MAX_SOC: usize = 4;
const MAX_RESTORATIONS: usize = 4;
const DELTA_W_INIT: f64 = 1e-4;
const DELTA_W_MAX: f64 = 1e40;
const DELTA_C: f64 = 1e-8;
const COMPLEMENTARITY_FACTOR: f64 = 0.1;

/// Solves `nlp` from its own initial point.
pub fn solve<T: Scalar, N: Nlp<T>>(nlp: &N, opts: &SolverOptions) -> Result<Solution<T>, SolverError> {
    run(nlp, opts, opts.restoration)
}

/// Variable classification shared by all helpers.
struct Bounds<T> {
    lower: Vec<T>,
    upper: Vec<T>,
    has_l: Vec<bool>,
    has_u: Vec<bool>,
    fixed: Vec<bool>,
}

impl<T: Scalar> Bounds<T> {
    fn new(nlp: &dyn Nlp<T>) -> Result<Self, SolverError> {
        let lower = nlp.lower_bounds().to_vec();
        let upper = nlp.upper_bounds().to_vec();
        let n = nlp.num_variables();
        let mut has_l = vec![false; n];
        let mut has_u = vec![false; n];
        let mut fixed = vec![false; n];
        for i in 0..n {
            if lower[i] > upper[i] || lower[i].is_nan() || upper[i].is_nan() {
                return Err(SolverError::EmptyBox { index: i });
            }
            if lower[i] == upper[i] {
                fixed[i] = true;
            } else {
                has_l[i] = lower[i].is_finite();
                has_u[i] = upper[i].is_finite();
            }
        }
        Ok(Self {
            lower,
            upper,
            has_l,
            has_u,
            fixed,
        })
    }

    /// Moves `x` strictly inside its bounds.
    fn push_inside(&self, x: &mut [T], push: T) {
        for i in 0..x.len() {
            if self.fixed[i] {
                x[i] = self.lower[i];
                continue;
            }
            let (l, u) = (self.lower[i], self.upper[i]);
            let width = u - l;
            if self.has_l[i] {
                let mut p = push * l.abs().max(T::one());
                if self.has_u[i] {
                    p = p.min(push * width);
                }
                x[i] = x[i].max(l + p);
            }
            if self.has_u[i] {
                let mut p = push * u.abs().max(T::one());
                if self.has_l[i] {
                    p = p.min(push * width);
                }
                x[i] = x[i].min(u - p);
            }
        }
    }
}

#[derive(Clone)]
struct Iterate<T> {
    x: Vec<T>,
    s: Vec<T>,
    y_eq: Vec<T>,
    y_ineq: Vec<T>,
    z_l: Vec<T>,
    z_u: Vec<T>,
    z_s: Vec<T>,
}

#[derive(Clone)]
struct Eval<T> {
    f: T,
    grad: Vec<T>,
    c_eq: Vec<T>,
    c_ineq: Vec<T>,
}

fn eval_point<T: Scalar>(nlp: &dyn Nlp<T>, x: &[T]) -> Eval<T> {
    Eval {
        f: nlp.objective(x),
        grad: nlp.gradient(x),
        c_eq: nlp.equalities(x),
        c_ineq: nlp.inequalities(x),
    }
}

/// Trial point values needed by the line search.
struct Trial<T> {
    x: Vec<T>,
    s: Vec<T>,
    f: T,
    c_eq: Vec<T>,
    c_ineq: Vec<T>,
}

fn barrier_value<T: Scalar>(b: &Bounds<T>, x: &[T], s: &[T], f: T, mu: T) -> T {
    let mut phi = f;
    for i in 0..x.len() {
        if b.has_l[i] {
            phi -= mu * (x[i] - b.lower[i]).ln();
        }
        if b.has_u[i] {
            phi -= mu * (b.upper[i] - x[i]).ln();
        }
    }
    for &si in s {
        phi -= mu * si.ln();
    }
    phi
}

fn infeasibility_l1<T: Scalar>(c_eq: &[T], c_ineq: &[T], s: &[T]) -> T {
    norm_1(c_eq)
        + c_ineq
            .iter()
            .zip(s)
            .fold(T::zero(), |acc, (&c, &si)| acc + (c + si).abs())
}

fn infeasibility_inf<T: Scalar>(c_eq: &[T], c_ineq: &[T], s: &[T]) -> T {
    c_ineq
        .iter()
        .zip(s)
        .fold(norm_inf(c_eq), |m, (&c, &si)| m.max((c + si).abs()))
}

/// Fraction-to-boundary step for `v + α dv ≥ (1 − τ) v`.
fn max_step<T: Scalar>(values: impl Iterator<Item = (T, T)>, tau: T) -> T {
    let mut alpha = T::one();
    for (v, dv) in values {
        if dv < T::zero() {
            alpha = alpha.min(-tau * v / dv);
        }
    }
    alpha
}

struct Errors<T> {
    primal: T,
    dual: T,
    compl: T,
}

fn optimality_errors<T: Scalar>(
    b: &Bounds<T>,
    it: &Iterate<T>,
    ev: &Eval<T>,
    je: &DenseMatrix<T>,
    ji: &DenseMatrix<T>,
    mu: T,
) -> Errors<T> {
    let n = it.x.len();
    let jty_e = je.tr_mul_vec(&it.y_eq);
    let jty_i = ji.tr_mul_vec(&it.y_ineq);
    let mut dual = T::zero();
    for i in 0..n {
        if b.fixed[i] {
            continue;
        }
        let r = ev.grad[i] + jty_e[i] + jty_i[i] - it.z_l[i] + it.z_u[i];
        dual = dual.max(r.abs());
    }
    for (y, z) in it.y_ineq.iter().zip(&it.z_s) {
        dual = dual.max((*y - *z).abs());
    }
    let mut compl = T::zero();
    for i in 0..n {
        if b.has_l[i] {
            compl = compl.max(((it.x[i] - b.lower[i]) * it.z_l[i] - mu).abs());
        }
        if b.has_u[i] {
            compl = compl.max(((b.upper[i] - it.x[i]) * it.z_u[i] - mu).abs());
        }
    }
    for (s, z) in it.s.iter().zip(&it.z_s) {
        compl = compl.max((*s * *z - mu).abs());
    }
    Errors {
        primal: infeasibility_inf(&ev.c_eq, &ev.c_ineq, &it.s),
        dual,
        compl,
    }
}

fn lagrangian_hessian<T: Scalar>(
    nlp: &dyn Nlp<T>,
    mode: HessianMode,
    x: &[T],
    y_eq: &[T],
    y_ineq: &[T],
) -> DenseMatrix<T> {
    match mode {
        HessianMode::Exact => nlp.lagrangian_hessian(x, T::one(), y_eq, y_ineq),
        HessianMode::FiniteDifference => {
            let n = x.len();
            let lag_grad = |x: &[T]| {
                let mut g = nlp.gradient(x);
                let ge = nlp.equality_jacobian(x).tr_mul_vec(y_eq);
                let gi = nlp.inequality_jacobian(x).tr_mul_vec(y_ineq);
                for i in 0..n {
                    g[i] += ge[i] + gi[i];
                }
                g
            };
            let mut h = DenseMatrix::zeros(n, n);
            let mut xp = x.to_vec();
            for j in 0..n {
                let step = T::lit(1e-6) * x[j].abs().max(T::one());
                xp[j] = x[j] + step;
                let gp = lag_grad(&xp);
                xp[j] = x[j] - step;
                let gm = lag_grad(&xp);
                xp[j] = x[j];
                for i in 0..n {
                    h[(i, j)] = (gp[i] - gm[i]) / (step + step);
                }
            }
            for i in 0..n {
                for j in 0..i {
                    let avg = T::lit(0.5) * (h[(i, j)] + h[(j, i)]);
                    h[(i, j)] = avg;
                    h[(j, i)] = avg;
                }
            }
            h
        }
    }
}

struct Newton<T> {
    dx: Vec<T>,
    ds: Vec<T>,
    dy_eq: Vec<T>,
    dy_ineq: Vec<T>,
    dz_l: Vec<T>,
    dz_u: Vec<T>,
    dz_s: Vec<T>,
}

/// Factored KKT system of one iteration.
struct KktSystem<T> {
    matrix: DenseMatrix<T>,
    factor: LdlFactor<T>,
    delta_w: T,
    sigma_s: Vec<T>,
    /// `W + Σ_x + δ_w I` for the merit curvature term.
    hessian: DenseMatrix<T>,
}

impl<T: Scalar> KktSystem<T> {
    fn solve(&self, rhs: &[T]) -> Option<Vec<T>> {
        let mut sol = rhs.to_vec();
        if !self.factor.solve_in_place(&mut sol) {
            return None;
        }
        // two rounds of iterative refinement
        for _ in 0..2 {
            let r = self.matrix.mul_vec(&sol);
            let mut res: Vec<T> = rhs.iter().zip(&r).map(|(&a, &b)| a - b).collect();
            if norm_inf(&res) <= T::epsilon() * norm_inf(rhs).max(T::one()) {
                break;
            }
            if !self.factor.solve_in_place(&mut res) {
                break;
            }
            for (s, d) in sol.iter_mut().zip(&res) {
                *s += *d;
            }
        }
        Some(sol)
    }
}

#[allow(clippy::too_many_arguments)]
fn factor_kkt<T: Scalar>(
    nlp: &dyn Nlp<T>,
    opts: &SolverOptions,
    b: &Bounds<T>,
    it: &Iterate<T>,
    je: &DenseMatrix<T>,
    ji: &DenseMatrix<T>,
    mu: T,
    delta_w_last: &mut T,
) -> Option<KktSystem<T>> {
    let n = it.x.len();
    let me = je.rows();
    let mi = ji.rows();
    let dim = n + me + mi;
    let w = lagrangian_hessian(nlp, opts.hessian, &it.x, &it.y_eq, &it.y_ineq);

    let mut sigma_x = vec![T::zero(); n];
    for i in 0..n {
        if b.has_l[i] {
            sigma_x[i] += it.z_l[i] / (it.x[i] - b.lower[i]);
        }
        if b.has_u[i] {
            sigma_x[i] += it.z_u[i] / (b.upper[i] - it.x[i]);
        }
    }
    let sigma_s: Vec<T> = it.s.iter().zip(&it.z_s).map(|(&s, &z)| z / s).collect();

    let build = |delta_w: T, delta_c: T| {
        let mut k = DenseMatrix::zeros(dim, dim);
        for i in 0..n {
            if b.fixed[i] {
                k[(i, i)] = T::one();
                continue;
            }
            for j in 0..n {
                if !b.fixed[j] {
                    k[(i, j)] = w[(i, j)];
                }
            }
            k[(i, i)] += sigma_x[i] + delta_w;
        }
        for r in 0..me {
            for j in 0..n {
                if !b.fixed[j] {
                    let v = je[(r, j)];
                    k[(n + r, j)] = v;
                    k[(j, n + r)] = v;
                }
            }
            k[(n + r, n + r)] = -delta_c;
        }
        for r in 0..mi {
            for j in 0..n {
                if !b.fixed[j] {
                    let v = ji[(r, j)];
                    k[(n + me + r, j)] = v;
                    k[(j, n + me + r)] = v;
                }
            }
            k[(n + me + r, n + me + r)] = -T::one() / sigma_s[r] - delta_c;
        }
        k
    };
    let target = Inertia {
        positive: n,
        negative: me + mi,
        zero: 0,
    };

    let mut delta_w = T::zero();
    let mut delta_c = T::zero();
    let mut matrix = build(delta_w, delta_c);
    let mut factor = LdlFactor::factor(&matrix);
    if factor.is_singular() {
        delta_c = T::lit(DELTA_C) * mu.powf(T::lit(0.25));
        matrix = build(delta_w, delta_c);
        factor = LdlFactor::factor(&matrix);
    }
    let mut first = true;
    while factor.inertia() != target {
        delta_w = if first {
            if *delta_w_last == T::zero() {
                T::lit(DELTA_W_INIT)
            } else {
                (*delta_w_last / T::lit(3.0)).max(T::lit(1e-20))
            }
        } else if *delta_w_last == T::zero() {
            delta_w * T::lit(100.0)
        } else {
            delta_w * T::lit(8.0)
        };
        first = false;
        if delta_w > T::lit(DELTA_W_MAX) || !delta_w.is_finite() {
            return None;
        }
        matrix = build(delta_w, delta_c);
        factor = LdlFactor::factor(&matrix);
        // too few negative pivots means the constraint Jacobian is (nearly)
        // rank deficient, which no amount of δ_w repairs
        let inertia = factor.inertia();
        if delta_c == T::zero() && (inertia.zero > 0 || inertia.negative < target.negative) {
            delta_c = T::lit(DELTA_C) * mu.powf(T::lit(0.25));
            matrix = build(delta_w, delta_c);
            factor = LdlFactor::factor(&matrix);
        }
    }
    if delta_w > T::zero() {
        *delta_w_last = delta_w;
    }

    let mut hessian = w;
    for i in 0..n {
        hessian[(i, i)] += sigma_x[i] + delta_w;
    }
    Some(KktSystem {
        matrix,
        factor,
        delta_w,
        sigma_s,
        hessian,
    })
}

/// Right-hand side of the condensed system for the given constraint
/// residuals `c_E` and `c_I + s`.
#[allow(clippy::too_many_arguments)]
fn kkt_rhs<T: Scalar>(
    b: &Bounds<T>,
    it: &Iterate<T>,
    grad: &[T],
    jty: &[T],
    r_eq: &[T],
    r_ineq: &[T],
    sigma_s: &[T],
    mu: T,
) -> Vec<T> {
    let n = it.x.len();
    let mut rhs = Vec::with_capacity(n + r_eq.len() + r_ineq.len());
    for i in 0..n {
        if b.fixed[i] {
            rhs.push(T::zero());
            continue;
        }
        let mut r = grad[i] + jty[i];
        if b.has_l[i] {
            r -= mu / (it.x[i] - b.lower[i]);
        }
        if b.has_u[i] {
            r += mu / (b.upper[i] - it.x[i]);
        }
        rhs.push(-r);
    }
    rhs.extend(r_eq.iter().map(|&c| -c));
    for (k, &c) in r_ineq.iter().enumerate() {
        rhs.push(-c - (mu / it.s[k] - it.y_ineq[k]) / sigma_s[k]);
    }
    rhs
}

fn recover_direction<T: Scalar>(
    b: &Bounds<T>,
    it: &Iterate<T>,
    sys: &KktSystem<T>,
    sol: &[T],
    mu: T,
) -> Newton<T> {
    let n = it.x.len();
    let me = it.y_eq.len();
    let dx = sol[..n].to_vec();
    let dy_eq = sol[n..n + me].to_vec();
    let dy_ineq = sol[n + me..].to_vec();
    let ds: Vec<T> = (0..it.s.len())
        .map(|k| (mu / it.s[k] - it.y_ineq[k] - dy_ineq[k]) / sys.sigma_s[k])
        .collect();
    let mut dz_l = vec![T::zero(); n];
    let mut dz_u = vec![T::zero(); n];
    for i in 0..n {
        if b.has_l[i] {
            let gap = it.x[i] - b.lower[i];
            dz_l[i] = mu / gap - it.z_l[i] - it.z_l[i] / gap * dx[i];
        }
        if b.has_u[i] {
            let gap = b.upper[i] - it.x[i];
            dz_u[i] = mu / gap - it.z_u[i] + it.z_u[i] / gap * dx[i];
        }
    }
    let dz_s = (0..it.s.len())
        .map(|k| mu / it.s[k] - it.z_s[k] - sys.sigma_s[k] * ds[k])
        .collect();
    Newton {
        dx,
        ds,
        dy_eq,
        dy_ineq,
        dz_l,
        dz_u,
        dz_s,
    }
}

fn primal_step_limit<T: Scalar>(b: &Bounds<T>, it: &Iterate<T>, d: &Newton<T>, tau: T) -> T {
    let n = it.x.len();
    let xl = (0..n)
        .filter(|&i| b.has_l[i])
        .map(|i| (it.x[i] - b.lower[i], d.dx[i]));
    let xu = (0..n)
        .filter(|&i| b.has_u[i])
        .map(|i| (b.upper[i] - it.x[i], -d.dx[i]));
    let s = it.s.iter().copied().zip(d.ds.iter().copied());
    max_step(xl.chain(xu).chain(s), tau)
}

fn dual_step_limit<T: Scalar>(b: &Bounds<T>, it: &Iterate<T>, d: &Newton<T>, tau: T) -> T {
    let n = it.x.len();
    let zl = (0..n).filter(|&i| b.has_l[i]).map(|i| (it.z_l[i], d.dz_l[i]));
    let zu = (0..n).filter(|&i| b.has_u[i]).map(|i| (it.z_u[i], d.dz_u[i]));
    let zs = it.z_s.iter().copied().zip(d.dz_s.iter().copied());
    max_step(zl.chain(zu).chain(zs), tau)
}

fn make_trial<T: Scalar>(nlp: &dyn Nlp<T>, it: &Iterate<T>, d: &Newton<T>, alpha: T) -> Trial<T> {
    let x: Vec<T> = it.x.iter().zip(&d.dx).map(|(&x, &dx)| x + alpha * dx).collect();
    let s: Vec<T> = it.s.iter().zip(&d.ds).map(|(&s, &ds)| s + alpha * ds).collect();
    Trial {
        f: nlp.objective(&x),
        c_eq: nlp.equalities(&x),
        c_ineq: nlp.inequalities(&x),
        x,
        s,
    }
}

fn merit<T: Scalar>(b: &Bounds<T>, t: &Trial<T>, mu: T, nu: T) -> T {
    let phi = barrier_value(b, &t.x, &t.s, t.f, mu);
    let theta = infeasibility_l1(&t.c_eq, &t.c_ineq, &t.s);
    let m = phi + nu * theta;
    if m.is_finite() {
        m
    } else {
        T::infinity()
    }
}

/// Keeps bound multipliers within a factor of the primal-dual centrality
/// condition.
fn safeguard_multipliers<T: Scalar>(b: &Bounds<T>, it: &mut Iterate<T>, mu: T) {
    let kappa = T::lit(KAPPA_SIGMA);
    let clamp = |z: T, gap: T| z.max(mu / (kappa * gap)).min(kappa * mu / gap);
    for i in 0..it.x.len() {
        if b.has_l[i] {
            it.z_l[i] = clamp(it.z_l[i], it.x[i] - b.lower[i]);
        }
        if b.has_u[i] {
            it.z_u[i] = clamp(it.z_u[i], b.upper[i] - it.x[i]);
        }
    }
    for k in 0..it.s.len() {
        it.z_s[k] = clamp(it.z_s[k], it.s[k]);
    }
}

fn initial_slacks<T: Scalar>(c_ineq: &[T], floor: T) -> Vec<T> {
    c_ineq
        .iter()
        .map(|&c| (-c).max(floor * c.abs().max(T::one())))
        .collect()
}

/// Bound multipliers of fixed variables absorb their stationarity residual.
fn fixed_multipliers<T: Scalar>(
    b: &Bounds<T>,
    it: &mut Iterate<T>,
    grad: &[T],
    je: &DenseMatrix<T>,
    ji: &DenseMatrix<T>,
) {
    let jty_e = je.tr_mul_vec(&it.y_eq);
    let jty_i = ji.tr_mul_vec(&it.y_ineq);
    for i in 0..it.x.len() {
        if b.fixed[i] {
            let r = grad[i] + jty_e[i] + jty_i[i];
            it.z_l[i] = r.max(T::zero());
            it.z_u[i] = (-r).max(T::zero());
        }
    }
}

pub(super) fn run<T: Scalar>(
    nlp: &dyn Nlp<T>,
    opts: &SolverOptions,
    allow_restoration: bool,
) -> Result<Solution<T>, SolverError> {
    opts.validate()?;
    let n = nlp.num_variables();
    let me = nlp.num_equalities();
    let mi = nlp.num_inequalities();
    let bounds = Bounds::new(nlp)?;
    let tau = T::lit(opts.tau);
    let tol = T::lit(opts.tol);
    let mu_min = T::lit(COMPLEMENTARITY_FACTOR * 0.1) * tol;

    let mut x = nlp.initial_point();
    if x.len() != n {
        return Err(SolverError::DimensionMismatch {
            expected: n,
            got: x.len(),
        });
    }
    bounds.push_inside(&mut x, T::lit(opts.bound_push));
    let mut ev = eval_point(nlp, &x);
    let s = initial_slacks(&ev.c_ineq, T::lit(opts.bound_push));
    let mut it = Iterate {
        x,
        s,
        y_eq: vec![T::zero(); me],
        y_ineq: vec![T::zero(); mi],
        z_l: (0..n)
            .map(|i| if bounds.has_l[i] { T::one() } else { T::zero() })
            .collect(),
        z_u: (0..n)
            .map(|i| if bounds.has_u[i] { T::one() } else { T::zero() })
            .collect(),
        z_s: vec![T::one(); mi],
    };

    let mut mu = T::lit(opts.mu_init);
    let mut nu = T::one();
    let mut delta_w_last = T::zero();
    let mut log: Vec<IterationRecord<T>> = Vec::new();
    let mut restorations = 0;
    let mut last_alpha = (T::zero(), T::zero(), T::zero(), false);
    let mut best: Option<(T, Iterate<T>, T)> = None;

    let mut je = nlp.equality_jacobian(&it.x);
    let mut ji = nlp.inequality_jacobian(&it.x);

    let mut status = Status::IterationLimit;
    let mut iterations = 0;
    for iter in 0..=opts.max_iter {
        iterations = iter;
        let e0 = optimality_errors(&bounds, &it, &ev, &je, &ji, T::zero());
        log.push(IterationRecord {
            iteration: iter,
            mu,
            objective: ev.f,
            primal_infeasibility: e0.primal,
            dual_infeasibility: e0.dual,
            complementarity: e0.compl,
            alpha_primal: last_alpha.0,
            alpha_dual: last_alpha.1,
            regularization: last_alpha.2,
            restoration: last_alpha.3,
        });
        let overall = e0.primal.max(e0.dual).max(e0.compl);
        if !overall.is_finite() {
            status = Status::NumericalFailure;
            break;
        }
        if best.as_ref().is_none_or(|(e, _, _)| overall < *e) {
            best = Some((overall, it.clone(), ev.f));
        }
        // complementarity is held an order tighter so the barrier leaves
        // no visible bias in the primal values
        if overall <= tol && e0.compl <= T::lit(COMPLEMENTARITY_FACTOR) * tol {
            status = Status::Converged;
            break;
        }
        if iter == opts.max_iter {
            break;
        }

        // monotone barrier update
        loop {
            let e = optimality_errors(&bounds, &it, &ev, &je, &ji, mu);
            let e_mu = e.primal.max(e.dual).max(e.compl);
            if e_mu <= T::lit(KAPPA_EPSILON) * mu && mu > mu_min {
                let next = (T::lit(opts.mu_factor) * mu).min(mu.powf(T::lit(1.5)));
                mu = next.max(mu_min);
            } else {
                break;
            }
        }

        let Some(sys) = factor_kkt(nlp, opts, &bounds, &it, &je, &ji, mu, &mut delta_w_last)
        else {
            status = Status::NumericalFailure;
            break;
        };
        let jty: Vec<T> = {
            let a = je.tr_mul_vec(&it.y_eq);
            let b = ji.tr_mul_vec(&it.y_ineq);
            a.iter().zip(&b).map(|(&u, &v)| u + v).collect()
        };
        let r_ineq: Vec<T> = ev.c_ineq.iter().zip(&it.s).map(|(&c, &s)| c + s).collect();
        let rhs = kkt_rhs(&bounds, &it, &ev.grad, &jty, &ev.c_eq, &r_ineq, &sys.sigma_s, mu);
        let Some(sol) = sys.solve(&rhs) else {
            status = Status::NumericalFailure;
            break;
        };
        let d = recover_direction(&bounds, &it, &sys, &sol, mu);

        // merit penalty and directional derivative
        let theta = infeasibility_l1(&ev.c_eq, &ev.c_ineq, &it.s);
        let mut grad_phi_d = dot(&ev.grad, &d.dx);
        for i in 0..n {
            if bounds.has_l[i] {
                grad_phi_d -= mu * d.dx[i] / (it.x[i] - bounds.lower[i]);
            }
            if bounds.has_u[i] {
                grad_phi_d += mu * d.dx[i] / (bounds.upper[i] - it.x[i]);
            }
        }
        for k in 0..mi {
            grad_phi_d -= mu * d.ds[k] / it.s[k];
        }
        if theta > T::zero() {
            let hd = sys.hessian.mul_vec(&d.dx);
            let mut curvature = dot(&d.dx, &hd);
            for k in 0..mi {
                curvature += sys.sigma_s[k] * d.ds[k] * d.ds[k];
            }
            let needed = (grad_phi_d + T::lit(0.5) * curvature.max(T::zero()))
                / ((T::one() - T::lit(PENALTY_RHO)) * theta);
            if nu < needed {
                nu = needed + T::one();
            }
        }
        let slope = grad_phi_d - nu * theta;

        let current = Trial {
            x: it.x.clone(),
            s: it.s.clone(),
            f: ev.f,
            c_eq: ev.c_eq.clone(),
            c_ineq: ev.c_ineq.clone(),
        };
        let merit0 = merit(&bounds, &current, mu, nu);
        let alpha_max = primal_step_limit(&bounds, &it, &d, tau);
        let alpha_z = dual_step_limit(&bounds, &it, &d, tau);

        let mut accepted: Option<(T, Trial<T>, Newton<T>, T)> = None;
        let tiny_step = (0..n).all(|i| {
            d.dx[i].abs() <= T::lit(10.0) * T::epsilon() * it.x[i].abs().max(T::one())
        });
        if tiny_step || slope >= T::zero() {
            let trial = make_trial(nlp, &it, &d, alpha_max);
            if merit(&bounds, &trial, mu, nu).is_finite() {
                accepted = Some((alpha_max, trial, d, alpha_z));
            }
        } else {
            let mut alpha = alpha_max;
            let mut first = true;
            let mut direction = Some(d);
            while alpha >= T::lit(MIN_STEP) {
                let dir = direction.as_ref().expect("direction kept until accepted");
                let trial = make_trial(nlp, &it, dir, alpha);
                let m = merit(&bounds, &trial, mu, nu);
                if m <= merit0 + T::lit(ARMIJO_ETA) * alpha * slope {
                    accepted = Some((alpha, trial, direction.take().unwrap(), alpha_z));
                    break;
                }
                if first && m.is_finite() {
                    first = false;
                    // second-order corrections of the full step
                    let mut c_soc: Vec<T> = ev
                        .c_eq
                        .iter()
                        .zip(&trial.c_eq)
                        .map(|(&c0, &c1)| alpha * c0 + c1)
                        .collect();
                    let mut ci_soc: Vec<T> = (0..mi)
                        .map(|k| alpha * (ev.c_ineq[k] + it.s[k]) + trial.c_ineq[k] + trial.s[k])
                        .collect();
                    let mut theta_prev = infeasibility_l1(&trial.c_eq, &trial.c_ineq, &trial.s);
                    for _ in 0..MAX_SOC {
                        let rhs = kkt_rhs(&bounds, &it, &ev.grad, &jty, &c_soc, &ci_soc, &sys.sigma_s, mu);
                        let Some(sol) = sys.solve(&rhs) else { break };
                        let dc = recover_direction(&bounds, &it, &sys, &sol, mu);
                        let a_soc = primal_step_limit(&bounds, &it, &dc, tau);
                        let trial_soc = make_trial(nlp, &it, &dc, a_soc);
                        let m_soc = merit(&bounds, &trial_soc, mu, nu);
                        if m_soc <= merit0 + T::lit(ARMIJO_ETA) * alpha * slope {
                            let az = dual_step_limit(&bounds, &it, &dc, tau);
                            accepted = Some((a_soc, trial_soc, dc, az));
                            break;
                        }
                        let theta_soc = infeasibility_l1(&trial_soc.c_eq, &trial_soc.c_ineq, &trial_soc.s);
                        if !(theta_soc < T::lit(0.99) * theta_prev) {
                            break;
                        }
                        theta_prev = theta_soc;
                        for (c, &cn) in c_soc.iter_mut().zip(&trial_soc.c_eq) {
                            *c = a_soc * *c + cn;
                        }
                        for k in 0..mi {
                            ci_soc[k] = a_soc * ci_soc[k] + trial_soc.c_ineq[k] + trial_soc.s[k];
                        }
                    }
                    if accepted.is_some() {
                        break;
                    }
                }
                alpha *= T::lit(0.5);
            }
        }

        match accepted {
            Some((alpha, trial, dir, alpha_z)) => {
                it.x = trial.x;
                it.s = trial.s;
                for (y, dy) in it.y_eq.iter_mut().zip(&dir.dy_eq) {
                    *y += alpha * *dy;
                }
                for (y, dy) in it.y_ineq.iter_mut().zip(&dir.dy_ineq) {
                    *y += alpha * *dy;
                }
                for i in 0..n {
                    it.z_l[i] += alpha_z * dir.dz_l[i];
                    it.z_u[i] += alpha_z * dir.dz_u[i];
                }
                for k in 0..mi {
                    it.z_s[k] += alpha_z * dir.dz_s[k];
                }
                safeguard_multipliers(&bounds, &mut it, mu);
                ev = Eval {
                    f: trial.f,
                    grad: nlp.gradient(&it.x),
                    c_eq: trial.c_eq,
                    c_ineq: trial.c_ineq,
                };
                last_alpha = (alpha, alpha_z, sys.delta_w, false);
            }
            None => {
                if !allow_restoration || restorations >= MAX_RESTORATIONS {
                    status = if allow_restoration {
                        Status::NumericalFailure
                    } else {
                        Status::IterationLimit
                    };
                    break;
                }
                restorations += 1;
                let theta_inf = infeasibility_inf(&ev.c_eq, &ev.c_ineq, &it.s);
                match restore(nlp, opts, &it.x, mu, tol, theta_inf) {
                    Some(x_new) => {
                        it.x = x_new;
                        ev = eval_point(nlp, &it.x);
                        it.s = initial_slacks(&ev.c_ineq, mu);
                        it.y_eq.iter_mut().for_each(|y| *y = T::zero());
                        it.y_ineq.iter_mut().for_each(|y| *y = T::zero());
                        for i in 0..n {
                            if bounds.has_l[i] {
                                it.z_l[i] = mu / (it.x[i] - bounds.lower[i]);
                            }
                            if bounds.has_u[i] {
                                it.z_u[i] = mu / (bounds.upper[i] - it.x[i]);
                            }
                        }
                        for k in 0..mi {
                            it.z_s[k] = mu / it.s[k];
                        }
                        nu = T::one();
                        last_alpha = (T::zero(), T::zero(), T::zero(), true);
                    }
                    None => {
                        status = Status::InfeasibleDetected;
                        break;
                    }
                }
            }
        }
        je = nlp.equality_jacobian(&it.x);
        ji = nlp.inequality_jacobian(&it.x);
    }

    if status == Status::IterationLimit {
        if let Some((_, best_it, f)) = best.take() {
            it = best_it;
            ev.f = f;
            je = nlp.equality_jacobian(&it.x);
            ji = nlp.inequality_jacobian(&it.x);
            ev.grad = nlp.gradient(&it.x);
        }
    }
    fixed_multipliers(&bounds, &mut it, &ev.grad, &je, &ji);

    Ok(Solution {
        status,
        objective: ev.f,
        x: it.x,
        y_eq: it.y_eq,
        y_ineq: it.y_ineq,
        z_lower: it.z_l,
        z_upper: it.z_u,
        iterations,
        log,
    })
}
