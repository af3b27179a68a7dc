//! Bus admittance matrix and AC power-flow quantities on a series-only
//! (shunt-free) line model.
//!
//! Voltage vectors are indexed by bus position in [`CaseData::buses`];
//! angles are in radians and powers in p.u. unless a function says MW.

use thiserror::Error;

use crate::casemodel::{CaseData, Line};
use crate::linalg::DenseMatrix;
use crate::Scalar;

#[derive(Debug, Error, PartialEq)]
pub enum NetworkError {
    #[error("line {0} has zero impedance")]
    ZeroImpedance(usize),
    #[error("line {0} references an unknown bus")]
    UnknownLineBus(usize),
    #[error("unknown line index {0}")]
    UnknownLine(usize),
    #[error("expected vectors of length {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// Real and imaginary parts of the bus admittance matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Admittance<T> {
    pub g: DenseMatrix<T>,
    pub b: DenseMatrix<T>,
}

impl<T: Scalar> Admittance<T> {
    pub fn size(&self) -> usize {
        self.g.rows()
    }
}

/// Series admittance `1 / (r + jx)` as `(g, b)`.
pub fn series_admittance<T: Scalar>(r: T, x: T) -> Option<(T, T)> {
    let denom = r * r + x * x;
    if denom == T::zero() {
        None
    } else {
        Some((r / denom, -x / denom))
    }
}

/// Bus positions of a line's terminals.
pub fn line_terminals(case: &CaseData, line: &Line) -> Option<(usize, usize)> {
    Some((case.bus_index(line.from_bus)?, case.bus_index(line.to_bus)?))
}

pub fn build_admittance<T: Scalar>(case: &CaseData) -> Result<Admittance<T>, NetworkError> {
    let n = case.buses.len();
    let mut g = DenseMatrix::zeros(n, n);
    let mut b = DenseMatrix::zeros(n, n);
    for (k, line) in case.lines.iter().enumerate() {
        let (i, j) = line_terminals(case, line).ok_or(NetworkError::UnknownLineBus(k))?;
        let (gs, bs) = series_admittance(T::lit(line.r), T::lit(line.x))
            .ok_or(NetworkError::ZeroImpedance(k))?;
        g[(i, i)] += gs;
        g[(j, j)] += gs;
        g[(i, j)] -= gs;
        g[(j, i)] -= gs;
        b[(i, i)] += bs;
        b[(j, j)] += bs;
        b[(i, j)] -= bs;
        b[(j, i)] -= bs;
    }
    Ok(Admittance { g, b })
}

/// One bilinear trigonometric term `V_a V_b (α cos θ_ab + β sin θ_ab)`
/// with `θ_ab = θ_a − θ_b`. When `a == b` it reduces to `α V_a²`.
///
/// Injections and line flows are sums of such terms, so their first and
/// second derivatives are assembled from [`TrigTerm::derivatives`].
#[derive(Debug, Clone, Copy)]
pub(crate) struct TrigTerm<T> {
    pub a: usize,
    pub b: usize,
    pub alpha: T,
    pub beta: T,
}

/// Gradient and Hessian of a [`TrigTerm`] with respect to
/// `[V_a, V_b, θ_a, θ_b]`. For a diagonal term only the `V_a` entries are
/// nonzero.
#[derive(Debug, Clone, Copy)]
pub(crate) struct TermDerivatives<T> {
    pub grad: [T; 4],
    pub hess: [[T; 4]; 4],
}

impl<T: Scalar> TrigTerm<T> {
    pub fn value(&self, v: &[T], theta: &[T]) -> T {
        if self.a == self.b {
            return self.alpha * v[self.a] * v[self.a];
        }
        let t = theta[self.a] - theta[self.b];
        v[self.a] * v[self.b] * (self.alpha * t.cos() + self.beta * t.sin())
    }

    pub fn derivatives(&self, v: &[T], theta: &[T]) -> TermDerivatives<T> {
        let z = T::zero();
        let mut grad = [z; 4];
        let mut hess = [[z; 4]; 4];
        if self.a == self.b {
            let va = v[self.a];
            grad[0] = T::lit(2.0) * self.alpha * va;
            hess[0][0] = T::lit(2.0) * self.alpha;
            return TermDerivatives {
                grad,
                hess,
            };
        }
        let (va, vb) = (v[self.a], v[self.b]);
        let t = theta[self.a] - theta[self.b];
        let (s, c) = t.sin_cos();
        let h = self.alpha * c + self.beta * s;
        let dh = self.beta * c - self.alpha * s;
        let vv = va * vb;
        grad[0] = vb * h;
        grad[1] = va * h;
        grad[2] = vv * dh;
        grad[3] = -vv * dh;

        let sym = |m: &mut [[T; 4]; 4], i: usize, j: usize, val: T| {
            m[i][j] = val;
            m[j][i] = val;
        };
        sym(&mut hess, 0, 1, h);
        sym(&mut hess, 0, 2, vb * dh);
        sym(&mut hess, 0, 3, -vb * dh);
        sym(&mut hess, 1, 2, va * dh);
        sym(&mut hess, 1, 3, -va * dh);
        sym(&mut hess, 2, 2, -vv * h);
        sym(&mut hess, 2, 3, vv * h);
        sym(&mut hess, 3, 3, -vv * h);
        TermDerivatives {
            grad,
            hess,
        }
    }
}

/// Terms of the active injection `P_i = V_i Σ_j V_j (G_ij cos θ_ij + B_ij sin θ_ij)`.
pub(crate) fn active_injection_terms<T: Scalar>(adm: &Admittance<T>, i: usize) -> Vec<TrigTerm<T>> {
    (0..adm.size())
        .filter(|&j| adm.g[(i, j)] != T::zero() || adm.b[(i, j)] != T::zero())
        .map(|j| TrigTerm {
            a: i,
            b: j,
            alpha: adm.g[(i, j)],
            beta: adm.b[(i, j)],
        })
        .collect()
}

/// Terms of the reactive injection `Q_i = V_i Σ_j V_j (G_ij sin θ_ij − B_ij cos θ_ij)`.
pub(crate) fn reactive_injection_terms<T: Scalar>(
    adm: &Admittance<T>,
    i: usize,
) -> Vec<TrigTerm<T>> {
    (0..adm.size())
        .filter(|&j| adm.g[(i, j)] != T::zero() || adm.b[(i, j)] != T::zero())
        .map(|j| TrigTerm {
            a: i,
            b: j,
            alpha: -adm.b[(i, j)],
            beta: adm.g[(i, j)],
        })
        .collect()
}

/// Terms of the directed line flow `P_ij = V_i² g − V_i V_j (g cos θ_ij + b sin θ_ij)`.
pub(crate) fn line_flow_terms<T: Scalar>(from: usize, to: usize, g: T, b: T) -> [TrigTerm<T>; 2] {
    [
        TrigTerm {
            a: from,
            b: from,
            alpha: g,
            beta: T::zero(),
        },
        TrigTerm {
            a: from,
            b: to,
            alpha: -g,
            beta: -b,
        },
    ]
}

fn check_len(expected: usize, lens: &[usize]) -> Result<(), NetworkError> {
    match lens.iter().find(|&&l| l != expected) {
        Some(&got) => Err(NetworkError::DimensionMismatch { expected, got }),
        None => Ok(()),
    }
}

/// Active and reactive power leaving each bus into the network (p.u.).
pub fn bus_injections<T: Scalar>(
    adm: &Admittance<T>,
    v: &[T],
    theta: &[T],
) -> Result<(Vec<T>, Vec<T>), NetworkError> {
    let n = adm.size();
    check_len(n, &[v.len(), theta.len()])?;
    let mut p = vec![T::zero(); n];
    let mut q = vec![T::zero(); n];
    for i in 0..n {
        for j in 0..n {
            let (gij, bij) = (adm.g[(i, j)], adm.b[(i, j)]);
            if gij == T::zero() && bij == T::zero() {
                continue;
            }
            let (s, c) = (theta[i] - theta[j]).sin_cos();
            let vv = v[i] * v[j];
            p[i] += vv * (gij * c + bij * s);
            q[i] += vv * (gij * s - bij * c);
        }
    }
    Ok((p, q))
}

/// Power-balance residuals `net injection − network outflow` per bus.
pub fn injection_residuals<T: Scalar>(
    adm: &Admittance<T>,
    v: &[T],
    theta: &[T],
    p_net: &[T],
    q_net: &[T],
) -> Result<(Vec<T>, Vec<T>), NetworkError> {
    check_len(adm.size(), &[p_net.len(), q_net.len()])?;
    let (p, q) = bus_injections(adm, v, theta)?;
    Ok((
        p_net.iter().zip(&p).map(|(&a, &b)| a - b).collect(),
        q_net.iter().zip(&q).map(|(&a, &b)| a - b).collect(),
    ))
}

/// Directed active flows of one line in p.u.: `(from → to, to → from)`.
pub fn line_flow_pu<T: Scalar>(
    case: &CaseData,
    v: &[T],
    theta: &[T],
    line: usize,
) -> Result<(T, T), NetworkError> {
    check_len(case.buses.len(), &[v.len(), theta.len()])?;
    let l = case.lines.get(line).ok_or(NetworkError::UnknownLine(line))?;
    let (i, j) = line_terminals(case, l).ok_or(NetworkError::UnknownLineBus(line))?;
    let (g, b) =
        series_admittance(T::lit(l.r), T::lit(l.x)).ok_or(NetworkError::ZeroImpedance(line))?;
    let forward: T = line_flow_terms(i, j, g, b)
        .iter()
        .fold(T::zero(), |acc, t| acc + t.value(v, theta));
    let backward: T = line_flow_terms(j, i, g, b)
        .iter()
        .fold(T::zero(), |acc, t| acc + t.value(v, theta));
    Ok((forward, backward))
}

/// Directed active flows of one line in MW.
pub fn line_flow<T: Scalar>(
    case: &CaseData,
    v: &[T],
    theta: &[T],
    line: usize,
) -> Result<(T, T), NetworkError> {
    let (f, b) = line_flow_pu(case, v, theta, line)?;
    let base = T::lit(case.s_base);
    Ok((f * base, b * base))
}

/// Total series losses (MW).
pub fn network_losses<T: Scalar>(case: &CaseData, v: &[T], theta: &[T]) -> Result<T, NetworkError> {
    let mut total = T::zero();
    for k in 0..case.lines.len() {
        let (f, b) = line_flow(case, v, theta, k)?;
        total += f + b;
    }
    Ok(total)
}
