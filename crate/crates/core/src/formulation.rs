//! The welfare-maximizing AC optimal power flow as a smooth NLP.
//!
//! Variables (per-unit powers, p.u. voltages, radians), in order:
//! `P_g`, `Q_g` per generator, `P_a`, `Q_a` per aggregator, `V` per bus and
//! `θ` per non-slack bus. Equalities are the active and reactive balance at
//! every bus; inequalities (`≤ 0`) are both directed flows of every line
//! against its rating, followed by active and reactive adequacy.

use serde::Serialize;
use thiserror::Error;

use crate::acnetwork::{
    active_injection_terms, build_admittance, line_flow_terms, line_terminals,
    reactive_injection_terms, series_admittance, Admittance, NetworkError, TrigTerm,
};
use crate::casemodel::{validate_case, CaseData, Violation};
use crate::linalg::{norm_inf, DenseMatrix};
use crate::solver::Nlp;
use crate::welfare::{gen_cost, gen_marginal_cost, SatisfactionParams, WelfareError, WelfareTotals};
use crate::Scalar;

#[derive(Debug, Error)]
pub enum FormulationError {
    #[error("invalid case: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    InvalidCase(Vec<Violation>),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Welfare(#[from] WelfareError),
    #[error("point is infeasible (max violation {0:.3e})")]
    Infeasible(f64),
    #[error("expected a vector of length {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FormulationOptions {
    /// Tie each aggregator's reactive demand to `q_n / p_n` times its
    /// active demand.
    pub constant_power_factor: bool,
    /// Objective is scaled so its largest gradient entry at the initial
    /// point is at most this value. `None` disables scaling.
    pub max_gradient: Option<f64>,
}

impl Default for FormulationOptions {
    fn default() -> Self {
        Self {
            constant_power_factor: false,
            max_gradient: Some(100.0),
        }
    }
}

/// Positions of each variable block in the decision vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VariableLayout {
    pub generators: usize,
    pub aggregators: usize,
    pub buses: usize,
    pub slack: usize,
}

impl VariableLayout {
    pub fn len(&self) -> usize {
        2 * self.generators + 2 * self.aggregators + 2 * self.buses - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn pg(&self, k: usize) -> usize {
        k
    }

    pub fn qg(&self, k: usize) -> usize {
        self.generators + k
    }

    pub fn pa(&self, k: usize) -> usize {
        2 * self.generators + k
    }

    pub fn qa(&self, k: usize) -> usize {
        2 * self.generators + self.aggregators + k
    }

    pub fn v(&self, bus: usize) -> usize {
        2 * self.generators + 2 * self.aggregators + bus
    }

    /// `None` for the slack bus, whose angle is fixed at zero.
    pub fn theta(&self, bus: usize) -> Option<usize> {
        let base = 2 * self.generators + 2 * self.aggregators + self.buses;
        match bus.cmp(&self.slack) {
            std::cmp::Ordering::Less => Some(base + bus),
            std::cmp::Ordering::Equal => None,
            std::cmp::Ordering::Greater => Some(base + bus - 1),
        }
    }
}

/// Physical quantities recovered from a decision vector, in MW/MVAr,
/// p.u. voltage and radians. Angles include the slack bus (zero).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Dispatch<T> {
    pub pg: Vec<T>,
    pub qg: Vec<T>,
    pub pa: Vec<T>,
    pub qa: Vec<T>,
    pub v: Vec<T>,
    pub theta: Vec<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurtailmentReport<T> {
    /// `p_n − P` per aggregator (MW).
    pub per_aggregator: Vec<T>,
    /// `ΣP_g − ΣP_a` (MW), network losses included.
    pub total: T,
}

#[derive(Debug, Clone)]
struct DirectedLimit<T> {
    line: usize,
    forward: bool,
    terms: [TrigTerm<T>; 2],
    limit: T,
}

/// The assembled optimization problem for one case.
#[derive(Debug, Clone)]
pub struct Problem<T> {
    case: CaseData,
    options: FormulationOptions,
    layout: VariableLayout,
    admittance: Admittance<T>,
    p_terms: Vec<Vec<TrigTerm<T>>>,
    q_terms: Vec<Vec<TrigTerm<T>>>,
    limits: Vec<DirectedLimit<T>>,
    gen_bus: Vec<usize>,
    agg_bus: Vec<usize>,
    satisfaction: Vec<SatisfactionParams<T>>,
    pf_ratio: Vec<T>,
    lower: Vec<T>,
    upper: Vec<T>,
    base: T,
    objective_scale: T,
}

pub fn build_problem<T: Scalar>(case: &CaseData) -> Result<Problem<T>, FormulationError> {
    Problem::new(case, FormulationOptions::default())
}

impl<T: Scalar> Problem<T> {
    pub fn new(case: &CaseData, options: FormulationOptions) -> Result<Self, FormulationError> {
        let violations = validate_case(case);
        if !violations.is_empty() {
            return Err(FormulationError::InvalidCase(violations));
        }
        let nb = case.buses.len();
        let layout = VariableLayout {
            generators: case.generators.len(),
            aggregators: case.aggregators.len(),
            buses: nb,
            slack: case.slack_index().expect("validated case has a slack bus"),
        };
        let admittance = build_admittance::<T>(case)?;
        let p_terms = (0..nb).map(|i| active_injection_terms(&admittance, i)).collect();
        let q_terms = (0..nb).map(|i| reactive_injection_terms(&admittance, i)).collect();
        let base = T::lit(case.s_base);

        let mut limits = Vec::with_capacity(2 * case.lines.len());
        for (k, line) in case.lines.iter().enumerate() {
            let (i, j) = line_terminals(case, line).ok_or(NetworkError::UnknownLineBus(k))?;
            let (g, b) = series_admittance(T::lit(line.r), T::lit(line.x))
                .ok_or(NetworkError::ZeroImpedance(k))?;
            let limit = T::lit(line.s_max) / base;
            limits.push(DirectedLimit {
                line: k,
                forward: true,
                terms: line_flow_terms(i, j, g, b),
                limit,
            });
            limits.push(DirectedLimit {
                line: k,
                forward: false,
                terms: line_flow_terms(j, i, g, b),
                limit,
            });
        }

        let gen_bus = case
            .generators
            .iter()
            .map(|g| case.bus_index(g.bus).expect("validated"))
            .collect();
        let agg_bus = case
            .aggregators
            .iter()
            .map(|a| case.bus_index(a.bus).expect("validated"))
            .collect();
        let satisfaction = case
            .aggregators
            .iter()
            .map(SatisfactionParams::of)
            .collect::<Result<Vec<_>, _>>()?;
        let pf_ratio = case
            .aggregators
            .iter()
            .map(|a| if a.p_n > 0.0 { T::lit(a.q_n / a.p_n) } else { T::zero() })
            .collect();

        let n = layout.len();
        let mut lower = vec![T::neg_infinity(); n];
        let mut upper = vec![T::infinity(); n];
        let pu = |mw: f64| T::lit(mw / case.s_base);
        for (k, g) in case.generators.iter().enumerate() {
            lower[layout.pg(k)] = pu(g.p_min);
            upper[layout.pg(k)] = pu(g.p_max);
            lower[layout.qg(k)] = pu(g.q_min);
            upper[layout.qg(k)] = pu(g.q_max);
        }
        for (k, a) in case.aggregators.iter().enumerate() {
            lower[layout.pa(k)] = pu(a.p_c);
            upper[layout.pa(k)] = pu(a.p_n);
            lower[layout.qa(k)] = pu(a.q_c);
            upper[layout.qa(k)] = pu(a.q_n);
        }
        for (i, bus) in case.buses.iter().enumerate() {
            lower[layout.v(i)] = T::lit(bus.v_min);
            upper[layout.v(i)] = T::lit(bus.v_max);
        }

        let mut problem = Self {
            case: case.clone(),
            options,
            layout,
            admittance,
            p_terms,
            q_terms,
            limits,
            gen_bus,
            agg_bus,
            satisfaction,
            pf_ratio,
            lower,
            upper,
            base,
            objective_scale: T::one(),
        };
        if let Some(max_gradient) = options.max_gradient {
            let g = norm_inf(&problem.gradient(&problem.initial_point()));
            let target = T::lit(max_gradient);
            if g > target {
                problem.objective_scale = target / g;
            }
        }
        Ok(problem)
    }

    pub fn case(&self) -> &CaseData {
        &self.case
    }

    pub fn layout(&self) -> &VariableLayout {
        &self.layout
    }

    pub fn admittance(&self) -> &Admittance<T> {
        &self.admittance
    }

    pub fn options(&self) -> FormulationOptions {
        self.options
    }

    /// Factor converting weighted welfare ($/h) into the minimized objective
    /// (sign flip aside).
    pub fn objective_scale(&self) -> T {
        self.objective_scale
    }

    pub fn num_line_limits(&self) -> usize {
        self.limits.len()
    }

    fn power_factor_rows(&self) -> usize {
        if self.options.constant_power_factor {
            self.layout.aggregators
        } else {
            0
        }
    }

    fn voltages(&self, x: &[T]) -> (Vec<T>, Vec<T>) {
        let nb = self.layout.buses;
        let v = (0..nb).map(|i| x[self.layout.v(i)]).collect();
        let theta = (0..nb)
            .map(|i| self.layout.theta(i).map_or(T::zero(), |k| x[k]))
            .collect();
        (v, theta)
    }

    /// Global variable indices of a term's `[V_a, V_b, θ_a, θ_b]`.
    fn term_indices(&self, term: &TrigTerm<T>) -> [Option<usize>; 4] {
        if term.a == term.b {
            return [Some(self.layout.v(term.a)), None, None, None];
        }
        [
            Some(self.layout.v(term.a)),
            Some(self.layout.v(term.b)),
            self.layout.theta(term.a),
            self.layout.theta(term.b),
        ]
    }

    fn add_term_gradient(&self, row: &mut [T], term: &TrigTerm<T>, v: &[T], th: &[T], w: T) {
        let d = term.derivatives(v, th);
        for (k, idx) in self.term_indices(term).iter().enumerate() {
            if let Some(i) = *idx {
                row[i] += w * d.grad[k];
            }
        }
    }

    fn add_term_hessian(&self, h: &mut DenseMatrix<T>, term: &TrigTerm<T>, v: &[T], th: &[T], w: T) {
        if w == T::zero() {
            return;
        }
        let d = term.derivatives(v, th);
        let idx = self.term_indices(term);
        for (a, ia) in idx.iter().enumerate() {
            let Some(i) = *ia else { continue };
            for (b, ib) in idx.iter().enumerate() {
                let Some(j) = *ib else { continue };
                h[(i, j)] += w * d.hess[a][b];
            }
        }
    }

    /// Decision vector → physical dispatch.
    pub fn dispatch(&self, x: &[T]) -> Dispatch<T> {
        let l = &self.layout;
        let mw = |k: usize| x[k] * self.base;
        let (v, theta) = self.voltages(x);
        Dispatch {
            pg: (0..l.generators).map(|k| mw(l.pg(k))).collect(),
            qg: (0..l.generators).map(|k| mw(l.qg(k))).collect(),
            pa: (0..l.aggregators).map(|k| mw(l.pa(k))).collect(),
            qa: (0..l.aggregators).map(|k| mw(l.qa(k))).collect(),
            v,
            theta,
        }
    }

    /// Unscaled welfare totals at `x`.
    pub fn welfare(&self, x: &[T]) -> WelfareTotals<T> {
        let d = self.dispatch(x);
        crate::welfare::social_objective(&self.case, &d.pa, &d.pg)
            .expect("dispatch dimensions match the case")
    }

    /// Scaled minimization objective and its gradient.
    pub fn eval_objective_and_gradient(&self, x: &[T]) -> (T, Vec<T>) {
        (self.objective(x), self.gradient(x))
    }

    /// Equality residuals, inequality values and both Jacobians.
    pub fn eval_constraints_and_jacobian(
        &self,
        x: &[T],
    ) -> (Vec<T>, Vec<T>, DenseMatrix<T>, DenseMatrix<T>) {
        (
            self.equalities(x),
            self.inequalities(x),
            self.equality_jacobian(x),
            self.inequality_jacobian(x),
        )
    }

    /// Largest violation of bounds, equalities and inequalities at `x`
    /// (p.u.).
    pub fn max_violation(&self, x: &[T]) -> T {
        let mut worst = T::zero();
        for ((&xi, &l), &u) in x.iter().zip(&self.lower).zip(&self.upper) {
            worst = worst.max(l - xi).max(xi - u);
        }
        worst = worst.max(norm_inf(&self.equalities(x)));
        for c in self.inequalities(x) {
            worst = worst.max(c);
        }
        worst
    }

    /// Curtailment at a feasible point; fails when the point violates any
    /// constraint by more than `tol`.
    pub fn curtailment_report(&self, x: &[T], tol: T) -> Result<CurtailmentReport<T>, FormulationError> {
        if x.len() != self.layout.len() {
            return Err(FormulationError::DimensionMismatch {
                expected: self.layout.len(),
                got: x.len(),
            });
        }
        let violation = self.max_violation(x);
        if !(violation <= tol) {
            return Err(FormulationError::Infeasible(violation.as_f64()));
        }
        Ok(curtailment_of(&self.case, &self.dispatch(x)))
    }
}

/// Curtailment of a dispatch without any feasibility check.
pub fn curtailment_of<T: Scalar>(case: &CaseData, dispatch: &Dispatch<T>) -> CurtailmentReport<T> {
    let per_aggregator = case
        .aggregators
        .iter()
        .zip(&dispatch.pa)
        .map(|(a, &p)| T::lit(a.p_n) - p)
        .collect();
    let gen: T = dispatch.pg.iter().fold(T::zero(), |s, &p| s + p);
    let load: T = dispatch.pa.iter().fold(T::zero(), |s, &p| s + p);
    CurtailmentReport {
        per_aggregator,
        total: gen - load,
    }
}

impl<T: Scalar> Nlp<T> for Problem<T> {
    fn num_variables(&self) -> usize {
        self.layout.len()
    }

    fn num_equalities(&self) -> usize {
        2 * self.layout.buses + self.power_factor_rows()
    }

    fn num_inequalities(&self) -> usize {
        self.limits.len() + 2
    }

    fn lower_bounds(&self) -> &[T] {
        &self.lower
    }

    fn upper_bounds(&self) -> &[T] {
        &self.upper
    }

    /// Flat start with generators at their box midpoints and aggregators at
    /// their critical demands.
    fn initial_point(&self) -> Vec<T> {
        let l = &self.layout;
        let half = T::lit(0.5);
        let mut x = vec![T::zero(); l.len()];
        for k in 0..l.generators {
            for i in [l.pg(k), l.qg(k)] {
                x[i] = half * (self.lower[i] + self.upper[i]);
            }
        }
        for k in 0..l.aggregators {
            x[l.pa(k)] = self.lower[l.pa(k)];
            x[l.qa(k)] = self.lower[l.qa(k)];
        }
        for i in 0..l.buses {
            x[l.v(i)] = T::one();
        }
        x
    }

    fn objective(&self, x: &[T]) -> T {
        let l = &self.layout;
        let mut value = T::zero();
        for (k, g) in self.case.generators.iter().enumerate() {
            value += gen_cost(g, x[l.pg(k)] * self.base);
        }
        for (k, a) in self.case.aggregators.iter().enumerate() {
            value -= T::lit(a.sigma) * self.satisfaction[k].value(x[l.pa(k)] * self.base);
        }
        self.objective_scale * value
    }

    fn gradient(&self, x: &[T]) -> Vec<T> {
        let l = &self.layout;
        let mut grad = vec![T::zero(); l.len()];
        let s = self.objective_scale * self.base;
        for (k, g) in self.case.generators.iter().enumerate() {
            grad[l.pg(k)] = s * gen_marginal_cost(g, x[l.pg(k)] * self.base);
        }
        for (k, a) in self.case.aggregators.iter().enumerate() {
            grad[l.pa(k)] =
                -s * T::lit(a.sigma) * self.satisfaction[k].marginal(x[l.pa(k)] * self.base);
        }
        grad
    }

    fn equalities(&self, x: &[T]) -> Vec<T> {
        let l = &self.layout;
        let nb = l.buses;
        let (v, th) = self.voltages(x);
        let mut c = vec![T::zero(); self.num_equalities()];
        for (k, &bus) in self.gen_bus.iter().enumerate() {
            c[bus] += x[l.pg(k)];
            c[nb + bus] += x[l.qg(k)];
        }
        for (k, &bus) in self.agg_bus.iter().enumerate() {
            c[bus] -= x[l.pa(k)];
            c[nb + bus] -= x[l.qa(k)];
        }
        for i in 0..nb {
            for t in &self.p_terms[i] {
                c[i] -= t.value(&v, &th);
            }
            for t in &self.q_terms[i] {
                c[nb + i] -= t.value(&v, &th);
            }
        }
        for k in 0..self.power_factor_rows() {
            c[2 * nb + k] = x[l.qa(k)] - self.pf_ratio[k] * x[l.pa(k)];
        }
        c
    }

    fn inequalities(&self, x: &[T]) -> Vec<T> {
        let l = &self.layout;
        let (v, th) = self.voltages(x);
        let mut c: Vec<T> = self
            .limits
            .iter()
            .map(|d| d.terms.iter().fold(-d.limit, |acc, t| acc + t.value(&v, &th)))
            .collect();
        let mut p_adequacy = T::zero();
        let mut q_adequacy = T::zero();
        for k in 0..l.aggregators {
            p_adequacy += x[l.pa(k)];
            q_adequacy += x[l.qa(k)];
        }
        for k in 0..l.generators {
            p_adequacy -= x[l.pg(k)];
            q_adequacy -= x[l.qg(k)];
        }
        c.push(p_adequacy);
        c.push(q_adequacy);
        c
    }

    fn equality_jacobian(&self, x: &[T]) -> DenseMatrix<T> {
        let l = &self.layout;
        let nb = l.buses;
        let (v, th) = self.voltages(x);
        let mut jac = DenseMatrix::zeros(self.num_equalities(), l.len());
        for (k, &bus) in self.gen_bus.iter().enumerate() {
            jac[(bus, l.pg(k))] = T::one();
            jac[(nb + bus, l.qg(k))] = T::one();
        }
        for (k, &bus) in self.agg_bus.iter().enumerate() {
            jac[(bus, l.pa(k))] = -T::one();
            jac[(nb + bus, l.qa(k))] = -T::one();
        }
        for i in 0..nb {
            for t in &self.p_terms[i] {
                self.add_term_gradient(jac.row_mut(i), t, &v, &th, -T::one());
            }
            for t in &self.q_terms[i] {
                self.add_term_gradient(jac.row_mut(nb + i), t, &v, &th, -T::one());
            }
        }
        for k in 0..self.power_factor_rows() {
            jac[(2 * nb + k, l.qa(k))] = T::one();
            jac[(2 * nb + k, l.pa(k))] = -self.pf_ratio[k];
        }
        jac
    }

    fn inequality_jacobian(&self, x: &[T]) -> DenseMatrix<T> {
        let l = &self.layout;
        let (v, th) = self.voltages(x);
        let m = self.num_inequalities();
        let mut jac = DenseMatrix::zeros(m, l.len());
        for (r, d) in self.limits.iter().enumerate() {
            for t in &d.terms {
                self.add_term_gradient(jac.row_mut(r), t, &v, &th, T::one());
            }
        }
        let (rp, rq) = (m - 2, m - 1);
        for k in 0..l.aggregators {
            jac[(rp, l.pa(k))] = T::one();
            jac[(rq, l.qa(k))] = T::one();
        }
        for k in 0..l.generators {
            jac[(rp, l.pg(k))] = -T::one();
            jac[(rq, l.qg(k))] = -T::one();
        }
        jac
    }

    fn lagrangian_hessian(
        &self,
        x: &[T],
        obj_factor: T,
        y_eq: &[T],
        y_ineq: &[T],
    ) -> DenseMatrix<T> {
        let l = &self.layout;
        let nb = l.buses;
        let (v, th) = self.voltages(x);
        let mut h = DenseMatrix::zeros(l.len(), l.len());
        let s = obj_factor * self.objective_scale * self.base * self.base;
        for (k, g) in self.case.generators.iter().enumerate() {
            h[(l.pg(k), l.pg(k))] = s * T::lit(2.0 * g.a);
        }
        for (k, a) in self.case.aggregators.iter().enumerate() {
            h[(l.pa(k), l.pa(k))] =
                -s * T::lit(a.sigma) * self.satisfaction[k].curvature(x[l.pa(k)] * self.base);
        }
        for i in 0..nb {
            for t in &self.p_terms[i] {
                self.add_term_hessian(&mut h, t, &v, &th, -y_eq[i]);
            }
            for t in &self.q_terms[i] {
                self.add_term_hessian(&mut h, t, &v, &th, -y_eq[nb + i]);
            }
        }
        for (r, d) in self.limits.iter().enumerate() {
            for t in &d.terms {
                self.add_term_hessian(&mut h, t, &v, &th, y_ineq[r]);
            }
        }
        h
    }

    fn variable_name(&self, index: usize) -> String {
        let l = &self.layout;
        let (ng, na, nb) = (l.generators, l.aggregators, l.buses);
        let gl = self.case.generator_labels();
        let al = self.case.aggregator_labels();
        let bus_id = |i: usize| self.case.buses[i].id;
        match index {
            i if i < ng => format!("P_g[bus {} #{}]", gl[i].0, gl[i].1),
            i if i < 2 * ng => format!("Q_g[bus {} #{}]", gl[i - ng].0, gl[i - ng].1),
            i if i < 2 * ng + na => {
                let k = i - 2 * ng;
                format!("P_a[bus {} #{}]", al[k].0, al[k].1)
            }
            i if i < 2 * ng + 2 * na => {
                let k = i - 2 * ng - na;
                format!("Q_a[bus {} #{}]", al[k].0, al[k].1)
            }
            i if i < 2 * ng + 2 * na + nb => format!("V[bus {}]", bus_id(i - 2 * ng - 2 * na)),
            i => {
                let mut k = i - 2 * ng - 2 * na - nb;
                if k >= l.slack {
                    k += 1;
                }
                format!("theta[bus {}]", bus_id(k))
            }
        }
    }

    fn equality_name(&self, index: usize) -> String {
        let nb = self.layout.buses;
        if index < nb {
            format!("P-balance[bus {}]", self.case.buses[index].id)
        } else if index < 2 * nb {
            format!("Q-balance[bus {}]", self.case.buses[index - nb].id)
        } else {
            format!("power-factor[aggregator {}]", index - 2 * nb)
        }
    }

    fn inequality_name(&self, index: usize) -> String {
        if let Some(d) = self.limits.get(index) {
            let line = &self.case.lines[d.line];
            let (a, b) = if d.forward {
                (line.from_bus, line.to_bus)
            } else {
                (line.to_bus, line.from_bus)
            };
            format!("flow-limit[{a}->{b}]")
        } else if index == self.limits.len() {
            "P-adequacy".to_string()
        } else {
            "Q-adequacy".to_string()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::casemodel::{builtin_case, Aggregator, Bus, Generator};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn single_bus() -> CaseData {
        CaseData {
            name: "single".into(),
            s_base: 100.0,
            metadata: Default::default(),
            buses: vec![Bus {
                id: 1,
                is_slack: true,
                v_min: 0.95,
                v_max: 1.05,
            }],
            lines: vec![],
            generators: vec![Generator {
                bus: 1,
                a: 1.0,
                b: 0.0,
                c: 0.0,
                p_min: 0.0,
                p_max: 20.0,
                q_min: -5.0,
                q_max: 5.0,
            }],
            aggregators: vec![Aggregator {
                bus: 1,
                sigma: 1.0,
                gamma: 10.0,
                mu: 1.0,
                p_n: 10.0,
                p_c: 0.0,
                q_n: 1.0,
                q_c: 0.0,
            }],
        }
    }

    #[test]
    fn five_bus_dimensions() {
        let p = build_problem::<f64>(&builtin_case("five_bus").unwrap()).unwrap();
        assert_eq!(p.num_variables(), 33);
        assert_eq!(p.num_line_limits(), 12);
        assert_eq!(p.num_inequalities(), 14);
        assert_eq!(p.num_equalities(), 10);
        assert_eq!(p.layout().theta(3), None); // bus 4 is the slack
    }

    #[test]
    fn invalid_case_rejected() {
        let mut case = builtin_case("five_bus").unwrap();
        case.aggregators[0].mu = 0.0;
        assert!(matches!(
            build_problem::<f64>(&case),
            Err(FormulationError::InvalidCase(_))
        ));
    }

    #[test]
    fn bounds_realize_limits() {
        let case = builtin_case("five_bus").unwrap();
        let p = build_problem::<f64>(&case).unwrap();
        let l = p.layout();
        assert_abs_diff_eq!(p.lower_bounds()[l.pa(1)], 1.68, epsilon = 1e-12);
        assert_abs_diff_eq!(p.upper_bounds()[l.pa(1)], 3.3849, epsilon = 1e-12);
        assert_abs_diff_eq!(p.upper_bounds()[l.pg(4)], 5.52, epsilon = 1e-12);
        assert_eq!(p.lower_bounds()[l.v(0)], 0.95);
        assert!(p.lower_bounds()[l.theta(0).unwrap()].is_infinite());
    }

    #[test]
    fn single_bus_balance_is_pairwise() {
        let p = build_problem::<f64>(&single_bus()).unwrap();
        // variables: Pg, Qg, Pa, Qa, V
        assert_eq!(p.num_variables(), 5);
        let c = p.equalities(&[0.07, 0.02, 0.03, 0.01, 1.0]);
        assert_abs_diff_eq!(c[0], 0.04, epsilon = 1e-15);
        assert_abs_diff_eq!(c[1], 0.01, epsilon = 1e-15);
    }

    #[test]
    fn gradient_entries() {
        let case = builtin_case("five_bus").unwrap();
        let opts = FormulationOptions {
            max_gradient: None,
            ..FormulationOptions::default()
        };
        let p = Problem::<f64>::new(&case, opts).unwrap();
        let l = p.layout().clone();
        let mut x = p.initial_point();
        for k in 0..7 {
            x[l.pa(k)] = 0.0;
        }
        let g = p.gradient(&x);
        for (k, a) in case.aggregators.iter().enumerate() {
            assert_abs_diff_eq!(g[l.pa(k)], -100.0 * a.sigma * a.gamma, epsilon = 1e-9);
        }
        x[l.pa(6)] = 1.20; // 120 MW, beyond 10 / 0.087
        assert_eq!(p.gradient(&x)[l.pa(6)], 0.0);
        for k in 0..l.buses {
            assert_eq!(g[l.v(k)], 0.0);
        }
    }

    #[test]
    fn objective_scaling_caps_gradient() {
        let p = build_problem::<f64>(&builtin_case("five_bus").unwrap()).unwrap();
        let g = norm_inf(&p.gradient(&p.initial_point()));
        assert_abs_diff_eq!(g, 100.0, epsilon = 1e-9);
        let x = p.initial_point();
        let w = p.welfare(&x);
        assert_abs_diff_eq!(
            p.objective(&x),
            -p.objective_scale() * w.weighted_objective,
            epsilon = 1e-9
        );
    }

    #[test]
    fn adequacy_row_active_at_balance() {
        let p = build_problem::<f64>(&builtin_case("five_bus").unwrap()).unwrap();
        let l = p.layout().clone();
        let mut x = p.initial_point();
        for k in 0..5 {
            x[l.pg(k)] = 1.4;
        }
        for k in 0..7 {
            x[l.pa(k)] = 1.0;
        }
        let c = p.inequalities(&x);
        assert_abs_diff_eq!(c[12], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn flat_start_zero_injection_residuals() {
        let p = build_problem::<f64>(&builtin_case("five_bus").unwrap()).unwrap();
        let mut x = vec![0.0; p.num_variables()];
        for i in 0..5 {
            x[p.layout().v(i)] = 1.0;
        }
        assert!(norm_inf(&p.equalities(&x)) < 1e-14);
    }

    #[test]
    fn objective_hessian_diagonal_is_concave() {
        let p = build_problem::<f64>(&builtin_case("five_bus").unwrap()).unwrap();
        let x = p.initial_point();
        let h = p.lagrangian_hessian(&x, 1.0, &[0.0; 10], &[0.0; 14]);
        // minimization form: diagonal >= 0, i.e. welfare curvature <= 0
        for i in 0..p.num_variables() {
            assert!(h[(i, i)] >= 0.0);
        }
    }

    fn random_interior(p: &Problem<f64>, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let x0 = p.initial_point();
        (0..p.num_variables())
            .map(|i| {
                let (lo, hi) = (p.lower_bounds()[i], p.upper_bounds()[i]);
                if lo.is_finite() && hi.is_finite() {
                    lo + (hi - lo) * rng.gen_range(0.05..0.95)
                } else {
                    x0[i] + rng.gen_range(-0.3..0.3)
                }
            })
            .collect()
    }

    #[test]
    fn hessian_matches_finite_differences_of_lagrangian_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for name in ["five_bus", "rts24"] {
            let p = build_problem::<f64>(&builtin_case(name).unwrap()).unwrap();
            let n = p.num_variables();
            for _ in 0..3 {
                let x = random_interior(&p, &mut rng);
                let ye: Vec<f64> = (0..p.num_equalities()).map(|_| rng.gen_range(-2.0..2.0)).collect();
                let yi: Vec<f64> = (0..p.num_inequalities()).map(|_| rng.gen_range(0.0..2.0)).collect();
                let lag_grad = |x: &[f64]| {
                    let mut g = p.gradient(x);
                    let je = p.equality_jacobian(x).tr_mul_vec(&ye);
                    let ji = p.inequality_jacobian(x).tr_mul_vec(&yi);
                    for i in 0..n {
                        g[i] = 0.5 * g[i] + je[i] + ji[i];
                    }
                    g
                };
                let h = p.lagrangian_hessian(&x, 0.5, &ye, &yi);
                assert!(h.is_symmetric(1e-12));
                for j in 0..n {
                    let step = 1e-6 * x[j].abs().max(1.0);
                    let mut xp = x.clone();
                    let mut xm = x.clone();
                    xp[j] += step;
                    xm[j] -= step;
                    let (gp, gm) = (lag_grad(&xp), lag_grad(&xm));
                    for i in 0..n {
                        let fd = (gp[i] - gm[i]) / (2.0 * step);
                        let err = (fd - h[(i, j)]).abs() / h[(i, j)].abs().max(1.0);
                        assert!(err < 1e-5, "{name}: H[{i},{j}] = {} vs {fd}", h[(i, j)]);
                    }
                }
            }
        }
    }

    #[test]
    fn constant_power_factor_rows() {
        let case = builtin_case("five_bus").unwrap();
        let opts = FormulationOptions {
            constant_power_factor: true,
            ..Default::default()
        };
        let p = Problem::<f64>::new(&case, opts).unwrap();
        assert_eq!(p.num_equalities(), 17);
        let l = p.layout().clone();
        let mut x = p.initial_point();
        let a = &case.aggregators[0];
        x[l.pa(0)] = a.p_n / 100.0;
        x[l.qa(0)] = a.q_n / 100.0;
        assert_abs_diff_eq!(p.equalities(&x)[10], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn curtailment_requires_feasibility() {
        let case = builtin_case("five_bus").unwrap();
        let p = build_problem::<f64>(&case).unwrap();
        let x = p.initial_point();
        assert!(matches!(
            p.curtailment_report(&x, 1e-6),
            Err(FormulationError::Infeasible(_))
        ));
        let d = Dispatch {
            pg: vec![0.0; 5],
            qg: vec![0.0; 5],
            pa: case.aggregators.iter().map(|a| a.p_n).collect(),
            qa: vec![0.0; 7],
            v: vec![1.0; 5],
            theta: vec![0.0; 5],
        };
        let r = curtailment_of(&case, &d);
        assert!(r.per_aggregator.iter().all(|&c| c == 0.0));
    }

    #[test]
    fn names_are_readable() {
        let p = build_problem::<f64>(&builtin_case("five_bus").unwrap()).unwrap();
        assert_eq!(p.variable_name(1), "P_g[bus 1 #2]");
        assert_eq!(p.variable_name(p.layout().pa(6)), "P_a[bus 4 #3]");
        assert_eq!(p.variable_name(32), "theta[bus 5]");
        assert_eq!(p.inequality_name(1), "flow-limit[2->1]");
        assert_eq!(p.inequality_name(13), "Q-adequacy");
        assert_eq!(p.equality_name(6), "Q-balance[bus 2]");
    }
}
