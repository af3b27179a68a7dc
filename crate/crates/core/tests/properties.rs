use equity_opf::casemodel::{validate_case, CaseData};
use equity_opf::formulation::{build_problem, curtailment_of};
use equity_opf::harness::sweep_csv_string;
use equity_opf::solver::{copper_plate_oracle, kkt_check, solve, Nlp};
use equity_opf::welfare::satisfaction;
use equity_opf::{
    builtin_case, run_solve, scale_ses, ses_sweep, Metrics, Problem, SatisfactionParams, SolverOptions, Status,
};
use proptest::prelude::*;

fn five_bus() -> CaseData {
    builtin_case("five_bus").unwrap()
}

fn opts() -> SolverOptions {
    SolverOptions::default()
}

fn problem(case: &CaseData) -> Problem {
    build_problem(case).unwrap()
}

#[test]
fn converged_solutions_satisfy_kkt_and_bounds() {
    for name in ["five_bus", "rts24"] {
        let case = builtin_case(name).unwrap();
        let p = problem(&case);
        let sol = solve(&p, &opts()).unwrap();
        assert_eq!(sol.status, Status::Converged, "{name}");
        let kkt = kkt_check(&p, &sol).unwrap();
        assert!(kkt.passes(1e-6), "{name}: {kkt:?}");
        assert!(p.max_violation(&sol.x) < 1e-6, "{name}");
        let (lo, hi) = (p.lower_bounds(), p.upper_bounds());
        for (i, &xi) in sol.x.iter().enumerate() {
            assert!(xi >= lo[i] - 1e-9 && xi <= hi[i] + 1e-9, "{name}: {}", p.variable_name(i));
        }
    }
}

#[test]
fn barrier_parameter_never_increases() {
    for name in ["five_bus", "rts24"] {
        let sol = solve(&problem(&builtin_case(name).unwrap()), &opts()).unwrap();
        assert!(!sol.log.is_empty());
        for w in sol.log.windows(2) {
            assert!(w[1].mu <= w[0].mu, "{name}: {} -> {}", w[0].mu, w[1].mu);
        }
    }
}

#[test]
fn repeated_solves_are_identical() {
    let case = builtin_case("rts24").unwrap();
    let a = run_solve(&case, &opts()).unwrap();
    let b = run_solve(&case, &opts()).unwrap();
    assert_eq!(a.solution.iterations, b.solution.iterations);
    assert_eq!(a.solution.x, b.solution.x);
    assert!((a.solution.objective - b.solution.objective).abs() <= 1e-12);
    assert_eq!(a.metrics, b.metrics);
}

#[test]
fn solution_is_balanced_with_losses() {
    let run = run_solve(&five_bus(), &opts()).unwrap();
    let d = run.problem.dispatch(&run.solution.x);
    let gen: f64 = d.pg.iter().sum();
    let load: f64 = d.pa.iter().sum();
    let residual = (gen - load - run.metrics.losses) / 100.0;
    assert!(residual.abs() < 1e-8, "{residual}");
    assert!(run.metrics.losses >= 0.0);
    assert!(gen >= load);
}

#[test]
fn curtailment_reports_match_definition() {
    let run = run_solve(&five_bus(), &opts()).unwrap();
    let p = &run.problem;
    let report = p.curtailment_report(&run.solution.x, 1e-6).unwrap();
    let d = p.dispatch(&run.solution.x);
    for ((a, &pa), &c) in p.case().aggregators.iter().zip(&d.pa).zip(&report.per_aggregator) {
        assert_eq!(c, a.p_n - pa);
        assert!(c >= -1e-6 && c <= a.p_n - a.p_c + 1e-6);
    }
    let total: f64 = d.pg.iter().sum::<f64>() - d.pa.iter().sum::<f64>();
    assert_eq!(report.total, total);
    assert!((report.total - run.metrics.losses).abs() < 1e-6);
}

#[test]
fn curtailment_report_rejects_infeasible_point() {
    let p = problem(&five_bus());
    let mut x = p.initial_point();
    let pa = p.layout().pa(0);
    x[pa] = -1.0;
    assert!(p.curtailment_report(&x, 1e-6).is_err());
}

#[test]
fn lossless_copper_plate_curtailment_is_demand_shortfall() {
    let plate = five_bus().copper_plate();
    let run = run_solve(&plate, &opts()).unwrap();
    let d = run.problem.dispatch(&run.solution.x);
    let report = curtailment_of(&plate, &d);
    let shortfall: f64 = report.per_aggregator.iter().sum();
    let expected = plate.total_p_normal() - d.pa.iter().sum::<f64>();
    assert!((shortfall - expected).abs() < 1e-9);
    assert!(report.total.abs() < 1e-6);
}

#[test]
fn uncongested_unscarce_case_curtails_only_losses() {
    let mut case = five_bus();
    for g in &mut case.generators {
        g.p_max *= 10.0;
        g.q_min *= 10.0;
        g.q_max *= 10.0;
        g.a = 0.0;
        g.b = 0.0;
    }
    for l in &mut case.lines {
        l.s_max *= 10.0;
    }
    for a in &mut case.aggregators {
        a.mu = a.mu.min(0.5 * a.gamma / a.p_n);
    }
    let run = run_solve(&case, &opts()).unwrap();
    assert_eq!(run.solution.status, Status::Converged);
    for (&c, a) in run.metrics.curtailment.iter().zip(&case.aggregators) {
        assert!(c.abs() < 1e-3 * a.p_n, "{c}");
    }
    let gap = run.metrics.total_curtailment - run.metrics.losses;
    assert!(gap.abs() < 1e-4, "{gap}");
}

#[test]
fn insufficient_capacity_is_detected() {
    let mut case = five_bus();
    for g in &mut case.generators {
        g.p_max = 50.0;
    }
    let sol = solve(&problem(&case), &opts()).unwrap();
    assert_eq!(sol.status, Status::InfeasibleDetected);
}

#[test]
fn adequacy_holds_at_solutions() {
    for name in ["five_bus", "rts24"] {
        let case = builtin_case(name).unwrap();
        let run = run_solve(&case, &opts()).unwrap();
        let d = run.problem.dispatch(&run.solution.x);
        let gen: f64 = d.pg.iter().sum();
        let load: f64 = d.pa.iter().sum();
        assert!(gen >= load - 1e-6, "{name}");
        let cap = case.total_p_max();
        assert!(load <= cap + 1e-6, "{name}");
    }
}

#[test]
fn single_precision_kernels_agree_with_double() {
    let case = five_bus();
    let p64 = problem(&case);
    let p32: equity_opf::formulation::Problem<f32> = build_problem(&case).unwrap();
    let x64 = p64.initial_point();
    let x32: Vec<f32> = x64.iter().map(|&v| v as f32).collect();
    let (f64v, f32v) = (p64.objective(&x64), p32.objective(&x32));
    assert!(((f64v - f32v as f64) / f64v).abs() < 1e-5);
    let (g64, g32) = (p64.gradient(&x64), p32.gradient(&x32));
    for (a, b) in g64.iter().zip(&g32) {
        assert!((a - *b as f64).abs() <= 1e-4 * a.abs().max(1.0));
    }
}

#[test]
fn builtin_cases_validate() {
    for name in ["five_bus", "rts24"] {
        assert!(validate_case(&builtin_case(name).unwrap()).is_empty(), "{name}");
    }
}

fn check_record_invariants(case: &CaseData, scale_pct: f64, m: &Metrics) {
    assert_eq!(m.social_welfare, m.total_satisfaction - m.total_cost);
    for (a, &ns) in case.aggregators.iter().zip(&m.normalized_satisfaction) {
        let params = SatisfactionParams::of(a).unwrap();
        let floor = satisfaction(&params, a.p_c).unwrap() / satisfaction(&params, a.p_n).unwrap();
        assert!(ns >= floor - 1e-9 && ns <= 1.0 + 1e-12, "{scale_pct}%: {ns} < {floor}");
    }
}

#[test]
fn sweep_records_are_self_consistent() {
    let case = five_bus();
    let result = ses_sweep(&case, 10.0, 150.0, 20.0, &opts()).unwrap();
    assert_eq!(result.records.len(), 8);
    for r in &result.records {
        assert_eq!(r.status, "converged");
        let m = r.metrics.as_ref().unwrap();
        check_record_invariants(&case, r.scale_pct, m);

        let scaled = scale_ses(&case, r.scale_pct / 100.0).unwrap();
        let run = run_solve(&scaled, &opts()).unwrap();
        let again = Metrics::from_point(&run.problem, &run.solution.x);
        assert_eq!(&again, m);
    }
}

#[test]
fn sweep_metrics_recompute_from_emitted_dispatch() {
    let case = five_bus();
    let result = ses_sweep(&case, 30.0, 130.0, 50.0, &opts()).unwrap();
    for r in &result.records {
        let scaled = scale_ses(&case, r.scale_pct / 100.0).unwrap();
        let run = run_solve(&scaled, &opts()).unwrap();
        let d = run.problem.dispatch(&run.solution.x);
        let u: f64 = scaled
            .aggregators
            .iter()
            .zip(&d.pa)
            .map(|(a, &p)| satisfaction(&SatisfactionParams::of(a).unwrap(), p).unwrap())
            .sum();
        let cost: f64 = scaled
            .generators
            .iter()
            .zip(&d.pg)
            .map(|(g, &p)| g.a * p * p + g.b * p + g.c)
            .sum();
        let m = r.metrics.as_ref().unwrap();
        assert!((u - m.total_satisfaction).abs() <= 1e-9 * u.abs());
        assert!((cost - m.total_cost).abs() <= 1e-9 * cost.abs());
    }
}

#[test]
fn sweep_at_full_scale_matches_single_solve() {
    let case = five_bus();
    let result = ses_sweep(&case, 60.0, 140.0, 20.0, &opts()).unwrap();
    let full = result.records.iter().find(|r| r.scale_pct == 100.0).unwrap();
    let run = run_solve(&case, &opts()).unwrap();
    assert_eq!(full.metrics.as_ref().unwrap(), &run.metrics);
    assert_eq!(full.iterations, run.solution.iterations);
}

#[test]
fn sweep_output_is_order_stable() {
    let case = five_bus();
    let a = ses_sweep(&case, 10.0, 150.0, 35.0, &opts()).unwrap();
    let b = ses_sweep(&case, 10.0, 150.0, 35.0, &opts()).unwrap();
    assert_eq!(sweep_csv_string(&a).unwrap(), sweep_csv_string(&b).unwrap());
    let pcts: Vec<f64> = a.records.iter().map(|r| r.scale_pct).collect();
    assert_eq!(pcts, vec![10.0, 45.0, 80.0, 115.0, 150.0]);
}

#[test]
#[ignore = "the built-in five-bus costs make welfare peak at the smallest scale; see README"]
fn welfare_peaks_inside_the_sweep_range() {
    let result = ses_sweep(&five_bus(), 10.0, 150.0, 2.0, &opts()).unwrap();
    let welfare: Vec<f64> = result
        .records
        .iter()
        .map(|r| r.metrics.as_ref().unwrap().social_welfare)
        .collect();
    let peak = welfare
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .unwrap()
        .0;
    assert!(peak > 0 && peak + 1 < welfare.len());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn scaled_cases_converge_with_valid_metrics(scale in 0.05f64..1.6) {
        let case = scale_ses(&five_bus(), scale).unwrap();
        let run = run_solve(&case, &opts()).unwrap();
        prop_assert_eq!(run.solution.status, Status::Converged);
        let kkt = kkt_check(&run.problem, &run.solution).unwrap();
        prop_assert!(kkt.passes(1e-6), "{:?}", kkt);
        check_record_invariants(&case, scale * 100.0, &run.metrics);
    }

    #[test]
    fn solver_matches_oracle_on_copper_plates(
        sigma_scale in 0.2f64..1.5,
        cost_scale in 0.0f64..2.0,
        cap_scale in 0.6f64..1.2,
    ) {
        let mut case = scale_ses(&five_bus(), sigma_scale).unwrap().copper_plate();
        for g in &mut case.generators {
            g.a *= cost_scale;
            g.p_max *= cap_scale;
        }
        prop_assume!(case.total_p_max() > case.total_p_critical() * 1.01);
        let oracle = copper_plate_oracle(&case).unwrap();
        let p = problem(&case);
        let sol = solve(&p, &opts()).unwrap();
        prop_assert_eq!(sol.status, Status::Converged);
        let objective = p.welfare(&sol.x).weighted_objective;
        let gap = (objective - oracle.objective).abs() / oracle.objective.abs().max(1.0);
        prop_assert!(gap < 1e-5, "gap {}", gap);
    }
}
