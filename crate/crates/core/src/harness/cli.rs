use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::casemodel::{read_case, to_toml_string, validate_case, BuiltinCase, CaseData, RTS24_SEED};
use crate::formulation::{build_problem, Problem};
use crate::solver::{copper_plate_oracle, finite_difference_audit, solve, AuditReport, SolverOptions};

use super::{emit, run_solve, ses_sweep, solve_report, HarnessError, Output, OutputFormat};

pub const EXIT_OK: i32 = 0;
pub const EXIT_NOT_CONVERGED: i32 = 1;
pub const EXIT_INPUT: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "equity-opf", version, about = "Welfare-maximizing AC OPF with socioeconomic scores")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args)]
struct Common {
    /// KKT tolerance.
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long, default_value_t = 200)]
    max_iter: usize,
    /// Seed for synthetic case data and derivative-audit sampling.
    #[arg(long, default_value_t = RTS24_SEED)]
    seed: u64,
    /// Output file; stdout when omitted.
    #[arg(long, short)]
    output: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve a case at its stored socioeconomic scores.
    Solve {
        /// `builtin:five_bus`, `builtin:rts24` or a TOML case file.
        case: String,
        #[command(flatten)]
        common: Common,
    },
    /// Re-solve over a range of uniformly scaled socioeconomic scores.
    Sweep {
        case: String,
        #[arg(long, default_value_t = 10.0)]
        from: f64,
        #[arg(long, default_value_t = 150.0)]
        to: f64,
        #[arg(long, default_value_t = 2.0)]
        step: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Validate a case and audit the model derivatives.
    Check {
        case: String,
        /// Number of random points for the derivative audit.
        #[arg(long, default_value_t = 100)]
        points: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Compare the solver with the copper-plate dispatch of a case.
    Oracle {
        case: String,
        #[command(flatten)]
        common: Common,
    },
    /// Write a case as TOML.
    Export {
        case: String,
        #[command(flatten)]
        common: Common,
    },
}

impl Common {
    fn solver_options(&self) -> Result<SolverOptions, HarnessError> {
        let opts = SolverOptions {
            tol: self.tol,
            max_iter: self.max_iter,
            ..SolverOptions::default()
        };
        opts.validate()?;
        Ok(opts)
    }

    fn output(&self) -> Option<&Path> {
        self.output.as_deref()
    }
}

fn load_case(source: &str, seed: u64) -> Result<CaseData, HarnessError> {
    if let Some(name) = source.strip_prefix("builtin:") {
        return Ok(name.parse::<BuiltinCase>()?.build_with_seed(seed));
    }
    if !Path::new(source).exists() {
        if let Ok(b) = source.parse::<BuiltinCase>() {
            return Ok(b.build_with_seed(seed));
        }
    }
    Ok(read_case(source)?)
}

fn exit_code(err: &HarnessError) -> i32 {
    match err {
        HarnessError::Solver(_) => EXIT_NOT_CONVERGED,
        _ => EXIT_INPUT,
    }
}

#[derive(Serialize)]
struct CheckReport {
    case: String,
    violations: Vec<String>,
    audit: Option<AuditReport>,
}

#[derive(Serialize)]
struct OracleComparison {
    case: String,
    oracle_lambda: f64,
    oracle_objective: f64,
    solver_status: String,
    solver_objective: f64,
    relative_difference: f64,
    oracle_p_agg_mw: Vec<f64>,
    solver_p_agg_mw: Vec<f64>,
    oracle_p_gen_mw: Vec<f64>,
    solver_p_gen_mw: Vec<f64>,
}

fn write_json<T: Serialize>(value: &T, path: Option<&Path>) -> Result<(), HarnessError> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    write_text(&text, path)
}

fn write_text(text: &str, path: Option<&Path>) -> Result<(), HarnessError> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|source| HarnessError::Io {
            path: p.display().to_string(),
            source,
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn execute(command: Command) -> Result<i32, HarnessError> {
    match command {
        Command::Solve { case, common } => {
            let opts = common.solver_options()?;
            let case = load_case(&case, common.seed)?;
            if let Some(Format::Csv) = common.format {
                return Err(HarnessError::UnsupportedFormat("solve output is JSON only"));
            }
            let run = run_solve(&case, &opts)?;
            let report = solve_report(&run);
            emit(Output::Solve(&report), OutputFormat::Json, common.output())?;
            eprintln!(
                "{}: {} after {} iterations, welfare {:.2} $/h",
                report.case, report.status, report.iterations, report.metrics.social_welfare
            );
            Ok(if run.solution.converged() {
                EXIT_OK
            } else {
                EXIT_NOT_CONVERGED
            })
        }
        Command::Sweep {
            case,
            from,
            to,
            step,
            common,
        } => {
            let opts = common.solver_options()?;
            let case = load_case(&case, common.seed)?;
            let result = ses_sweep(&case, from, to, step, &opts)?;
            let format = match common.format {
                Some(Format::Json) => OutputFormat::Json,
                _ => OutputFormat::Csv,
            };
            emit(Output::Sweep(&result), format, common.output())?;
            let failed = result
                .records
                .iter()
                .filter(|r| r.status != "converged")
                .count();
            eprintln!(
                "{}: {} points, {} not converged",
                result.case,
                result.records.len(),
                failed
            );
            Ok(if failed == 0 {
                EXIT_OK
            } else {
                EXIT_NOT_CONVERGED
            })
        }
        Command::Check {
            case,
            points,
            common,
        } => {
            let case = load_case(&case, common.seed)?;
            let violations: Vec<String> = validate_case(&case).iter().map(|v| v.to_string()).collect();
            let audit = if violations.is_empty() {
                let problem: Problem<f64> = build_problem(&case)?;
                Some(finite_difference_audit(&problem, points.max(1), common.seed))
            } else {
                None
            };
            let code = match &audit {
                None => EXIT_INPUT,
                Some(a) if a.passed => EXIT_OK,
                Some(_) => EXIT_NOT_CONVERGED,
            };
            for v in &violations {
                eprintln!("{v}");
            }
            write_json(
                &CheckReport {
                    case: case.name.clone(),
                    violations,
                    audit,
                },
                common.output(),
            )?;
            Ok(code)
        }
        Command::Oracle { case, common } => {
            let opts = common.solver_options()?;
            let plate = load_case(&case, common.seed)?.copper_plate();
            let oracle = copper_plate_oracle(&plate)?;
            let problem: Problem<f64> = build_problem(&plate)?;
            let sol = solve(&problem, &opts)?;
            let d = problem.dispatch(&sol.x);
            let objective = problem.welfare(&sol.x).weighted_objective;
            let rel = (objective - oracle.objective).abs() / oracle.objective.abs().max(1.0);
            write_json(
                &OracleComparison {
                    case: plate.name.clone(),
                    oracle_lambda: oracle.lambda,
                    oracle_objective: oracle.objective,
                    solver_status: sol.status.as_str().to_string(),
                    solver_objective: objective,
                    relative_difference: rel,
                    oracle_p_agg_mw: oracle.p_agg,
                    solver_p_agg_mw: d.pa,
                    oracle_p_gen_mw: oracle.p_gen,
                    solver_p_gen_mw: d.pg,
                },
                common.output(),
            )?;
            Ok(if sol.converged() {
                EXIT_OK
            } else {
                EXIT_NOT_CONVERGED
            })
        }
        Command::Export { case, common } => {
            let case = load_case(&case, common.seed)?;
            write_text(&to_toml_string(&case)?, common.output())?;
            Ok(EXIT_OK)
        }
    }
}

/// Runs the command line and returns the process exit code: 0 on success,
/// 1 when the solver does not converge, 2 on bad input.
pub fn run<I, A>(args: I) -> i32
where
    I: IntoIterator<Item = A>,
    A: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
