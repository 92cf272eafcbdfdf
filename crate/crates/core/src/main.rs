use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Parser, Subcommand, ValueEnum};
use num_rational::BigRational;

use recbound::certify::{self, Certificate, CertifyError};
use recbound::descent::{solve, AnalysisReport, SolveStatus, SolverConfig};
use recbound::io::{self, ReportFormat};
use recbound::model::ValidatedSpec;
use recbound::oracle::{self, OracleError};

const EXIT_INFEASIBLE: u8 = 2;
const EXIT_REJECTED: u8 = 3;
const EXIT_INPUT: u8 = 4;
const EXIT_LIMIT: u8 = 5;

#[derive(Parser)]
#[command(name = "recbound", version, about = "Growth bounds for multivariate backtracking recurrences")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutFormat {
    Text,
    Machine,
}

#[derive(Subcommand)]
enum Command {
    /// Solve for the optimal weight vector and growth base.
    Analyze {
        file: PathBuf,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[arg(long, default_value_t = 0x5eed)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = OutFormat::Text)]
        out: OutFormat,
    },
    /// Compare exact values F(n t) against the solved growth base.
    Verify {
        file: PathBuf,
        #[arg(long)]
        n: u64,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
    /// Round the solution to rationals and check it with interval arithmetic.
    Certify {
        file: PathBuf,
        #[arg(long, default_value_t = certify::DEFAULT_BITS)]
        bits: u32,
        #[arg(long, default_value_t = 1e-6)]
        slack: f64,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        /// Check this growth base (`p/q`) instead of the rounded solution.
        #[arg(long, value_parser = parse_rational)]
        c: Option<BigRational>,
        /// Check this weight vector (comma-separated `p/q`) instead of the rounded solution.
        #[arg(long, value_parser = parse_rational_list)]
        w: Option<RationalList>,
    },
    /// Random-walk estimate of F(n t) from below.
    Walk {
        file: PathBuf,
        #[arg(long)]
        n: u64,
        #[arg(long, default_value_t = 100_000)]
        trials: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
}

#[derive(Clone)]
struct RationalList(Vec<BigRational>);

fn parse_rational(s: &str) -> Result<BigRational, String> {
    BigRational::from_str(s.trim()).map_err(|e| format!("expected p/q: {e}"))
}

fn parse_rational_list(s: &str) -> Result<RationalList, String> {
    s.split(',').map(parse_rational).collect::<Result<Vec<_>, _>>().map(RationalList)
}

struct Failure {
    code: u8,
    message: String,
}

fn fail(code: u8, message: impl Into<String>) -> Failure {
    Failure {
        code,
        message: message.into(),
    }
}

fn load(path: &PathBuf) -> Result<ValidatedSpec, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| fail(EXIT_INPUT, format!("{}: {e}", path.display())))?;
    io::parse(&text).map_err(|e| fail(EXIT_INPUT, format!("{}: {e}", path.display())))
}

fn analyze(spec: &ValidatedSpec, tol: f64, seed: u64) -> Result<AnalysisReport, Failure> {
    let config = SolverConfig {
        seed,
        ..SolverConfig::with_tol(tol)
    };
    solve(spec, &config).map_err(|e| fail(EXIT_INPUT, e.to_string()))
}

fn solved(spec: &ValidatedSpec, tol: f64, seed: u64) -> Result<AnalysisReport, Failure> {
    let report = analyze(spec, tol, seed)?;
    if report.status == SolveStatus::Infeasible {
        let text = io::emit_report(spec, &report, ReportFormat::Text);
        return Err(fail(EXIT_INFEASIBLE, text.trim_end().to_string()));
    }
    Ok(report)
}

fn oracle_failure(e: OracleError) -> Failure {
    let code = match e {
        OracleError::MemoLimit { .. } => EXIT_LIMIT,
        _ => EXIT_INPUT,
    };
    fail(code, e.to_string())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Analyze { file, tol, seed, out } => {
            let spec = load(&file)?;
            let report = analyze(&spec, tol, seed)?;
            let format = match out {
                OutFormat::Text => ReportFormat::Text,
                OutFormat::Machine => ReportFormat::Machine,
            };
            print!("{}", io::emit_report(&spec, &report, format));
            if report.status == SolveStatus::Infeasible {
                return Err(fail(EXIT_INFEASIBLE, "recurrence is infeasible"));
            }
            Ok(())
        }
        Command::Verify { file, n, tol } => {
            let spec = load(&file)?;
            let report = solved(&spec, tol, SolverConfig::default().seed)?;
            let table = oracle::growth_diagnostic(&spec, &report, n).map_err(oracle_failure)?;
            print!("{}", table.to_csv());
            if report.status == SolveStatus::Unbounded {
                eprintln!("growth base 1 is not attained; the table is informational");
                return Ok(());
            }
            let upper = table.upper_envelope_holds();
            let lower = table.lower_envelope_holds();
            eprintln!("upper envelope: {}", if upper { "ok" } else { "violated" });
            eprintln!("lower envelope: {}", if lower { "ok" } else { "violated" });
            if upper && lower {
                Ok(())
            } else {
                Err(fail(
                    EXIT_REJECTED,
                    format!("growth of F(n t) is inconsistent with c = {}", report.c),
                ))
            }
        }
        Command::Certify {
            file,
            bits,
            slack,
            tol,
            c,
            w,
        } => {
            let spec = load(&file)?;
            let (w, c) = match (w, c) {
                (Some(w), Some(c)) => (w.0, c),
                (w, c) => {
                    let report = solved(&spec, tol, SolverConfig::default().seed)?;
                    let (rw, rc) = certify::round_solution(&spec, &report, slack).map_err(|e| fail(EXIT_REJECTED, e.to_string()))?;
                    (w.map_or(rw, |l| l.0), c.unwrap_or(rc))
                }
            };
            match certify::certify_with_retry(&spec, &w, &c, bits) {
                Ok(bound) => {
                    print!("{}", Certificate::new(&spec, bound));
                    Ok(())
                }
                Err(e @ CertifyError::PrecisionExhausted { .. }) => Err(fail(EXIT_LIMIT, e.to_string())),
                Err(e @ CertifyError::DimensionMismatch { .. }) => Err(fail(EXIT_INPUT, e.to_string())),
                Err(e) => Err(fail(EXIT_REJECTED, format!("certificate rejected: {e}"))),
            }
        }
        Command::Walk {
            file,
            n,
            trials,
            seed,
            tol,
        } => {
            let spec = load(&file)?;
            let report = solved(&spec, tol, SolverConfig::default().seed)?;
            let est = oracle::lower_bound_estimate(&spec, &report, n, trials, seed).map_err(oracle_failure)?;
            println!("n = {n}");
            println!("c = {:?}", report.c);
            println!("trials = {}", est.trials);
            println!("successes = {}", est.successes);
            println!("estimate = {:?}", est.estimate);
            println!("standard_error = {:?}", est.standard_error);
            if let (Some(lo), Some(hi)) = (est.min_success_probability, est.max_success_probability) {
                println!("path_probability.min = {lo:?}");
                println!("path_probability.max = {hi:?}");
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_INPUT)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
