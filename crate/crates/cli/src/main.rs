use std::fs::File;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use qudit_univ::check::{
    check, closure_report, delta_report, haar_dim_report, selftest, BackendChoice, CheckError, CheckOptions,
    ClosureOutput, DeltaReport, Diagnostics, HaarDimReport, SelfTestReport, UniversalityReport,
};
use qudit_univ::closure::DEFAULT_MAX_ELEMENTS;
use qudit_univ::commutant::DEFAULT_MAX_ITERS;
use qudit_univ::gates::{parse_gate_set, GateError, GateSet, GateSetOptions};
use qudit_univ::json;
use qudit_univ::moments::DeltaOptions;
use qudit_univ::numerics::{DEFAULT_NORM_TOL, DEFAULT_REL_TOL};

const EXIT_PARSE: u8 = 3;
const EXIT_NUMERICS: u8 = 4;

/// Decide universality of a qudit gate set from commutant dimensions.
#[derive(Parser, Debug)]
#[command(name = "qudit-univ", version)]
struct Cli {
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the universality test on a gate-set file.
    Check {
        #[command(flatten)]
        input: InputArgs,
        /// Tensor power to test (defaults to 3 for qubits, 2 otherwise).
        #[arg(long)]
        t: Option<usize>,
        /// Absolute tolerance for δ diagnostics.
        #[arg(long, default_value_t = DEFAULT_NORM_TOL)]
        tol: f64,
        /// Relative singular-value cutoff for the dense rank.
        #[arg(long, default_value_t = DEFAULT_REL_TOL)]
        rank_tol: f64,
        /// Matrix-free iteration budget (operator applies per probe).
        #[arg(long, default_value_t = DEFAULT_MAX_ITERS)]
        budget: usize,
        #[arg(long, value_enum, default_value_t = BackendArg::Auto)]
        backend: BackendArg,
        #[arg(long, value_enum, default_value_t = DiagnosticsArg::None)]
        diagnostics: DiagnosticsArg,
        #[arg(long, default_value_t = 0x5eed)]
        seed: u64,
    },
    /// Estimate δ(t) = ‖T_S − T_Haar‖ for a gate-set file.
    Delta {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long)]
        t: usize,
        #[arg(long, default_value_t = DEFAULT_NORM_TOL)]
        tol: f64,
        #[arg(long, default_value_t = 0x5eed)]
        seed: u64,
        /// Average over the generated group instead of over the gates.
        #[arg(long)]
        group: bool,
        /// Closure budget for --group.
        #[arg(long, default_value_t = DEFAULT_MAX_ELEMENTS)]
        budget: usize,
    },
    /// Exact dim C(U(d)^{t1,t2}) from the permutation Gram rank.
    HaarDim {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        t1: usize,
        #[arg(long)]
        t2: usize,
        #[arg(long)]
        json: bool,
    },
    /// Close the gate set into a group, up to a budget of elements.
    Closure {
        #[command(flatten)]
        input: InputArgs,
        /// Maximum number of projective classes.
        #[arg(long, default_value_t = DEFAULT_MAX_ELEMENTS)]
        budget: usize,
    },
    /// Recheck the built-in constants and identities.
    Selftest {
        #[arg(long)]
        json: bool,
    },
}

#[derive(Args, Debug)]
struct InputArgs {
    /// Gate-set JSON file, or `-` for stdin.
    file: PathBuf,
    /// Emit the report as JSON on stdout.
    #[arg(long)]
    json: bool,
    /// Replace each matrix by its nearest unitary before validation.
    #[arg(long)]
    project_unitary: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum BackendArg {
    Auto,
    Dense,
    Matrixfree,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum DiagnosticsArg {
    None,
    Delta,
    Closure,
    All,
}

#[derive(Debug)]
enum Failure {
    Input(String),
    Numerics(String),
}

impl From<GateError> for Failure {
    fn from(e: GateError) -> Self {
        Failure::Input(e.to_string())
    }
}

impl From<CheckError> for Failure {
    fn from(e: CheckError) -> Self {
        match e {
            CheckError::Gates(_) | CheckError::HaarRef(_) => Failure::Input(e.to_string()),
            other => Failure::Numerics(other.to_string()),
        }
    }
}

fn load(input: &InputArgs) -> Result<GateSet, Failure> {
    let options = GateSetOptions {
        project_unitary: input.project_unitary,
        ..GateSetOptions::default()
    };
    let gs = if input.file == Path::new("-") {
        let mut buf = Vec::new();
        io::stdin()
            .read_to_end(&mut buf)
            .map_err(|e| Failure::Input(format!("reading stdin: {e}")))?;
        parse_gate_set(buf.as_slice(), options)?
    } else {
        let f =
            File::open(&input.file).map_err(|e| Failure::Input(format!("{}: {e}", input.file.display())))?;
        parse_gate_set(f, options)?
    };
    for m in gs.merged() {
        log::warn!(
            "gate `{}` duplicates `{}` up to phase; dropped",
            m.label,
            m.duplicate_of
        );
    }
    Ok(gs)
}

fn emit<T: Serialize>(report: &T) -> Result<(), Failure> {
    let text = json::to_string_pretty(report).map_err(|e| Failure::Numerics(e.to_string()))?;
    println!("{text}");
    Ok(())
}

fn fmt_opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map_or_else(|| "-".to_string(), |x| x.to_string())
}

fn print_check(r: &UniversalityReport) {
    let mut out = io::stdout().lock();
    let identity = if r.includes_identity {
        ", identity added"
    } else {
        ""
    };
    let _ = writeln!(
        out,
        "gate set      {} (d = {}{identity})",
        r.gate_labels.join(", "),
        r.d
    );
    let _ = writeln!(out, "t             {}", r.t_used);
    let _ = writeln!(
        out,
        "commutant     {} (target {}), {:?}, gap {:.3e}, {:?}",
        r.commutant_dim, r.target_dim, r.certainty, r.gap_ratio, r.backend
    );
    let holds = if r.necessary_condition_holds {
        "holds"
    } else {
        "fails"
    };
    let _ = writeln!(
        out,
        "necessary     dim C(S^(1,1)) = {} ({holds})",
        r.necessary_condition_dim
    );
    if let Some(deltas) = &r.delta_diagnostics {
        for (t, e) in deltas {
            let flag = if e.at_one { " AT_ONE" } else { "" };
            let _ = writeln!(
                out,
                "delta({t})      {:.12} ± {:.1e}{flag}",
                e.value, e.error_bound
            );
        }
    }
    if let Some(c) = &r.closure_diagnostics {
        for (t, e) in &c.group_deltas {
            let _ = writeln!(out, "group delta({t}) {:.12}", e.value);
        }
    }
    if let Some(c) = &r.closure_diagnostics {
        let _ = writeln!(
            out,
            "closure       {:?}, order {}, depth {}, character dim {}",
            c.closure.status,
            fmt_opt(c.closure.order),
            c.closure.product_depth,
            fmt_opt(c.character_commutant_dim)
        );
    }
    let _ = writeln!(out, "verdict       {:?}", r.verdict);
}

fn print_delta(r: &DeltaReport) {
    let flag = if r.delta.at_one { " AT_ONE" } else { "" };
    let over = match r.group_order {
        Some(order) => format!(" over the group of order {order}"),
        None => String::new(),
    };
    println!(
        "delta({}) = {:.12} ± {:.1e}{flag}{over} ({} iterations)",
        r.delta.t, r.delta.value, r.delta.error_bound, r.delta.iterations
    );
}

fn print_haar_dim(r: &HaarDimReport) {
    println!("dim C(U({})^({},{})) = {}", r.d, r.t1, r.t2, r.dim);
}

fn print_closure(r: &ClosureOutput) {
    println!(
        "{:?}: order {}, depth {}, {} classes explored",
        r.closure.status,
        fmt_opt(r.closure.order),
        r.closure.product_depth,
        r.closure.explored
    );
}

fn print_selftest(r: &SelfTestReport) {
    for c in &r.checks {
        let mark = if c.passed { "ok  " } else { "FAIL" };
        println!("{mark} {:<28} {}", c.name, c.detail);
    }
}

fn run(cli: Cli) -> Result<u8, Failure> {
    match cli.command {
        Command::Check {
            input,
            t,
            tol,
            rank_tol,
            budget,
            backend,
            diagnostics,
            seed,
        } => {
            let gs = load(&input)?;
            let opts = CheckOptions {
                t,
                rank_tol,
                delta_tol: tol,
                backend: match backend {
                    BackendArg::Auto => BackendChoice::Auto,
                    BackendArg::Dense => BackendChoice::Dense,
                    BackendArg::Matrixfree => BackendChoice::MatrixFree,
                },
                max_iters: budget,
                diagnostics: match diagnostics {
                    DiagnosticsArg::None => Diagnostics::None,
                    DiagnosticsArg::Delta => Diagnostics::Delta,
                    DiagnosticsArg::Closure => Diagnostics::Closure,
                    DiagnosticsArg::All => Diagnostics::All,
                },
                seed,
                ..CheckOptions::default()
            };
            let report = check(&gs, &opts)?;
            if input.json {
                emit(&report)?;
            } else {
                print_check(&report);
            }
            Ok(report.exit_code() as u8)
        }
        Command::Delta {
            input,
            t,
            tol,
            seed,
            group,
            budget,
        } => {
            let gs = load(&input)?;
            let opts = DeltaOptions {
                tol,
                seed,
                ..DeltaOptions::default()
            };
            let report = delta_report(&gs, t, &opts, group.then_some(budget)).map_err(|e| match e {
                CheckError::Moments(qudit_univ::moments::MomentsError::SizeCap { .. }) => Failure::Input(
                    format!("{e}; the `check` subcommand decides universality at a smaller t"),
                ),
                other => other.into(),
            })?;
            if input.json {
                emit(&report)?;
            } else {
                print_delta(&report);
            }
            Ok(0)
        }
        Command::HaarDim { d, t1, t2, json } => {
            let report = haar_dim_report(d, t1, t2)?;
            if json {
                emit(&report)?;
            } else {
                print_haar_dim(&report);
            }
            Ok(0)
        }
        Command::Closure { input, budget } => {
            let gs = load(&input)?;
            let report = closure_report(&gs, budget)?;
            if input.json {
                emit(&report)?;
            } else {
                print_closure(&report);
            }
            Ok(0)
        }
        Command::Selftest { json } => {
            let report = selftest();
            if json {
                emit(&report)?;
            } else {
                print_selftest(&report);
            }
            Ok(if report.passed { 0 } else { 1 })
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_PARSE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .parse_default_env()
        .init();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_PARSE)
        }
        Err(Failure::Numerics(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_NUMERICS)
        }
    }
}
