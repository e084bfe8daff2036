//! `cvsim`: run, classify, cross-check and benchmark `.cvq` circuits.
//!
//! Exit codes:
//!
//! | code | meaning                                                   |
//! |------|-----------------------------------------------------------|
//! | 0    | success (`check`: simulatable; `verify`: within tolerance) |
//! | 1    | usage error, unreadable file, parse or validation failure  |
//! | 2    | circuit not covered by the Gaussian toolkit                |
//! | 3    | simulatability unknown                                     |
//! | 4    | runtime numeric error                                      |
//! | 5    | program too large for the Fock oracle                      |
//! | 6    | `verify`: engines disagree beyond the tolerance            |

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use cvsim::bench::{self, BenchConfig};
use cvsim::circuit::{execute, execute_ensemble, execute_shot, CircuitProgram, TraceReport};
use cvsim::classify::{check, explain, classify, profile, Status};
use cvsim::fock::{
    self, max_live_modes, oracle_ensemble, oracle_execute, CompareReport, OracleOptions, OutcomePolicy, MAX_MODES,
};
use cvsim::{Error, OutcomeValue, RandomStream};
use serde::Serialize;

const EXIT_USAGE: u8 = 1;
const EXIT_NOT_COVERED: u8 = 2;
const EXIT_RUNTIME: u8 = 4;
const EXIT_OVERSIZE: u8 = 5;
const EXIT_MISMATCH: u8 = 6;

#[derive(Parser)]
#[command(name = "cvsim", version, about = "Gaussian simulation of continuous-variable optical circuits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a circuit and write a JSON trace.
    Run(RunArgs),
    /// Classify a circuit and write the verdict as JSON.
    Check {
        path: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare the Gaussian engine with the truncated Fock-space oracle.
    Verify(VerifyArgs),
    /// Measure wall time against mode count.
    Bench(BenchArgs),
}

#[derive(Args)]
struct RunArgs {
    path: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    shots: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Include each shot's final state in the trace.
    #[arg(long)]
    emit_final_state: bool,
    /// Run circuits outside the Gaussian toolkit on the Fock oracle (at most three live modes).
    #[arg(long)]
    force_oracle: bool,
    /// Oracle cutoff used with --force-oracle.
    #[arg(long, default_value_t = 30)]
    cutoff: usize,
}

#[derive(Args)]
struct VerifyArgs {
    path: PathBuf,
    #[arg(long, default_value_t = 30)]
    cutoff: usize,
    #[arg(long, default_value_t = 1e-5)]
    tol: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Compare moments averaged over all measurement outcomes instead of a
    /// single shot.
    #[arg(long)]
    ensemble: bool,
    /// Negate squeezing parameters in the oracle (negative control).
    #[arg(long)]
    flip_squeeze: bool,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, default_value_t = 256)]
    max_modes: usize,
    #[arg(long, default_value_t = 8)]
    min_modes: usize,
    #[arg(long, default_value_t = 1)]
    ops_per_mode: usize,
    #[arg(long, default_value_t = 3)]
    repetitions: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// JSON report path; the CSV is written next to it.
    #[arg(long)]
    out: Option<PathBuf>,
    /// CSV path (defaults to the report path with a `.csv` extension).
    #[arg(long)]
    csv: Option<PathBuf>,
}

/// Failure carrying its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

fn runtime(e: Error) -> Failure {
    let code = match e {
        Error::NonGaussianGate { .. } | Error::NonGaussianInput { .. } | Error::NonGaussianOutcome { .. } => {
            EXIT_NOT_COVERED
        }
        Error::InvalidProgram(_) => EXIT_USAGE,
        _ => EXIT_RUNTIME,
    };
    Failure::new(code, e.to_string())
}

type Outcome = Result<u8, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Run(args) => cmd_run(&args),
        Command::Check { path, out } => cmd_check(&path, out.as_deref()),
        Command::Verify(args) => cmd_verify(&args),
        Command::Bench(args) => cmd_bench(&args),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn load(path: &Path) -> Result<CircuitProgram, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::new(EXIT_USAGE, format!("cannot read {}: {e}", path.display())))?;
    cvsim::parse(&text).map_err(|diagnostics| {
        let lines: Vec<String> = diagnostics
            .iter()
            .map(|d| format!("{}:{d}", path.display()))
            .collect();
        Failure::new(EXIT_USAGE, format!("invalid program\n{}", lines.join("\n")))
    })
}

fn write_json<T: Serialize>(value: &T, out: Option<&Path>) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Failure::new(EXIT_RUNTIME, e.to_string()))?;
    text.push('\n');
    write_text(&text, out)
}

fn write_text(text: &str, out: Option<&Path>) -> Result<(), Failure> {
    let result = match out {
        Some(path) => fs::write(path, text),
        None => std::io::stdout().lock().write_all(text.as_bytes()),
    };
    result.map_err(|e| Failure::new(EXIT_USAGE, format!("cannot write output: {e}")))
}

/// Quadrature moments of an oracle state, in the layout of a Gaussian state.
#[derive(Serialize)]
struct Moments {
    num_modes: usize,
    mean: Vec<f64>,
    cov: Vec<f64>,
}

impl Moments {
    fn of(state: &fock::FockState) -> Self {
        let (mean, cov) = state.moments();
        let dim = mean.len();
        Self {
            num_modes: dim / 2,
            mean: mean.iter().copied().collect(),
            cov: (0..dim).flat_map(|r| (0..dim).map(move |c| (r, c))).map(|(r, c)| cov[(r, c)]).collect(),
        }
    }
}

#[derive(Serialize)]
struct OracleShot {
    shot_index: u64,
    modes: Vec<String>,
    state: Moments,
    leakage: f64,
}

#[derive(Serialize)]
struct RegisterValues {
    name: String,
    values: Vec<OutcomeValue>,
}

#[derive(Serialize)]
struct OracleTrace {
    seed: u64,
    shots: u64,
    engine: &'static str,
    cutoff: usize,
    registers: Vec<RegisterValues>,
    #[serde(skip_serializing_if = "Option::is_none")]
    final_state: Option<Vec<OracleShot>>,
}

fn cmd_run(args: &RunArgs) -> Outcome {
    let program = load(&args.path)?;
    let verdict = classify(&profile(&program));
    if verdict.status != Status::Simulatable {
        let code = verdict.status.exit_code() as u8;
        if !args.force_oracle {
            eprint!("{}", explain(&verdict));
            return Err(Failure::new(code, "refusing to run a circuit outside the Gaussian toolkit (see --force-oracle)"));
        }
        if max_live_modes(&program) > MAX_MODES {
            eprint!("{}", explain(&verdict));
            return Err(Failure::new(code, format!("--force-oracle needs at most {MAX_MODES} live modes")));
        }
        return run_oracle(&program, args);
    }
    let traces = execute(&program, args.seed, args.shots as usize).map_err(runtime)?;
    let report = TraceReport::new(&program, args.seed, &traces, args.emit_final_state);
    write_json(&report, args.out.as_deref())?;
    Ok(0)
}

fn run_oracle(program: &CircuitProgram, args: &RunArgs) -> Outcome {
    let options = OracleOptions::new(args.cutoff);
    let mut shots = Vec::new();
    for i in 0..args.shots {
        let run = oracle_execute(program, &options, OutcomePolicy::Sample(RandomStream::new(args.seed, i)))
            .map_err(runtime)?;
        shots.push((i, run));
    }
    let registers = program
        .registers()
        .into_iter()
        .map(|name| RegisterValues {
            name: name.to_string(),
            values: shots
                .iter()
                .filter_map(|(_, run)| run.outcomes.iter().find(|o| o.register == name).map(|o| o.value))
                .collect(),
        })
        .collect();
    let final_state = args.emit_final_state.then(|| {
        shots
            .iter()
            .map(|(i, run)| OracleShot {
                shot_index: *i,
                modes: run.state.modes().iter().map(|m| m.to_string()).collect(),
                state: Moments::of(&run.state),
                leakage: run.state.leakage(),
            })
            .collect()
    });
    let trace = OracleTrace {
        seed: args.seed,
        shots: args.shots,
        engine: "fock-oracle",
        cutoff: args.cutoff,
        registers,
        final_state,
    };
    write_json(&trace, args.out.as_deref())?;
    Ok(0)
}

fn cmd_check(path: &Path, out: Option<&Path>) -> Outcome {
    let program = load(path)?;
    let report = check(&program);
    write_json(&report, out)?;
    Ok(report.status.exit_code() as u8)
}

#[derive(Serialize)]
struct VerifyReport {
    mode: &'static str,
    cutoff: usize,
    seed: u64,
    flip_squeeze: bool,
    /// Outcomes sampled by the Gaussian engine and replayed in the oracle.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    outcomes: Vec<(String, OutcomeValue)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    branches: Option<usize>,
    comparison: CompareReport,
}

fn cmd_verify(args: &VerifyArgs) -> Outcome {
    let program = load(&args.path)?;
    let live = max_live_modes(&program);
    if live > MAX_MODES {
        return Err(Failure::new(
            EXIT_OVERSIZE,
            format!("program keeps {live} modes alive; the oracle handles at most {MAX_MODES}"),
        ));
    }
    let options = OracleOptions {
        flip_squeeze: args.flip_squeeze,
        ..OracleOptions::new(args.cutoff)
    };
    let report = if args.ensemble {
        let gauss = execute_ensemble(&program).map_err(runtime)?;
        let moments = oracle_ensemble(&program, &options).map_err(runtime)?;
        VerifyReport {
            mode: "ensemble",
            cutoff: args.cutoff,
            seed: args.seed,
            flip_squeeze: args.flip_squeeze,
            outcomes: Vec::new(),
            branches: Some(moments.branches),
            comparison: moments.compare(&gauss.state, args.tol).map_err(runtime)?,
        }
    } else {
        let trace = execute_shot(&program, RandomStream::new(args.seed, 0)).map_err(runtime)?;
        let outcomes: HashMap<String, OutcomeValue> =
            trace.outcomes.iter().map(|o| (o.register.clone(), o.value)).collect();
        let run = oracle_execute(&program, &options, OutcomePolicy::Replay(&outcomes)).map_err(runtime)?;
        VerifyReport {
            mode: "replay",
            cutoff: args.cutoff,
            seed: args.seed,
            flip_squeeze: args.flip_squeeze,
            outcomes: trace.outcomes.iter().map(|o| (o.register.clone(), o.value)).collect(),
            branches: None,
            comparison: fock::compare(&trace.final_state, &run.state, args.tol, true).map_err(runtime)?,
        }
    };
    write_json(&report, args.out.as_deref())?;
    Ok(if report.comparison.pass { 0 } else { EXIT_MISMATCH })
}

fn cmd_bench(args: &BenchArgs) -> Outcome {
    if args.max_modes < 8 {
        return Err(Failure::new(EXIT_USAGE, "--max-modes must be at least 8"));
    }
    let config = BenchConfig {
        min_modes: args.min_modes.min(args.max_modes),
        max_modes: args.max_modes,
        ops_per_mode: args.ops_per_mode,
        repetitions: args.repetitions,
        seed: args.seed,
        ..BenchConfig::default()
    };
    let report = bench::run(&config).map_err(runtime)?;
    write_json(&report, args.out.as_deref())?;
    let csv_path = args
        .csv
        .clone()
        .or_else(|| args.out.as_ref().map(|p| p.with_extension("csv")));
    let mut csv = Vec::new();
    report
        .write_csv(&mut csv)
        .map_err(|e| Failure::new(EXIT_RUNTIME, e.to_string()))?;
    match csv_path {
        Some(path) => fs::write(&path, csv).map_err(|e| Failure::new(EXIT_USAGE, format!("cannot write {}: {e}", path.display())))?,
        None => eprint!("{}", String::from_utf8_lossy(&csv)),
    }
    Ok(0)
}
