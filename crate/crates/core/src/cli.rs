//! Command-line front end.
//!
//! Exit codes: 0 success, 1 I/O or other failure, 2 parse or validation
//! error, 3 divergence.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::bench;
use crate::engine::{self, Scheme};
use crate::error::{Result, SimError};
use crate::metrics;
use crate::scenario::Scenario;
use crate::trace;

#[derive(Debug, Parser)]
#[command(
    name = "froi",
    version,
    about = "Fixed-step three-phase transient simulator"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a scenario and write its CSV trace.
    Run(RunArgs),
    /// Voltage and phase errors of a trace against a finer reference trace.
    Compare(CompareArgs),
    /// Time schemes over a grid of step sizes.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Scenario file; the bundled two-bus scenario when omitted.
    pub scenario: Option<PathBuf>,
    /// scheme1, scheme2 or emt; overrides the scenario.
    #[arg(long)]
    pub scheme: Option<Scheme>,
    /// Step size in seconds.
    #[arg(long)]
    pub step_size: Option<f64>,
    /// Simulated time span in seconds.
    #[arg(long)]
    pub duration: Option<f64>,
    /// Trace file; standard output when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Trace to evaluate.
    pub trace: PathBuf,
    /// Reference trace whose step divides the evaluated trace's step.
    pub reference: PathBuf,
    /// Also write the report as CSV.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Scenario file; the bundled two-bus scenario when omitted.
    pub scenario: Option<PathBuf>,
    /// Schemes to time; all of them when omitted.
    #[arg(long, value_delimiter = ',')]
    pub scheme: Vec<Scheme>,
    /// Step sizes in seconds; 125 us to 4 ms in doublings when omitted.
    #[arg(long, value_delimiter = ',')]
    pub step_size: Vec<f64>,
    /// Simulated time span in seconds.
    #[arg(long)]
    pub duration: Option<f64>,
    /// Number of disconnected copies of the system to simulate together.
    #[arg(long, default_value_t = 1)]
    pub copies: usize,
    /// Timed runs per cell; the median is reported.
    #[arg(long, default_value_t = 3)]
    pub repetitions: usize,
    /// Also write the timings as CSV.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

pub const DEFAULT_BENCH_STEPS: [f64; 6] = [125e-6, 250e-6, 500e-6, 1e-3, 2e-3, 4e-3];

/// Process exit status for an error.
pub fn exit_code(err: &SimError) -> i32 {
    match err {
        SimError::Parse(_)
        | SimError::Validation(_)
        | SimError::Domain(_)
        | SimError::Incompatible(_) => 2,
        SimError::Divergence { .. } | SimError::Singular { .. } => 3,
        SimError::Io(_) | SimError::Csv(_) => 1,
    }
}

fn load_scenario(path: Option<&PathBuf>) -> Result<Scenario> {
    match path {
        Some(p) => Scenario::load(p),
        None => Ok(Scenario::two_bus()),
    }
}

pub fn cmd_run(args: &RunArgs, out: &mut dyn Write, log: &mut dyn Write) -> Result<()> {
    let mut sc = load_scenario(args.scenario.as_ref())?;
    if let Some(s) = args.scheme {
        sc = sc.with_scheme(s);
    }
    if let Some(h) = args.step_size {
        sc = sc.with_step_size(h);
    }
    if let Some(d) = args.duration {
        sc = sc.with_duration(d);
    }
    sc.validate()?;
    let sim = engine::run(&sc)?;
    match &args.output {
        Some(path) => trace::save(&sim.series, path)?,
        None => trace::write(&sim.series, &mut *out)?,
    }
    let _ = writeln!(
        log,
        "{}: {} steps of {} s in {:.3} s, max {} iterations per step",
        sc.scheme,
        sim.stats.steps.len(),
        sc.solver.h,
        sim.stats.wall.as_secs_f64(),
        sim.stats.max_iterations()
    );
    Ok(())
}

pub fn cmd_compare(args: &CompareArgs, out: &mut dyn Write) -> Result<metrics::ErrorReport> {
    let com = trace::load(&args.trace)?;
    let reference = trace::load(&args.reference)?;
    let report = metrics::compare(&com, &reference, None)?;
    let reports = [report.clone()];
    if let Some(path) = &args.output {
        fs::write(path, metrics::error_csv(&reports))?;
    }
    write!(out, "{}", metrics::error_table(&reports))?;
    Ok(report)
}

pub fn cmd_bench(args: &BenchArgs, out: &mut dyn Write) -> Result<Vec<bench::BenchCell>> {
    let mut sc = load_scenario(args.scenario.as_ref())?;
    if let Some(d) = args.duration {
        sc = sc.with_duration(d);
    }
    if args.copies == 0 {
        return Err(SimError::Validation("copies must be at least 1".into()));
    }
    let schemes = if args.scheme.is_empty() {
        Scheme::ALL.to_vec()
    } else {
        args.scheme.clone()
    };
    let steps = if args.step_size.is_empty() {
        DEFAULT_BENCH_STEPS.to_vec()
    } else {
        args.step_size.clone()
    };
    let cells = bench::bench_grid(&sc, &schemes, &steps, args.copies, args.repetitions)?;
    if let Some(path) = &args.output {
        fs::write(path, bench::bench_csv(&cells))?;
    }
    write!(out, "{}", bench::bench_table(&cells))?;
    Ok(cells)
}

/// Parses `args` and executes the command, returning the exit status.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    let result = match &cli.command {
        Command::Run(a) => cmd_run(a, &mut stdout.lock(), &mut stderr.lock()),
        Command::Compare(a) => cmd_compare(a, &mut stdout.lock()).map(|_| ()),
        Command::Bench(a) => cmd_bench(a, &mut stdout.lock()).map(|_| ()),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
