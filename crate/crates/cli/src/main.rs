//! `tsia`: check and run task-language programs.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};

use tsia::entry::{default_entry, parse_call};
use tsia::exec::{compare_runs, execute, run_entry, Executor, RunConfig, RunError, SimPlan, SimReport};
use tsia::frontend::compile;
use tsia::store::ItemStore;
use tsia::workload::{self, TraceSink, WorkloadError};
use tsia::{CheckedProgram, Policy};

#[derive(Parser)]
#[command(name = "tsia", version, about = "Check and run task-language programs")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum ExecutorKind {
    Seq,
    Parallel,
    Sim,
}

#[derive(Subcommand)]
enum Cmd {
    /// Parse and check a program.
    Check { path: PathBuf },
    /// Run a program on one of the executors.
    Run {
        path: PathBuf,
        /// Root call, e.g. "fib(10;;a)". Defaults to `main` or the first
        /// routine without in-parameters.
        #[arg(long)]
        entry: Option<String>,
        #[arg(long, value_enum, default_value = "seq")]
        executor: ExecutorKind,
        /// Worker threads (parallel) or identical workers when no plan is
        /// given (sim).
        #[arg(long, default_value_t = 4)]
        workers: usize,
        /// delegate-always, inline-always, inline-below-depth:D or
        /// inline-below-size:N.
        #[arg(long)]
        policy: Option<Policy>,
        /// Overrides the plan's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Simulated cluster plan (TOML).
        #[arg(long)]
        plan: Option<PathBuf>,
        /// Write the event trace here, one JSON object per line.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Print run statistics after the values.
        #[arg(long)]
        stats: bool,
        /// Routine mapped over every event of --input.
        #[arg(long, requires_all = ["input", "output"])]
        workload: Option<String>,
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Compare two saved value dumps.
    Diff { a: PathBuf, b: PathBuf },
}

/// Exit 1 for program errors, 2 for usage and file errors.
enum Failure {
    Program(String),
    Usage(String),
}

impl From<RunError> for Failure {
    fn from(e: RunError) -> Self {
        match e {
            RunError::Entry(_) => Failure::Usage(e.to_string()),
            RunError::Exec(_) => Failure::Program(e.to_string()),
        }
    }
}

impl From<tsia::ExecError> for Failure {
    fn from(e: tsia::ExecError) -> Self {
        Failure::Program(e.to_string())
    }
}

impl From<WorkloadError> for Failure {
    fn from(e: WorkloadError) -> Self {
        match e {
            WorkloadError::Unresolved(_) => Failure::Program(e.to_string()),
            _ => Failure::Usage(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Check { path } => return check(&path),
        Cmd::Diff { a, b } => diff(&a, &b),
        Cmd::Run { path, entry, executor, workers, policy, seed, plan, trace, stats, workload, input, output } => {
            let opts = RunOpts { entry, executor, workers, policy, seed, plan, trace, stats };
            run(&path, &opts, workload.zip(input.zip(output)))
        }
    };
    match result {
        Ok(code) => code,
        Err(Failure::Program(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}

fn read_source(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("MissingFile: {}: {e}", path.display())))
}

fn load(path: &Path) -> Result<CheckedProgram, Failure> {
    let src = read_source(path)?;
    compile(&src).map_err(|diags| {
        let file = path.display().to_string();
        Failure::Program(diags.iter().map(|d| d.render(&file)).collect::<Vec<_>>().join("\n"))
    })
}

fn check(path: &Path) -> ExitCode {
    match load(path) {
        Ok(_) => ExitCode::SUCCESS,
        Err(Failure::Program(m)) => {
            eprintln!("{m}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}

fn diff(a: &Path, b: &Path) -> Result<ExitCode, Failure> {
    let (ta, tb) = (read_source(a)?, read_source(b)?);
    match compare_runs(&ta, &tb) {
        None => Ok(ExitCode::SUCCESS),
        Some(d) => {
            println!("{d}");
            Ok(ExitCode::from(1))
        }
    }
}

struct RunOpts {
    entry: Option<String>,
    executor: ExecutorKind,
    workers: usize,
    policy: Option<Policy>,
    seed: Option<u64>,
    plan: Option<PathBuf>,
    trace: Option<PathBuf>,
    stats: bool,
}

fn executor(opts: &RunOpts) -> Result<Executor, Failure> {
    if opts.workers == 0 {
        return Err(Failure::Usage("--workers must be at least 1".into()));
    }
    Ok(match opts.executor {
        ExecutorKind::Seq => Executor::Sequential,
        ExecutorKind::Parallel => Executor::Parallel(opts.workers),
        ExecutorKind::Sim => {
            let plan = match &opts.plan {
                Some(p) => SimPlan::load(p, opts.seed).map_err(|e| Failure::Usage(e.to_string()))?,
                None => SimPlan { seed: opts.seed.unwrap_or(0), ..SimPlan::uniform(opts.workers) },
            };
            Executor::Sim(plan)
        }
    })
}

fn run(path: &Path, opts: &RunOpts, workload: Option<(String, (PathBuf, PathBuf))>) -> Result<ExitCode, Failure> {
    let program = load(path)?;
    let exec = executor(opts)?;
    let mut cfg = RunConfig::new(opts.policy.unwrap_or_else(|| exec.default_policy()));
    if let Executor::Sim(plan) = &exec {
        if let Some(order) = plan.order().map_err(|e| Failure::Usage(e.to_string()))? {
            cfg.order = order;
        }
    }

    let report = match workload {
        Some((routine, (input, output))) => {
            let params = workload::check_routine(&program, &routine)?;
            let events = workload::load_events(&input, &params)?;
            let store = Arc::new(ItemStore::new());
            let wl = workload::build(&store, &routine, &params, &events);
            let report = execute(&program, store.clone(), wl.roots.clone(), &exec, &cfg)?;
            workload::write_outputs(&store, &wl, &output)?;
            println!("events = {}", events.len());
            report
        }
        None => {
            let call = match &opts.entry {
                Some(text) => parse_call(text).map_err(|e| Failure::Usage(e.to_string()))?,
                None => default_entry(&program).map_err(|e| Failure::Usage(e.to_string()))?,
            };
            let run = run_entry(&program, &call, &exec, &cfg)?;
            print!("{}", run.values);
            run.report
        }
    };
    finish(opts, &report)?;
    Ok(ExitCode::SUCCESS)
}

fn finish(opts: &RunOpts, report: &SimReport) -> Result<(), Failure> {
    if let Some(path) = &opts.trace {
        let sink = TraceSink::create(path)?;
        sink.emit_all(&report.trace)?;
        sink.flush()?;
    }
    if opts.stats {
        println!("--- stats");
        println!("{}", report.stats);
    }
    Ok(())
}
