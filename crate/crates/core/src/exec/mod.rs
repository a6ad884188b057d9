//! Executors driving a [`TaskPool`] to completion, and the values, traces
//! and statistics they report.
//!
//! All three share the same commit path, so they differ only in who
//! evaluates which ready task when.

mod parallel;
mod plan;
mod sequential;
mod sim;

use std::fmt;
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

pub use parallel::run_parallel;
pub use plan::{PlanError, SimPlan, WorkerSpec};
pub use sequential::run_sequential;
pub use sim::{run_simcluster, Execution, SimReport};

use crate::entry::OutputRef;
use crate::eval::{EvalConfig, EvalError, DEFAULT_DEPTH_CAP};
use crate::pool::{ChildSpec, EventKind, Order, Policy, PoolError, PoolEvent, TaskPool};
use crate::store::{EnvEntry, Item, ItemStore, StoreError, TaskId};
use crate::value::Value;

/// Stack size for threads that evaluate task bodies; in-place calls
/// recurse on the native stack.
pub const EVAL_STACK_BYTES: usize = 512 << 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExecError {
    #[error("task {task}: {source}")]
    Eval { task: String, source: EvalError },
    #[error(transparent)]
    Pool(#[from] PoolError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("deadlock: {pending} tasks pending and none can become ready")]
    Deadlock { pending: usize },
    #[error("stalled at t={time}: {pending} tasks pending and no worker will ever be available")]
    StalledForever { time: f64, pending: usize },
    #[error("output `{0}` was never produced")]
    Unresolved(String),
    #[error("worker thread panicked")]
    WorkerPanic,
}

/// Evaluation settings shared by all executors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunConfig {
    pub policy: Policy,
    pub order: Order,
    pub depth_cap: usize,
    pub capacity: usize,
}

impl RunConfig {
    pub fn new(policy: Policy) -> RunConfig {
        RunConfig { policy, order: Order::Lifo, depth_cap: DEFAULT_DEPTH_CAP, capacity: crate::pool::DEFAULT_CAPACITY }
    }

    pub(crate) fn eval(&self) -> EvalConfig {
        EvalConfig { policy: self.policy, depth_cap: self.depth_cap }
    }

    pub(crate) fn pool(&self, store: Arc<ItemStore>, roots: Vec<ChildSpec>) -> Result<TaskPool, ExecError> {
        let mut pool = TaskPool::new(store, self.order).with_capacity(self.capacity);
        for r in roots {
            pool.spawn_root(r)?;
        }
        Ok(pool)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TraceKind {
    Spawned,
    Started,
    Delegated,
    Resolved,
    Requeued,
    WorkerJoined,
    WorkerLeft,
    WorkerCrashed,
}

impl From<EventKind> for TraceKind {
    fn from(k: EventKind) -> Self {
        match k {
            EventKind::Spawned => TraceKind::Spawned,
            EventKind::Delegated => TraceKind::Delegated,
            EventKind::Resolved => TraceKind::Resolved,
            EventKind::Requeued => TraceKind::Requeued,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceEvent {
    pub time: f64,
    pub kind: TraceKind,
    pub task: Option<TaskId>,
    pub worker: Option<usize>,
}

impl TraceEvent {
    pub fn line(&self) -> String {
        serde_json::to_string(self).expect("trace events serialize")
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trace {
    pub events: Vec<TraceEvent>,
}

impl Trace {
    pub(crate) fn push(&mut self, time: f64, kind: TraceKind, task: Option<TaskId>, worker: Option<usize>) {
        self.events.push(TraceEvent { time, kind, task, worker });
    }

    pub(crate) fn pool_events(&mut self, time: f64, events: Vec<PoolEvent>, worker: Option<usize>) {
        for e in events {
            self.push(time, e.kind.into(), Some(e.task), worker);
        }
    }

    /// One JSON object per line.
    pub fn to_lines(&self) -> String {
        let mut s = String::new();
        for e in &self.events {
            s.push_str(&e.line());
            s.push('\n');
        }
        s
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct RunStats {
    /// Simulated time for the cluster executor, task steps otherwise.
    pub makespan: f64,
    pub tasks_executed: usize,
    pub re_executions: usize,
    pub peak_pool: usize,
    pub busy_fraction: Vec<f64>,
}

impl fmt::Display for RunStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "makespan = {}", self.makespan)?;
        writeln!(f, "tasks = {}", self.tasks_executed)?;
        writeln!(f, "re-executions = {}", self.re_executions)?;
        write!(f, "peak pool = {}", self.peak_pool)?;
        for (w, b) in self.busy_fraction.iter().enumerate() {
            write!(f, "\nworker {w} busy = {b:.3}")?;
        }
        Ok(())
    }
}

/// Result of a pool-driven run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunReport {
    pub stats: RunStats,
    pub trace: Trace,
}

pub(crate) fn eval_error(task: &crate::pool::Task, source: EvalError) -> ExecError {
    ExecError::Eval { task: task.to_string(), source }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Output {
    Scalar(Value),
    Array(Vec<Value>),
    Record(String),
}

impl fmt::Display for Output {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Output::Scalar(v) => write!(f, "{v}"),
            Output::Array(vs) => {
                let parts: Vec<String> = vs.iter().map(Value::to_string).collect();
                write!(f, "[{}]", parts.join(", "))
            }
            Output::Record(s) => f.write_str(s),
        }
    }
}

/// Named values of a finished run, in call order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FinalValues(pub Vec<(String, Output)>);

impl FinalValues {
    pub fn collect(store: &ItemStore, outputs: &[(String, OutputRef)]) -> Result<FinalValues, ExecError> {
        let st = store.read();
        let mut out = Vec::new();
        for (name, r) in outputs {
            let missing = || ExecError::Unresolved(name.clone());
            let v = match *r {
                OutputRef::Scalar(id) => Output::Scalar(st.scalar_value(id).map_err(|_| missing())?),
                OutputRef::Array(id) => {
                    let a = st.array(id)?;
                    Output::Array(a.values.iter().map(|v| v.ok_or_else(missing)).collect::<Result<_, _>>()?)
                }
                OutputRef::Record(id) => match st.item(id)? {
                    Item::Record(rec) => {
                        let env = rec.env.as_ref().ok_or_else(missing)?;
                        let parts: Vec<String> = env
                            .iter()
                            .map(|(k, e)| match e {
                                EnvEntry::Scalar(v) => format!("{k}={v}"),
                                EnvEntry::Unset(_) => format!("{k}=?"),
                                EnvEntry::Array(_) => format!("{k}=[..]"),
                            })
                            .collect();
                        Output::Record(format!("{} {{{}}}", rec.def, parts.join(", ")))
                    }
                    _ => return Err(missing()),
                },
            };
            out.push((name.clone(), v));
        }
        Ok(FinalValues(out))
    }

    pub fn get(&self, name: &str) -> Option<&Output> {
        self.0.iter().find(|(n, _)| n == name).map(|(_, v)| v)
    }
}

impl fmt::Display for FinalValues {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (n, v) in &self.0 {
            writeln!(f, "{n} = {v}")?;
        }
        Ok(())
    }
}

/// Which executor drives a run.
#[derive(Debug, Clone, PartialEq)]
pub enum Executor {
    Sequential,
    Parallel(usize),
    Sim(SimPlan),
}

impl Executor {
    /// Policy used when none is requested: in place for the sequential
    /// oracle, delegation elsewhere so parallelism is visible.
    pub fn default_policy(&self) -> Policy {
        match self {
            Executor::Sequential => Policy::InlineAlways,
            Executor::Parallel(_) => Policy::DelegateAlways,
            Executor::Sim(plan) => plan.policy().ok().flatten().unwrap_or(Policy::DelegateAlways),
        }
    }
}

/// Run `roots` to completion on `executor`. Executions are only recorded
/// by the simulated cluster.
pub fn execute(
    program: &crate::frontend::CheckedProgram,
    store: Arc<ItemStore>,
    roots: Vec<ChildSpec>,
    executor: &Executor,
    cfg: &RunConfig,
) -> Result<SimReport, ExecError> {
    match executor {
        Executor::Sequential => {
            let r = run_sequential(program, store, roots, cfg)?;
            Ok(SimReport { stats: r.stats, trace: r.trace, executions: Vec::new() })
        }
        Executor::Parallel(n) => {
            let r = run_parallel(program, store, roots, *n, cfg)?;
            Ok(SimReport { stats: r.stats, trace: r.trace, executions: Vec::new() })
        }
        Executor::Sim(plan) => run_simcluster(program, store, roots, plan, cfg),
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RunError {
    #[error(transparent)]
    Entry(#[from] crate::entry::EntryError),
    #[error(transparent)]
    Exec(#[from] ExecError),
}

/// Values and report of a finished entry call.
#[derive(Debug, Clone, PartialEq)]
pub struct EntryRun {
    pub values: FinalValues,
    pub report: SimReport,
}

/// Build the root task for `call` in a fresh store and run it.
pub fn run_entry(
    program: &crate::frontend::CheckedProgram,
    call: &crate::frontend::parser::EntryCall,
    executor: &Executor,
    cfg: &RunConfig,
) -> Result<EntryRun, RunError> {
    let store = Arc::new(ItemStore::new());
    let entry = crate::entry::build(program, &store, call)?;
    let report = execute(program, store.clone(), vec![entry.root], executor, cfg)?;
    let values = FinalValues::collect(&store, &entry.outputs)?;
    Ok(EntryRun { values, report })
}

/// First difference between two value dumps.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Divergence {
    pub line: usize,
    pub left: Option<String>,
    pub right: Option<String>,
}

impl fmt::Display for Divergence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let show = |s: &Option<String>| s.clone().unwrap_or_else(|| "<missing>".into());
        write!(f, "line {}: {} vs {}", self.line, show(&self.left), show(&self.right))
    }
}

/// Compare two dumps in the `name = value` format line by line.
pub fn compare_runs(a: &str, b: &str) -> Option<Divergence> {
    let (mut la, mut lb) = (a.lines(), b.lines());
    let mut line = 0;
    loop {
        line += 1;
        match (la.next(), lb.next()) {
            (None, None) => return None,
            (x, y) if x == y => continue,
            (x, y) => {
                return Some(Divergence { line, left: x.map(str::to_string), right: y.map(str::to_string) })
            }
        }
    }
}
