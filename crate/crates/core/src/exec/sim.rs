//! Deterministic discrete-event simulation of a cluster of workers.
//!
//! A task is evaluated when it is dispatched and committed when its
//! simulated duration has elapsed. A crash or departure in between throws
//! the evaluation away and requeues the task, so the only effect of a
//! failure is lost time.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::Arc;

use ordered_float::OrderedFloat;

use super::{eval_error, ExecError, RunConfig, RunStats, SimPlan, Trace, TraceKind, EVAL_STACK_BYTES};
use crate::eval::eval_task;
use crate::frontend::CheckedProgram;
use crate::pool::{ChildSpec, Outcome, Task, TaskPool};
use crate::store::{AccessMode, ItemStore, Region, TaskId};

/// One attempt at running a task on a worker.
#[derive(Debug, Clone, PartialEq)]
pub struct Execution {
    pub task: TaskId,
    pub parent: Option<TaskId>,
    pub routine: String,
    pub worker: usize,
    pub start: f64,
    pub end: f64,
    /// False when a crash or departure aborted the attempt.
    pub committed: bool,
    pub accesses: Vec<(Region, AccessMode)>,
}

impl Execution {
    /// Open intervals intersect.
    pub fn overlaps(&self, other: &Execution) -> bool {
        self.start < other.end && other.start < self.end
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SimReport {
    pub stats: RunStats,
    pub trace: Trace,
    pub executions: Vec<Execution>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Finish { epoch: u64 },
    Join,
    Crash,
    Leave,
    Restart,
}

impl Kind {
    /// Tie order at equal times.
    fn priority(self) -> u8 {
        match self {
            Kind::Finish { .. } => 0,
            Kind::Join => 1,
            Kind::Crash | Kind::Leave => 2,
            Kind::Restart => 3,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Event {
    time: f64,
    seq: u64,
    worker: usize,
    kind: Kind,
}

impl Event {
    fn key(&self) -> (OrderedFloat<f64>, u8, u64) {
        (OrderedFloat(self.time), self.kind.priority(), self.seq)
    }
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    /// Reversed so that `BinaryHeap` pops the earliest event.
    fn cmp(&self, other: &Self) -> Ordering {
        other.key().cmp(&self.key())
    }
}

struct Busy {
    task: Arc<Task>,
    outcome: Outcome,
    start: f64,
    exec: usize,
}

struct Worker {
    speed: f64,
    leave: Option<f64>,
    alive: bool,
    left: bool,
    idle_since: f64,
    busy: Option<Busy>,
    epoch: u64,
    busy_time: f64,
}

struct Sim<'a> {
    program: &'a CheckedProgram,
    store: Arc<ItemStore>,
    plan: &'a SimPlan,
    cfg: &'a RunConfig,
    pool: TaskPool,
    workers: Vec<Worker>,
    events: BinaryHeap<Event>,
    next_seq: u64,
    now: f64,
    report: SimReport,
}

/// Run the pool on the simulated cluster described by `plan`.
pub fn run_simcluster(
    program: &CheckedProgram,
    store: Arc<ItemStore>,
    roots: Vec<ChildSpec>,
    plan: &SimPlan,
    cfg: &RunConfig,
) -> Result<SimReport, ExecError> {
    std::thread::scope(|s| {
        std::thread::Builder::new()
            .stack_size(EVAL_STACK_BYTES)
            .spawn_scoped(s, || {
                let pool = cfg.pool(store.clone(), roots)?;
                let mut sim = Sim::new(program, store, plan, cfg, pool);
                sim.run()?;
                Ok(sim.report)
            })
            .expect("spawn simulator thread")
            .join()
            .map_err(|_| ExecError::WorkerPanic)?
    })
}

impl<'a> Sim<'a> {
    fn new(
        program: &'a CheckedProgram,
        store: Arc<ItemStore>,
        plan: &'a SimPlan,
        cfg: &'a RunConfig,
        pool: TaskPool,
    ) -> Sim<'a> {
        let workers = plan
            .workers
            .iter()
            .map(|w| Worker {
                speed: w.speed,
                leave: w.leave,
                alive: false,
                left: false,
                idle_since: 0.0,
                busy: None,
                epoch: 0,
                busy_time: 0.0,
            })
            .collect();
        let mut sim = Sim {
            program,
            store,
            plan,
            cfg,
            pool,
            workers,
            events: BinaryHeap::new(),
            next_seq: 0,
            now: 0.0,
            report: SimReport::default(),
        };
        for (i, w) in plan.workers.iter().enumerate() {
            sim.schedule(w.join, i, Kind::Join);
            if let Some(l) = w.leave {
                sim.schedule(l, i, Kind::Leave);
            }
            for c in &w.crashes {
                sim.schedule(*c, i, Kind::Crash);
            }
        }
        let events = sim.pool.drain_events();
        sim.report.trace.pool_events(0.0, events, None);
        sim
    }

    fn schedule(&mut self, time: f64, worker: usize, kind: Kind) {
        self.events.push(Event { time, seq: self.next_seq, worker, kind });
        self.next_seq += 1;
    }

    fn run(&mut self) -> Result<(), ExecError> {
        let mut makespan = 0.0;
        loop {
            self.dispatch()?;
            if self.pool.is_empty() {
                break;
            }
            if !self.pool.has_ready() && self.pool.running() == 0 {
                return Err(ExecError::Deadlock { pending: self.pool.len() });
            }
            let Some(ev) = self.events.pop() else {
                return Err(ExecError::StalledForever { time: self.now, pending: self.pool.len() });
            };
            self.now = ev.time;
            if self.handle(ev)? {
                makespan = self.now;
            }
        }
        let stats = &mut self.report.stats;
        stats.makespan = makespan;
        stats.peak_pool = self.pool.peak();
        stats.busy_fraction = self
            .workers
            .iter()
            .map(|w| if makespan > 0.0 { w.busy_time / makespan } else { 0.0 })
            .collect();
        Ok(())
    }

    /// Give ready tasks to idle workers, earliest idle first and lowest
    /// id on ties.
    fn dispatch(&mut self) -> Result<(), ExecError> {
        while self.pool.has_ready() {
            let Some(w) = (0..self.workers.len())
                .filter(|&i| self.workers[i].alive && self.workers[i].busy.is_none())
                .min_by(|&a, &b| {
                    OrderedFloat(self.workers[a].idle_since).cmp(&OrderedFloat(self.workers[b].idle_since)).then(a.cmp(&b))
                })
            else {
                return Ok(());
            };
            let task = self.pool.take_ready().expect("ready task");
            let outcome =
                eval_task(self.program, &self.store, &task, &self.cfg.eval()).map_err(|e| eval_error(&task, e))?;
            let routine = task.callee().name();
            let duration = self.plan.cost(&routine) / self.workers[w].speed + self.plan.overhead;
            self.report.trace.push(self.now, TraceKind::Started, Some(task.id), Some(w));
            self.report.executions.push(Execution {
                task: task.id,
                parent: task.parent,
                routine,
                worker: w,
                start: self.now,
                end: f64::INFINITY,
                committed: false,
                accesses: task.spec.accesses().into_iter().map(|(r, m, _)| (r, m)).collect(),
            });
            let exec = self.report.executions.len() - 1;
            let epoch = self.workers[w].epoch;
            self.workers[w].busy = Some(Busy { task, outcome, start: self.now, exec });
            self.schedule(self.now + duration, w, Kind::Finish { epoch });
        }
        Ok(())
    }

    /// Returns whether a task committed.
    fn handle(&mut self, ev: Event) -> Result<bool, ExecError> {
        let now = self.now;
        let w = ev.worker;
        match ev.kind {
            Kind::Finish { epoch } => {
                if self.workers[w].epoch != epoch {
                    return Ok(false);
                }
                let Some(b) = self.workers[w].busy.take() else { return Ok(false) };
                self.pool.commit_outcome(b.task.id, b.outcome)?;
                let events = self.pool.drain_events();
                self.report.trace.pool_events(now, events, Some(w));
                let e = &mut self.report.executions[b.exec];
                e.end = now;
                e.committed = true;
                let worker = &mut self.workers[w];
                worker.busy_time += now - b.start;
                worker.idle_since = now;
                self.report.stats.tasks_executed += 1;
                return Ok(true);
            }
            Kind::Join => {
                if !self.workers[w].left {
                    self.workers[w].alive = true;
                    self.workers[w].idle_since = now;
                    self.report.trace.push(now, TraceKind::WorkerJoined, None, Some(w));
                }
            }
            Kind::Restart => {
                let wk = &self.workers[w];
                if !wk.left && !wk.alive && wk.leave.is_none_or(|l| now < l) {
                    self.workers[w].alive = true;
                    self.workers[w].idle_since = now;
                    self.report.trace.push(now, TraceKind::WorkerJoined, None, Some(w));
                }
            }
            Kind::Crash => {
                if self.workers[w].alive {
                    self.report.trace.push(now, TraceKind::WorkerCrashed, None, Some(w));
                    self.abort(w)?;
                    self.workers[w].alive = false;
                    self.schedule(now + self.plan.restart_delay, w, Kind::Restart);
                }
            }
            Kind::Leave => {
                self.report.trace.push(now, TraceKind::WorkerLeft, None, Some(w));
                self.abort(w)?;
                self.workers[w].alive = false;
                self.workers[w].left = true;
            }
        }
        Ok(false)
    }

    /// Lose the worker's in-flight task and return it to the pool.
    fn abort(&mut self, w: usize) -> Result<(), ExecError> {
        let now = self.now;
        let Some(b) = self.workers[w].busy.take() else { return Ok(()) };
        self.pool.requeue(b.task.id)?;
        let events = self.pool.drain_events();
        self.report.trace.pool_events(now, events, Some(w));
        self.report.executions[b.exec].end = now;
        let worker = &mut self.workers[w];
        worker.epoch += 1;
        worker.busy_time += now - b.start;
        self.report.stats.re_executions += 1;
        Ok(())
    }
}
