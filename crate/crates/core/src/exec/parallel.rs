use std::sync::{Arc, Condvar, Mutex};
use std::time::Instant;

use super::{eval_error, ExecError, RunConfig, RunReport, TraceKind, EVAL_STACK_BYTES};
use crate::eval::eval_task;
use crate::frontend::CheckedProgram;
use crate::pool::{ChildSpec, TaskPool};
use crate::store::ItemStore;

struct State {
    pool: TaskPool,
    running: usize,
    error: Option<ExecError>,
    report: RunReport,
    busy: Vec<f64>,
}

/// `workers` threads pull ready tasks from a shared pool. Bodies are
/// evaluated outside the pool lock; commits are serialized by it. Trace
/// times are wall-clock seconds since the start of the run.
pub fn run_parallel(
    program: &CheckedProgram,
    store: Arc<ItemStore>,
    roots: Vec<ChildSpec>,
    workers: usize,
    cfg: &RunConfig,
) -> Result<RunReport, ExecError> {
    let workers = workers.max(1);
    let start = Instant::now();
    let mut state = State {
        pool: cfg.pool(store.clone(), roots)?,
        running: 0,
        error: None,
        report: RunReport::default(),
        busy: vec![0.0; workers],
    };
    let events = state.pool.drain_events();
    state.report.trace.pool_events(0.0, events, None);
    let shared = (Mutex::new(state), Condvar::new());
    let ecfg = cfg.eval();

    let panicked = std::thread::scope(|s| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                let (shared, store, ecfg) = (&shared, &store, &ecfg);
                std::thread::Builder::new()
                    .stack_size(EVAL_STACK_BYTES)
                    .spawn_scoped(s, move || worker(w, program, store, shared, ecfg, start))
                    .expect("spawn worker")
            })
            .collect();
        handles.into_iter().map(|h| h.join().is_err()).fold(false, |a, b| a | b)
    });
    if panicked {
        return Err(ExecError::WorkerPanic);
    }
    let mut state = shared.0.into_inner().map_err(|_| ExecError::WorkerPanic)?;
    if let Some(e) = state.error {
        return Err(e);
    }
    let elapsed = start.elapsed().as_secs_f64();
    state.report.stats.makespan = elapsed;
    state.report.stats.peak_pool = state.pool.peak();
    state.report.stats.busy_fraction =
        state.busy.iter().map(|b| if elapsed > 0.0 { b / elapsed } else { 0.0 }).collect();
    Ok(state.report)
}

fn worker(
    w: usize,
    program: &CheckedProgram,
    store: &ItemStore,
    shared: &(Mutex<State>, Condvar),
    ecfg: &crate::eval::EvalConfig,
    start: Instant,
) {
    let (lock, cv) = shared;
    loop {
        let task = {
            let mut s = lock.lock().expect("pool lock");
            loop {
                if s.error.is_some() {
                    return;
                }
                if let Some(t) = s.pool.take_ready() {
                    s.running += 1;
                    let now = start.elapsed().as_secs_f64();
                    s.report.trace.push(now, TraceKind::Started, Some(t.id), Some(w));
                    break t;
                }
                if s.running == 0 {
                    if !s.pool.is_empty() {
                        let pending = s.pool.len();
                        s.error = Some(ExecError::Deadlock { pending });
                    }
                    cv.notify_all();
                    return;
                }
                s = cv.wait(s).expect("pool lock");
            }
        };
        let t0 = Instant::now();
        let outcome = eval_task(program, store, &task, ecfg);
        let spent = t0.elapsed().as_secs_f64();
        let mut s = lock.lock().expect("pool lock");
        s.running -= 1;
        s.busy[w] += spent;
        match outcome {
            Ok(o) => match s.pool.commit_outcome(task.id, o) {
                Ok(_) => {
                    let now = start.elapsed().as_secs_f64();
                    let events = s.pool.drain_events();
                    s.report.trace.pool_events(now, events, Some(w));
                    s.report.stats.tasks_executed += 1;
                }
                Err(e) => s.error = Some(e.into()),
            },
            Err(e) => s.error = Some(eval_error(&task, e)),
        }
        cv.notify_all();
    }
}
