use std::sync::Arc;

use super::{eval_error, ExecError, RunConfig, RunReport, TraceKind, EVAL_STACK_BYTES};
use crate::eval::eval_task;
use crate::frontend::CheckedProgram;
use crate::pool::ChildSpec;
use crate::store::ItemStore;

/// Single worker: take ready tasks one at a time until the pool drains.
/// With the inline-always policy this is the reference execution every
/// other executor is compared against. Trace times are step numbers.
pub fn run_sequential(
    program: &CheckedProgram,
    store: Arc<ItemStore>,
    roots: Vec<ChildSpec>,
    cfg: &RunConfig,
) -> Result<RunReport, ExecError> {
    std::thread::scope(|s| {
        std::thread::Builder::new()
            .stack_size(EVAL_STACK_BYTES)
            .spawn_scoped(s, || drive(program, store, roots, cfg))
            .expect("spawn evaluator thread")
            .join()
            .map_err(|_| ExecError::WorkerPanic)?
    })
}

fn drive(
    program: &CheckedProgram,
    store: Arc<ItemStore>,
    roots: Vec<ChildSpec>,
    cfg: &RunConfig,
) -> Result<RunReport, ExecError> {
    let mut pool = cfg.pool(store.clone(), roots)?;
    let ecfg = cfg.eval();
    let mut report = RunReport::default();
    let mut step = 0.0;
    report.trace.pool_events(step, pool.drain_events(), None);
    while let Some(task) = pool.take_ready() {
        step += 1.0;
        report.trace.push(step, TraceKind::Started, Some(task.id), Some(0));
        let outcome = eval_task(program, &store, &task, &ecfg).map_err(|e| eval_error(&task, e))?;
        pool.commit_outcome(task.id, outcome)?;
        report.trace.pool_events(step, pool.drain_events(), Some(0));
        report.stats.tasks_executed += 1;
    }
    if !pool.is_empty() {
        return Err(ExecError::Deadlock { pending: pool.len() });
    }
    report.stats.makespan = step;
    report.stats.peak_pool = pool.peak();
    report.stats.busy_fraction = vec![1.0];
    Ok(report)
}
