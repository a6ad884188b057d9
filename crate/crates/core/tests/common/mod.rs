//! Shared helpers for the integration tests: corpus loading, independent
//! oracles, and a step-by-step pool driver that checks invariants after
//! every commit.

#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::PathBuf;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;

use tsia::entry::{build, parse_call, OutputRef};
use tsia::eval::eval_task;
use tsia::exec::{execute, run_entry, EntryRun, Executor, Output, RunConfig, SimPlan, SimReport};
use tsia::frontend::compile;
use tsia::pool::{ChildSpec, Order, TaskPool, TaskState};
use tsia::store::{regions_overlap, ItemId, ItemKind, ItemStore, TaskId};
use tsia::value::Value;
use tsia::workload::{self, EventRecord};
use tsia::{CheckedProgram, EvalConfig, Policy};

pub fn corpus_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus").join(name)
}

pub fn corpus(name: &str) -> CheckedProgram {
    let src = std::fs::read_to_string(corpus_path(name)).expect("corpus file");
    compile(&src).unwrap_or_else(|d| panic!("{name}: {d:?}"))
}

pub fn plan(name: &str) -> SimPlan {
    SimPlan::load(&corpus_path(&format!("plans/{name}")), None).expect("plan")
}

/// Executors exercised by the equivalence tests.
pub fn executors() -> Vec<(&'static str, Executor)> {
    vec![
        ("seq", Executor::Sequential),
        ("parallel", Executor::Parallel(4)),
        ("sim", Executor::Sim(SimPlan::uniform(3))),
    ]
}

pub fn policies() -> Vec<Policy> {
    vec![Policy::DelegateAlways, Policy::InlineAlways, Policy::InlineBelowDepth(2), Policy::InlineBelowSize(6)]
}

pub fn run(program: &CheckedProgram, call: &str, exec: &Executor, policy: Policy) -> EntryRun {
    let call = parse_call(call).expect("entry call");
    run_entry(program, &call, exec, &RunConfig::new(policy)).unwrap_or_else(|e| panic!("{e}"))
}

pub fn int(out: &Output) -> i64 {
    match out {
        Output::Scalar(Value::Int(i)) => *i,
        other => panic!("expected an int, got {other:?}"),
    }
}

pub fn real(out: &Output) -> f64 {
    match out {
        Output::Scalar(Value::Real(r)) => *r,
        other => panic!("expected a real, got {other:?}"),
    }
}

pub fn reals(out: &Output) -> Vec<f64> {
    match out {
        Output::Array(vs) => vs.iter().map(|v| v.as_f64().expect("number")).collect(),
        other => panic!("expected an array, got {other:?}"),
    }
}

// Oracles, written directly in Rust.

pub fn fib_oracle(n: i64) -> i64 {
    if n < 2 {
        n
    } else {
        fib_oracle(n - 1) + fib_oracle(n - 2)
    }
}

/// Result of the Jacobi driver for the n=8 Laplace configuration.
pub struct JacobiOracle {
    pub a: Vec<f64>,
    pub e: f64,
    pub imax: i64,
}

/// Plain Jacobi sweeps with the same stopping rule as the corpus driver:
/// stop once the largest change is below `emax` or the budget runs out.
pub fn jacobi_oracle(n: usize, emax: f64, imax: i64) -> JacobiOracle {
    let mut a = vec![0.0; n];
    a[0] = 1.0;
    a[n - 1] = n as f64;
    let mut e = 2.0 * emax;
    let mut imax = imax;
    loop {
        if e < emax {
            break;
        }
        imax -= 1;
        if imax < 0 {
            break;
        }
        let old = a.clone();
        e = 0.0;
        for i in 1..n - 1 {
            a[i] = (old[i - 1] + old[i + 1]) / 2.0;
            e = f64::max(e, (a[i] - old[i]).abs());
        }
    }
    JacobiOracle { a, e, imax }
}

/// The toy shower from `simulate.tsia`, evaluated directly.
pub fn shower_oracle(s: i64, e: f64, depth: i64) -> (f64, i64) {
    if depth == 0 {
        return (0.9 * e, 1);
    }
    let s2 = (s * 1103515245 + 12345) % 2147483648;
    let f = 0.25 + 0.5 * s2 as f64 / 2147483648.0;
    let (d1, h1) = shower_oracle(s2, e * f, depth - 1);
    let (d2, h2) = shower_oracle(s2 + 1, e * (1.0 - f), depth - 1);
    (d1 + d2, h1 + h2)
}

/// Deterministic event payloads for the bag-of-tasks runs.
pub fn bag_events(m: usize) -> Vec<EventRecord> {
    (0..m)
        .map(|i| EventRecord {
            index: i + 1,
            payload: vec![Value::Int((i as i64 * 7919) % 100_003), Value::Real(1.0 + (i % 37) as f64)],
        })
        .collect()
}

/// Run the `simulate` bag on `exec`; returns the output lines and report.
pub fn run_bag(events: &[EventRecord], exec: &Executor, policy: Policy) -> (Vec<String>, SimReport) {
    let program = corpus("simulate.tsia");
    let params = workload::check_routine(&program, "simulate").unwrap();
    let store = Arc::new(ItemStore::new());
    let wl = workload::build(&store, "simulate", &params, events);
    let report = execute(&program, store.clone(), wl.roots.clone(), exec, &RunConfig::new(policy)).unwrap();
    let text = workload::format_outputs(&store, &wl).unwrap();
    (text.lines().map(str::to_string).collect(), report)
}

pub fn bag_oracle(events: &[EventRecord]) -> Vec<String> {
    events
        .iter()
        .map(|ev| {
            let (Value::Int(s), Value::Real(e)) = (ev.payload[0], ev.payload[1]) else { unreachable!() };
            let (d, h) = shower_oracle(s, e, 2);
            format!("{} {}", Value::Real(d), Value::Int(h))
        })
        .collect()
}

/// Roots for `m` independent `square` tasks.
pub fn square_roots(program: &CheckedProgram, store: &ItemStore, m: usize) -> Vec<ChildSpec> {
    (0..m).map(|i| build(program, store, &parse_call(&format!("square({i};;y)")).unwrap()).unwrap().root).collect()
}

// Step-by-step pool driver.

/// What [`drive`] checks after every commit.
#[derive(Debug, Default)]
pub struct DriveLog {
    pub commits: usize,
    pub requeues: usize,
}

/// Brute-force readiness, computed from the task specs alone: every read
/// scalar or record is resolved and no task with a smaller seq holds a
/// conflicting access.
pub fn brute_ready(pool: &TaskPool, store: &ItemStore, id: TaskId) -> bool {
    let tasks = pool.tasks();
    let me = tasks.iter().find(|t| t.id == id).expect("task in pool");
    let st = store.read();
    let mine = me.spec.accesses();
    for (r, m, _) in &mine {
        if m.reads() && r.item.kind != ItemKind::Array && !st.is_resolved(r.item) {
            return false;
        }
    }
    for other in tasks.iter().filter(|t| t.id != id && t.seq < me.seq) {
        for (r2, m2, _) in other.spec.accesses() {
            for (r, m, _) in &mine {
                if regions_overlap(r, &r2) && (m.writes() || m2.writes()) {
                    return false;
                }
            }
        }
    }
    true
}

fn scalar_snapshot(store: &ItemStore, items: &HashSet<ItemId>) -> HashMap<ItemId, Value> {
    let st = store.read();
    items.iter().filter_map(|id| st.scalar_value(*id).ok().map(|v| (*id, v))).collect()
}

/// Check that every pending output has exactly one producer in the pool
/// and that the responsibility index agrees with the task specs.
pub fn check_responsibility(pool: &TaskPool, store: &ItemStore, roots_out: &[ItemId]) {
    let mut producers: HashMap<ItemId, Vec<TaskId>> = HashMap::new();
    for t in pool.tasks() {
        for o in t.spec.outputs() {
            producers.entry(o).or_default().push(t.id);
        }
    }
    for (item, ps) in &producers {
        assert_eq!(ps.len(), 1, "{item} has producers {ps:?}");
        assert_eq!(pool.responsible_for(*item), Some(ps[0]), "index disagrees for {item}");
    }
    let mut index: Vec<ItemId> = producers.keys().copied().collect();
    index.sort();
    assert_eq!(pool.responsibility(), index);
    let st = store.read();
    for o in roots_out {
        assert!(st.is_resolved(*o) || producers.contains_key(o), "root output {o} was orphaned");
    }
}

/// Run `roots` by picking a random ready task at each step. With
/// probability `crash_p` the evaluated outcome is thrown away and the task
/// requeued instead of committed. After every step: scalars never change
/// once resolved, responsibility is conserved, the ready set equals the
/// brute-force oracle, and tasks ready before a commit are still ready
/// after it.
pub fn drive(
    program: &CheckedProgram,
    store: Arc<ItemStore>,
    roots: Vec<ChildSpec>,
    policy: Policy,
    rng: &mut impl Rng,
    crash_p: f64,
) -> DriveLog {
    let roots_out: Vec<ItemId> = roots.iter().flat_map(|r| r.outputs()).collect();
    let mut pool = TaskPool::new(store.clone(), Order::Lifo);
    for r in roots {
        pool.spawn_root(r).unwrap();
    }
    let cfg = EvalConfig::with_policy(policy);
    let mut seen: HashSet<ItemId> = HashSet::new();
    let mut resolved: HashMap<ItemId, Value> = HashMap::new();
    let mut log = DriveLog::default();
    let mut steps = 0;
    while !pool.is_empty() {
        steps += 1;
        assert!(steps < 1_000_000, "driver did not terminate");
        let ready: Vec<TaskId> = pool.ready_tasks().iter().map(|t| t.id).collect();
        for t in pool.tasks() {
            if pool.state(t.id) != Some(TaskState::Running) {
                assert_eq!(
                    ready.contains(&t.id),
                    brute_ready(&pool, &store, t.id),
                    "readiness of {} disagrees with the oracle",
                    t.id
                );
            }
        }
        let id = *ready.choose(rng).expect("no ready task in a non-empty pool");
        let task = pool.take(id).unwrap();
        let outcome = eval_task(program, &store, &task, &cfg).unwrap_or_else(|e| panic!("{task}: {e}"));
        if rng.gen_bool(crash_p) {
            pool.requeue(id).unwrap();
            log.requeues += 1;
            continue;
        }
        for t in pool.tasks() {
            for o in t.spec.outputs() {
                seen.insert(o);
            }
        }
        seen.extend(roots_out.iter().copied());
        pool.commit_outcome(id, outcome).unwrap();
        log.commits += 1;

        let still: HashSet<TaskId> = pool.ready_tasks().iter().map(|t| t.id).collect();
        for r in ready.iter().filter(|r| **r != id) {
            assert!(still.contains(r), "{r} stopped being ready");
        }
        for (item, v) in scalar_snapshot(&store, &seen) {
            if let Some(old) = resolved.insert(item, v) {
                assert!(old.same_bits(&v), "{item} changed from {old} to {v}");
            }
        }
        check_responsibility(&pool, &store, &roots_out);
    }
    for o in &roots_out {
        assert!(store.read().is_resolved(*o), "root output {o} never resolved");
    }
    log
}

/// Root task and its outputs for an entry call in a fresh store.
pub fn entry_roots(program: &CheckedProgram, call: &str) -> (Arc<ItemStore>, Vec<ChildSpec>, Vec<(String, OutputRef)>) {
    let store = Arc::new(ItemStore::new());
    let e = build(program, &store, &parse_call(call).unwrap()).unwrap();
    (store, vec![e.root], e.outputs)
}

pub fn scalar_out(store: &ItemStore, r: &OutputRef) -> Value {
    match r {
        OutputRef::Scalar(id) => store.read().scalar_value(*id).unwrap(),
        _ => panic!("not a scalar output"),
    }
}

/// Pairs of time-overlapping committed executions with conflicting
/// accesses.
pub fn conflicting_overlaps(report: &SimReport) -> Vec<(TaskId, TaskId)> {
    let mut ex: Vec<_> = report.executions.iter().filter(|e| e.committed).collect();
    ex.sort_by(|a, b| a.start.total_cmp(&b.start));
    let mut bad = Vec::new();
    for (i, a) in ex.iter().enumerate() {
        for b in &ex[i + 1..] {
            if b.start >= a.end {
                break;
            }
            if !a.overlaps(b) {
                continue;
            }
            let clash = a.accesses.iter().any(|(ra, ma)| {
                b.accesses.iter().any(|(rb, mb)| regions_overlap(ra, rb) && (ma.writes() || mb.writes()))
            });
            if clash {
                bad.push((a.task, b.task));
            }
        }
    }
    bad
}

/// Group an iterator of `(key, value)` into a sorted map of vectors.
pub fn group<K: Ord, V>(it: impl IntoIterator<Item = (K, V)>) -> BTreeMap<K, Vec<V>> {
    let mut m: BTreeMap<K, Vec<V>> = BTreeMap::new();
    for (k, v) in it {
        m.entry(k).or_default().push(v);
    }
    m
}
