//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line per
//! criterion, and exits non-zero if any failed.
//!
//! `cargo test -p tsia-core --test acceptance`

mod common;

use std::collections::HashMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::*;
use tsia::entry::{build, parse_call};
use tsia::eval::eval_task;
use tsia::exec::{execute, Executor, RunConfig, SimPlan, SimReport, TraceKind};
use tsia::frontend::compile;
use tsia::pool::{Binding, Loc, Order, TaskPool};
use tsia::store::{regions_overlap, ItemId, ItemStore, Region, TaskId};
use tsia::value::Value;
use tsia::{EvalConfig, Policy};

type Check = fn() -> Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn crit1_fibonacci() -> Result<String, String> {
    let program = corpus("fib.tsia");
    let mut runs = 0;
    for n in [0, 1, 2, 10, 15, 20, 25] {
        let want = fib_oracle(n);
        for (name, exec) in executors() {
            for policy in policies() {
                let got = int(run(&program, &format!("fib({n};;a)"), &exec, policy).values.get("a").unwrap());
                ensure(got == want, || format!("fib({n}) = {got} on {name}/{policy}, oracle {want}"))?;
                runs += 1;
            }
        }
    }
    Ok(format!("{runs} runs match the oracle, fib(10)={} fib(25)={}", fib_oracle(10), fib_oracle(25)))
}

fn crit2_delegation_shape() -> Result<String, String> {
    let program = corpus("fib.tsia");
    let store = Arc::new(ItemStore::new());
    let entry = build(&program, &store, &parse_call("fib(10;;a)").unwrap()).map_err(|e| e.to_string())?;
    let a = entry.root.outputs()[0];
    let mut pool = TaskPool::new(store.clone(), Order::Lifo);
    pool.spawn_root(entry.root).map_err(|e| e.to_string())?;
    let task = pool.take_ready().ok_or("root not ready")?;
    let outcome = eval_task(&program, &store, &task, &EvalConfig::with_policy(Policy::DelegateAlways))
        .map_err(|e| e.to_string())?;
    let kids = outcome.children.clone();
    ensure(kids.len() == 3, || format!("expected 3 children, got {}", kids.len()))?;
    let names: Vec<String> = kids.iter().map(|c| c.callee.name()).collect();
    ensure(names == ["fib", "fib", "sum"], || format!("children are {names:?}"))?;
    let out_of = |i: usize| match kids[i].args.as_slice() {
        [arg_n, out] => match (&arg_n.binding, &out.binding) {
            (Binding::Value(v), Binding::Write(Loc::Item(id))) => Some((*v, *id)),
            _ => None,
        },
        _ => None,
    };
    let (n9, x) = out_of(0).ok_or("first child is not fib(9;;x)")?;
    let (n8, y) = out_of(1).ok_or("second child is not fib(8;;y)")?;
    ensure(n9 == Value::Int(9) && n8 == Value::Int(8), || format!("fib args are {n9}, {n8}"))?;
    let sum_ok = matches!(
        kids[2].args.as_slice(),
        [p, q, r] if p.binding == Binding::Read(Loc::Item(x))
            && q.binding == Binding::Read(Loc::Item(y))
            && r.binding == Binding::Write(Loc::Item(a))
    );
    ensure(sum_ok, || format!("third child is {}", kids[2]))?;
    ensure(x != y && x != a && y != a, || "x, y and a are not distinct items".into())?;
    let report = pool.commit_outcome(task.id, outcome).map_err(|e| e.to_string())?;
    let sum_id = report.children[2];
    ensure(pool.responsible_for(a) == Some(sum_id), || format!("a is owned by {:?}", pool.responsible_for(a)))?;
    ensure(pool.responsible_for(x) == Some(report.children[0]), || "x not owned by fib(9)".into())?;
    ensure(pool.responsible_for(y) == Some(report.children[1]), || "y not owned by fib(8)".into())?;
    Ok(format!("children {{{}; {}; {}}}, a owned by sum", kids[0], kids[1], kids[2]))
}

fn jacobi_runs() -> Vec<(&'static str, Vec<f64>, f64, i64)> {
    let program = corpus("jacobi.tsia");
    let mut out = Vec::new();
    for (name, exec) in [
        ("seq", Executor::Sequential),
        ("parallel", Executor::Parallel(4)),
        ("sim", Executor::Sim(SimPlan::uniform(2))),
    ] {
        let policy = exec.default_policy();
        let r = run(&program, "laplace", &exec, policy);
        let v = &r.values;
        out.push((name, reals(v.get("a").unwrap()), real(v.get("e").unwrap()), int(v.get("imax").unwrap())));
    }
    out
}

fn crit3_jacobi() -> Result<String, String> {
    let runs = jacobi_runs();
    let (_, a, e, imax) = &runs[0];
    let n = a.len();
    ensure(n == 8 && a[0] == 1.0 && a[7] == 8.0, || format!("boundary values changed: {a:?}"))?;
    let mut worst_residual = 0.0f64;
    for i in 1..n - 1 {
        let r = ((a[i - 1] + a[i + 1]) / 2.0 - a[i]).abs();
        worst_residual = worst_residual.max(r);
    }
    ensure(worst_residual <= 1e-4, || format!("convergence check fails: residual {worst_residual:e}"))?;
    let worst_linear = a.iter().enumerate().map(|(i, v)| (v - (i + 1) as f64).abs()).fold(0.0, f64::max);
    ensure(worst_linear <= 5e-3, || format!("profile is {worst_linear:e} from a(i)=i"))?;
    ensure(*imax > 0, || format!("no iterations remaining ({imax})"))?;
    ensure(*e < 1e-4, || format!("final change {e:e} not below emax"))?;
    let oracle = jacobi_oracle(8, 1e-4, 1000);
    let same_bits = |x: &[f64], y: &[f64]| x.iter().zip(y).all(|(p, q)| p.to_bits() == q.to_bits());
    ensure(same_bits(a, &oracle.a) && oracle.imax == *imax, || {
        format!("differs from direct Jacobi sweeps: {a:?} vs {:?}", oracle.a)
    })?;
    for (name, a2, e2, imax2) in &runs[1..] {
        ensure(same_bits(a, a2) && e.to_bits() == e2.to_bits() && imax == imax2, || {
            format!("{name} differs from seq: {a2:?} e={e2} imax={imax2}")
        })?;
    }
    Ok(format!("residual {worst_residual:.2e}, max |a(i)-i| {worst_linear:.2e}, imax left {imax}, identical on seq/parallel/sim"))
}

fn crit4_slices() -> Result<String, String> {
    let program = corpus("jacobi.tsia");
    let store = Arc::new(ItemStore::new());
    let entry = build(&program, &store, &parse_call("laplace").unwrap()).map_err(|e| e.to_string())?;
    let report = execute(
        &program,
        store,
        vec![entry.root],
        &Executor::Sim(SimPlan::uniform(2)),
        &RunConfig::new(Policy::DelegateAlways),
    )
    .map_err(|e| e.to_string())?;
    let committed: HashMap<TaskId, &tsia::exec::Execution> =
        report.executions.iter().filter(|e| e.committed).map(|e| (e.task, e)).collect();
    let top: Vec<TaskId> = committed
        .values()
        .filter(|e| e.routine == "relax" && e.parent.and_then(|p| committed.get(&p)).is_some_and(|p| p.routine == "jacobi"))
        .map(|e| e.task)
        .collect();
    ensure(!top.is_empty(), || "no top-level relax tasks found".into())?;
    let kids = group(
        committed.values().filter(|e| e.routine == "relax").filter_map(|e| e.parent.map(|p| (p, *e))),
    );
    for t in &top {
        let pair = kids.get(t).ok_or_else(|| format!("relax {t} has no relax children"))?;
        ensure(pair.len() == 2, || format!("relax {t} has {} relax children", pair.len()))?;
        ensure(pair[0].overlaps(pair[1]), || {
            format!(
                "children of {t} run [{}, {}) and [{}, {})",
                pair[0].start, pair[0].end, pair[1].start, pair[1].end
            )
        })?;
    }
    let bad = conflicting_overlaps(&report);
    ensure(bad.is_empty(), || format!("overlapping tasks with conflicting regions: {:?}", &bad[..bad.len().min(5)]))?;
    Ok(format!("{} iterations, every slice pair overlaps, no conflicting overlap among {} executions", top.len(), committed.len()))
}

fn crit5_stack() -> Result<String, String> {
    let program = corpus("stack.tsia");
    for (name, exec) in executors() {
        for policy in policies() {
            let v = run(&program, "main", &exec, policy).values;
            let got = [int(v.get("a1").unwrap()), int(v.get("b1").unwrap()), int(v.get("a2").unwrap())];
            ensure(got == [7, 8, 6], || format!("{name}/{policy}: a1,b1,a2 = {got:?}"))?;
        }
    }
    Ok("a1=7 b1=8 a2=6 on every executor and policy".into())
}

/// Crashes that hit a busy worker: the crash is immediately followed by a
/// requeue on the same worker. Each such task must complete later.
fn check_crash_trace(report: &SimReport) -> Result<usize, String> {
    let ev = &report.trace.events;
    let mut busy_hits = 0;
    for (i, e) in ev.iter().enumerate() {
        if e.kind != TraceKind::WorkerCrashed {
            continue;
        }
        let Some(next) = ev.get(i + 1) else { continue };
        if next.kind != TraceKind::Requeued || next.worker != e.worker || next.time != e.time {
            continue;
        }
        busy_hits += 1;
        let task = next.task;
        let completed = ev[i + 2..]
            .iter()
            .any(|l| l.task == task && matches!(l.kind, TraceKind::Resolved | TraceKind::Delegated));
        ensure(completed, || format!("task {task:?} requeued at {} never completed", e.time))?;
    }
    let requeues = ev.iter().filter(|e| e.kind == TraceKind::Requeued).count();
    ensure(report.stats.re_executions >= busy_hits && requeues >= busy_hits, || {
        format!("{} re-executions for {busy_hits} busy crashes", report.stats.re_executions)
    })?;
    Ok(busy_hits)
}

fn crash_plan(seed: u64, workers: usize, horizon: f64) -> SimPlan {
    let count = 1 + (seed % 5) as usize;
    SimPlan { seed, ..SimPlan::uniform(workers) }.with_random_crashes(count, horizon)
}

fn crit6_faults() -> Result<String, String> {
    const PLANS: u64 = 50;
    let program = corpus("fib.tsia");
    let want = fib_oracle(15);
    let seq = int(run(&program, "fib(15;;a)", &Executor::Sequential, Policy::InlineAlways).values.get("a").unwrap());
    ensure(seq == want, || format!("sequential fib(15) = {seq}"))?;
    let base = run(&program, "fib(15;;a)", &Executor::Sim(SimPlan::uniform(3)), Policy::DelegateAlways);
    let horizon = base.report.stats.makespan * 0.9;
    let mut fib_hits = 0;
    for seed in 0..PLANS {
        let plan = crash_plan(seed, 3, horizon);
        let crashes = plan.crash_count();
        ensure((1..=5).contains(&crashes), || format!("plan {seed} has {crashes} crashes"))?;
        let r = run(&program, "fib(15;;a)", &Executor::Sim(plan), Policy::DelegateAlways);
        let got = int(r.values.get("a").unwrap());
        ensure(got == want, || format!("plan {seed}: fib(15) = {got}"))?;
        fib_hits += check_crash_trace(&r.report).map_err(|m| format!("fib plan {seed}: {m}"))?;
    }

    let events = bag_events(1000);
    let oracle = bag_oracle(&events);
    let (seq_lines, _) = run_bag(&events, &Executor::Sequential, Policy::InlineAlways);
    ensure(seq_lines == oracle, || "sequential bag differs from the direct oracle".into())?;
    let (_, base) = run_bag(&events, &Executor::Sim(SimPlan::uniform(4)), Policy::DelegateAlways);
    let horizon = base.stats.makespan * 0.9;
    let mut bag_hits = 0;
    for seed in 0..PLANS {
        let plan = crash_plan(1000 + seed, 4, horizon);
        let (lines, report) = run_bag(&events, &Executor::Sim(plan), Policy::DelegateAlways);
        ensure(lines == seq_lines, || format!("bag plan {seed}: values differ from the oracle"))?;
        bag_hits += check_crash_trace(&report).map_err(|m| format!("bag plan {seed}: {m}"))?;
    }
    ensure(fib_hits > 0 && bag_hits > 0, || "no crash hit a busy worker".into())?;
    Ok(format!("{PLANS}+{PLANS} crash plans match; {fib_hits}+{bag_hits} busy crashes requeued and completed"))
}

fn crit7_adaptive() -> Result<String, String> {
    let program = corpus("fib.tsia");
    let adaptive = plan("adaptive.plan");
    let one = SimPlan { workers: vec![adaptive.workers[0].clone()], ..adaptive.clone() };
    let ra = run(&program, "fib(15;;a)", &Executor::Sim(adaptive), Policy::DelegateAlways);
    let r1 = run(&program, "fib(15;;a)", &Executor::Sim(one), Policy::DelegateAlways);
    let (ga, g1) = (int(ra.values.get("a").unwrap()), int(r1.values.get("a").unwrap()));
    ensure(ga == fib_oracle(15) && g1 == fib_oracle(15), || format!("values {ga}, {g1}"))?;
    let kinds = |k: TraceKind| ra.report.trace.events.iter().filter(|e| e.kind == k).count();
    ensure(kinds(TraceKind::WorkerJoined) == 4 && kinds(TraceKind::WorkerLeft) == 2, || {
        "the plan did not go 1 -> 4 -> 2 workers".into()
    })?;
    let (ma, m1) = (ra.report.stats.makespan, r1.report.stats.makespan);
    ensure(ma < m1, || format!("adaptive makespan {ma} is not below one worker's {m1}"))?;
    Ok(format!("makespan {ma} (1->4->2 workers) vs {m1} (1 worker)"))
}

fn crit8_makespan_law() -> Result<String, String> {
    let program = compile("square(int x;; int y) { y = x * x; }").map_err(|d| format!("{d:?}"))?;
    let (m, d, overhead) = (1000usize, 1.0, 0.1);
    let mut parts = Vec::new();
    for k in [1usize, 2, 4, 10] {
        let store = Arc::new(ItemStore::new());
        let roots = square_roots(&program, &store, m);
        let plan = SimPlan { overhead, default_cost: d, ..SimPlan::uniform(k) };
        let r = execute(&program, store, roots, &Executor::Sim(plan), &RunConfig::new(Policy::DelegateAlways))
            .map_err(|e| e.to_string())?;
        let expect = m.div_ceil(k) as f64 * (d + overhead);
        let got = r.stats.makespan;
        let rel = (got - expect).abs() / expect;
        ensure(rel <= 0.05, || format!("k={k}: makespan {got}, law {expect}"))?;
        parts.push(format!("k={k}: {got:.1}/{expect:.1}"));
    }
    Ok(parts.join(", "))
}

fn crit9_properties() -> Result<String, String> {
    // Region overlap against element sets, exhaustively for lengths <= 10.
    let (a, b) = (ItemId { n: 1, kind: tsia::store::ItemKind::Array }, ItemId { n: 2, kind: tsia::store::ItemKind::Array });
    let mut pairs = 0;
    for n in 1..=10usize {
        for (l1, h1) in (1..=n).flat_map(|l| (l..=n).map(move |h| (l, h))) {
            for (l2, h2) in (1..=n).flat_map(|l| (l..=n).map(move |h| (l, h))) {
                let brute = (l1..=h1).any(|i| (l2..=h2).contains(&i));
                let (r1, r2) = (Region::range(a, l1, h1), Region::range(a, l2, h2));
                ensure(regions_overlap(&r1, &r2) == brute, || format!("overlap of {r1} and {r2}"))?;
                ensure(!regions_overlap(&r1, &Region::range(b, l2, h2)), || "distinct items overlap".into())?;
                pairs += 1;
            }
        }
    }

    // Single assignment, responsibility conservation and readiness
    // monotonicity under random schedules with random requeues.
    let fib = corpus("fib.tsia");
    let jacobi = corpus("jacobi.tsia");
    let stack = corpus("stack.tsia");
    let mut commits = 0;
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let policy = policies()[(seed % 4) as usize];
        for (program, call) in [(&fib, "fib(7;;a)"), (&stack, "main"), (&jacobi, "laplace")] {
            if call == "laplace" && seed % 5 != 0 {
                continue;
            }
            let (store, roots, _) = entry_roots(program, call);
            commits += drive(program, store, roots, policy, &mut rng, 0.1).commits;
        }
    }

    // Same plan, same trace bytes.
    let plan = plan("crash3.plan");
    let trace = || {
        let r = run(&fib, "fib(12;;a)", &Executor::Sim(plan.clone()), Policy::DelegateAlways);
        r.report.trace.to_lines()
    };
    let (t1, t2) = (trace(), trace());
    ensure(t1 == t2 && !t1.is_empty(), || "two runs of one plan gave different traces".into())?;
    Ok(format!("{pairs} region pairs, {commits} checked commits, {} identical trace bytes", t1.len()))
}

fn main() {
    let criteria: [(&str, Check); 9] = [
        ("1 fibonacci oracle", crit1_fibonacci),
        ("2 delegation shape", crit2_delegation_shape),
        ("3 jacobi convergence", crit3_jacobi),
        ("4 slice parallelism", crit4_slices),
        ("5 stack records", crit5_stack),
        ("6 fault transparency", crit6_faults),
        ("7 adaptivity", crit7_adaptive),
        ("8 makespan law", crit8_makespan_law),
        ("9 property suites", crit9_properties),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let t = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        let secs = t.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS criterion {name} ({secs:.1}s): {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {name} ({secs:.1}s): {why}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all 9 acceptance criteria passed");
}
