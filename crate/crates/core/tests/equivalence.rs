//! Results do not depend on the executor, the worker count, the inline
//! policy, the scheduling order or the order of workload events.

mod common;

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::*;
use tsia::exec::{execute, Executor, FinalValues, RunConfig, SimPlan, WorkerSpec};
use tsia::pool::{Order, Policy};
use tsia::store::ItemStore;
use tsia::CheckedProgram;

fn all_policies() -> Vec<Policy> {
    vec![
        Policy::InlineAlways,
        Policy::DelegateAlways,
        Policy::InlineBelowDepth(1),
        Policy::InlineBelowDepth(2),
        Policy::InlineBelowDepth(8),
        Policy::InlineBelowSize(4),
    ]
}

fn values(program: &CheckedProgram, call: &str, exec: &Executor, policy: Policy) -> FinalValues {
    run(program, call, exec, policy).values
}

fn assert_same_everywhere(program: &CheckedProgram, call: &str) {
    let reference = values(program, call, &Executor::Sequential, Policy::InlineAlways);
    for policy in all_policies() {
        for (name, exec) in executors() {
            assert_eq!(values(program, call, &exec, policy), reference, "{call} on {name}/{policy}");
        }
    }
}

#[test]
fn policies_and_executors_agree_on_fib() {
    let program = corpus("fib.tsia");
    assert_same_everywhere(&program, "fib(12;;a)");
    assert_eq!(int(values(&program, "fib(12;;a)", &Executor::Sequential, Policy::InlineAlways).get("a").unwrap()), 144);
}

#[test]
fn policies_and_executors_agree_on_jacobi() {
    let program = corpus("jacobi.tsia");
    assert_same_everywhere(&program, "laplace");
    let v = values(&program, "laplace", &Executor::Sequential, Policy::InlineAlways);
    assert_eq!(reals(v.get("a").unwrap()), jacobi_oracle(8, 1e-4, 1000).a);
}

#[test]
fn policies_and_executors_agree_on_stack() {
    assert_same_everywhere(&corpus("stack.tsia"), "main");
}

#[test]
fn jacobi_on_longer_arrays_matches_direct_sweeps() {
    let program = corpus("jacobi.tsia");
    for n in [3usize, 5, 16] {
        let interior = vec!["0."; n - 2].join(", ");
        let call = format!("jacobi({n}, 0.001; e = 0.002, imax = 5000, a = [1., {interior}, {n}.];)");
        let oracle = jacobi_oracle(n, 1e-3, 5000);
        for (name, exec) in executors() {
            let v = values(&program, &call, &exec, exec.default_policy());
            assert_eq!(reals(v.get("a").unwrap()), oracle.a, "n={n} on {name}");
            assert_eq!(int(v.get("imax").unwrap()), oracle.imax, "n={n} on {name}");
        }
    }
}

#[test]
fn worker_count_does_not_change_results() {
    let fib = corpus("fib.tsia");
    let jacobi = corpus("jacobi.tsia");
    let want_fib = values(&fib, "fib(16;;a)", &Executor::Sequential, Policy::InlineAlways);
    let want_jac = values(&jacobi, "laplace", &Executor::Sequential, Policy::InlineAlways);
    for n in [1, 2, 4, 8] {
        assert_eq!(values(&fib, "fib(16;;a)", &Executor::Parallel(n), Policy::DelegateAlways), want_fib, "{n} threads");
        assert_eq!(values(&jacobi, "laplace", &Executor::Parallel(n), Policy::DelegateAlways), want_jac, "{n} threads");
        let sim = Executor::Sim(SimPlan::uniform(n));
        assert_eq!(values(&fib, "fib(16;;a)", &sim, Policy::DelegateAlways), want_fib, "{n} simulated workers");
    }
}

#[test]
fn fifo_and_lifo_agree() {
    let program = corpus("fib.tsia");
    let mut cfg = RunConfig::new(Policy::DelegateAlways);
    for order in [Order::Lifo, Order::Fifo] {
        cfg.order = order;
        for exec in [Executor::Sequential, Executor::Parallel(3), Executor::Sim(SimPlan::uniform(3))] {
            let call = tsia::entry::parse_call("fib(14;;a)").unwrap();
            let r = tsia::exec::run_entry(&program, &call, &exec, &cfg).unwrap();
            assert_eq!(int(r.values.get("a").unwrap()), 377, "{order:?}");
        }
    }
}

#[test]
fn seeded_crash_plans_reproduce_the_oracle() {
    let program = corpus("fib.tsia");
    for seed in 0..50u64 {
        let plan = SimPlan { seed, ..SimPlan::uniform(3) }.with_random_crashes(1 + (seed % 5) as usize, 150.0);
        let r = run(&program, "fib(12;;a)", &Executor::Sim(plan), Policy::DelegateAlways);
        assert_eq!(int(r.values.get("a").unwrap()), 144, "seed {seed}");
    }
}

#[test]
fn faster_workers_shorten_the_makespan() {
    let program = corpus("fib.tsia");
    let makespan = |speeds: &[f64]| {
        let plan = SimPlan { workers: speeds.iter().map(|s| WorkerSpec::new(*s)).collect(), ..SimPlan::uniform(0) };
        let r = run(&program, "fib(14;;a)", &Executor::Sim(plan), Policy::DelegateAlways);
        assert_eq!(int(r.values.get("a").unwrap()), 377);
        r.report.stats.makespan
    };
    let slow = makespan(&[1.0, 1.0]);
    let mixed = makespan(&[1.0, 3.0]);
    let fast = makespan(&[3.0, 3.0]);
    assert!(fast < mixed && mixed < slow, "{fast} {mixed} {slow}");
    // Twice the speed everywhere halves the makespan exactly.
    assert_eq!(makespan(&[2.0, 2.0]) * 2.0, slow);
}

#[test]
fn bag_results_do_not_depend_on_event_order() {
    let events = bag_events(200);
    let oracle = bag_oracle(&events);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for exec in [Executor::Sequential, Executor::Parallel(4), Executor::Sim(SimPlan::uniform(5))] {
        let mut shuffled = events.clone();
        shuffled.shuffle(&mut rng);
        let (lines, _) = run_bag(&shuffled, &exec, exec.default_policy());
        for (ev, line) in shuffled.iter().zip(&lines) {
            assert_eq!(line, &oracle[ev.index - 1], "event {}", ev.index);
        }
    }
}

#[test]
fn square_bag_makespan_follows_the_greedy_law() {
    let program = corpus("simulate.tsia");
    for (m, k) in [(7usize, 3usize), (1000, 3), (999, 7), (10, 10)] {
        let store = Arc::new(ItemStore::new());
        let roots = square_roots(&program, &store, m);
        let plan = SimPlan { overhead: 0.5, default_cost: 2.0, ..SimPlan::uniform(k) };
        let r = execute(&program, store, roots, &Executor::Sim(plan), &RunConfig::new(Policy::DelegateAlways)).unwrap();
        assert_eq!(r.stats.makespan, m.div_ceil(k) as f64 * 2.5, "m={m} k={k}");
        assert_eq!(r.stats.tasks_executed, m);
    }
}
