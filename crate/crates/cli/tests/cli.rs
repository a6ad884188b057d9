use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn corpus(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus").join(name)
}

fn tsia(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tsia")).args(args).output().expect("run tsia")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn check_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["fib.tsia", "jacobi.tsia", "stack.tsia", "simulate.tsia"] {
        let o = tsia(&["check", path(&corpus(name))]);
        assert_eq!(o.status.code(), Some(0), "{name}: {}", stderr(&o));
    }
    let bad = write(dir.path(), "bad.tsia", "f(int a;; int b) { b = a + ; }");
    let o = tsia(&["check", path(&bad)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("bad.tsia:1:"), "{}", stderr(&o));
    let no_else = write(
        dir.path(),
        "noelse.tsia",
        "sum(int a, int b;; int c) { c = a + b; }\nfib(int n;; int k) { if (n<2) k=n; }",
    );
    let o = tsia(&["check", path(&no_else)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("OutNeverProduced"), "{}", stderr(&o));
    let undefined = write(dir.path(), "undef.tsia", "f(int a;; int b) { g(a;;b); }");
    assert_eq!(tsia(&["check", path(&undefined)]).status.code(), Some(1));
    assert_eq!(tsia(&["check", "/no/such/file.tsia"]).status.code(), Some(2));
}

#[test]
fn run_prints_named_values() {
    let fib = corpus("fib.tsia");
    for exec in ["seq", "parallel", "sim"] {
        let o = tsia(&["run", path(&fib), "--entry", "fib(10;;a)", "--executor", exec]);
        assert!(o.status.success(), "{exec}: {}", stderr(&o));
        assert_eq!(stdout(&o), "a = 55\n");
    }
    let o = tsia(&["run", path(&corpus("stack.tsia")), "--executor", "sim", "--workers", "2"]);
    assert_eq!(stdout(&o), "a1 = 7\nb1 = 8\na2 = 6\n");
    let o = tsia(&["run", path(&corpus("jacobi.tsia")), "--policy", "inline-below-depth:2", "--executor", "parallel"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.starts_with("a = [1.0"), "{out}");
    assert!(out.contains("imax = 911"), "{out}");
}

#[test]
fn run_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let fib = corpus("fib.tsia");
    let div = write(dir.path(), "div.tsia", "main(;; int a) { int z = 0; a = 1 / z; }");
    let o = tsia(&["run", path(&div)]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    assert!(stderr(&o).to_lowercase().contains("division"), "{}", stderr(&o));
    assert_eq!(tsia(&["run", "/no/such/file.tsia"]).status.code(), Some(2));
    assert_eq!(tsia(&["run", path(&fib), "--entry", "fib(10;;"]).status.code(), Some(2));
    assert_eq!(tsia(&["run", path(&fib), "--entry", "fib(1,2;;a)"]).status.code(), Some(2));
    assert_eq!(tsia(&["run", path(&fib), "--entry", "fib(3;;a)", "--policy", "sometimes"]).status.code(), Some(2));
    assert_eq!(tsia(&["run", path(&fib), "--executor", "sim", "--plan", "/no/plan"]).status.code(), Some(2));
    assert_eq!(tsia(&["run", path(&fib), "--entry", "fib(3;;a)", "--workers", "0"]).status.code(), Some(2));
}

#[test]
fn sim_runs_are_reproducible_and_report_stats() {
    let dir = tempfile::tempdir().unwrap();
    let fib = corpus("fib.tsia");
    let plan = corpus("plans/crash3.plan");
    let traces: Vec<String> = (0..2)
        .map(|i| {
            let t = dir.path().join(format!("trace{i}.jsonl"));
            let o = tsia(&[
                "run", path(&fib), "--entry", "fib(15;;a)", "--executor", "sim", "--plan", path(&plan), "--trace",
                path(&t), "--stats",
            ]);
            assert!(o.status.success(), "{}", stderr(&o));
            let out = stdout(&o);
            assert!(out.starts_with("a = 610\n--- stats\n"), "{out}");
            assert!(out.contains("re-executions = 3"), "{out}");
            std::fs::read_to_string(&t).unwrap()
        })
        .collect();
    assert_eq!(traces[0], traces[1]);
    let first = traces[0].lines().next().unwrap();
    let v: serde_json::Value = serde_json::from_str(first).unwrap();
    assert!(v.get("time").is_some() && v.get("kind").is_some(), "{first}");
    assert!(traces[0].contains("\"kind\":\"worker-crashed\""));
    assert!(traces[0].contains("\"kind\":\"requeued\""));

    let seeded = |seed: &str| {
        let o = tsia(&[
            "run", path(&fib), "--entry", "fib(12;;a)", "--executor", "sim", "--plan", path(&plan), "--seed", seed,
            "--stats",
        ]);
        stdout(&o)
    };
    assert_eq!(seeded("5"), seeded("5"));
}

#[test]
fn diff_compares_value_dumps() {
    let dir = tempfile::tempdir().unwrap();
    let fib = corpus("fib.tsia");
    let dump = |exec: &str, name: &str| {
        let o = tsia(&["run", path(&fib), "--entry", "fib(13;;a)", "--executor", exec]);
        write(dir.path(), name, &stdout(&o))
    };
    let (a, b) = (dump("seq", "a.txt"), dump("sim", "b.txt"));
    assert_eq!(tsia(&["diff", path(&a), path(&b)]).status.code(), Some(0));
    let c = write(dir.path(), "c.txt", "a = 234\n");
    let o = tsia(&["diff", path(&a), path(&c)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("line 1"), "{}", stdout(&o));
    assert_eq!(tsia(&["diff", path(&a), "/no/such"]).status.code(), Some(2));
}

#[test]
fn workload_maps_a_routine_over_events() {
    let dir = tempfile::tempdir().unwrap();
    let sim = corpus("simulate.tsia");
    let input = write(dir.path(), "events.txt", "# seed energy\n1 10.0\n2 20.0\n\n3 5\n");
    let outputs: Vec<String> = ["seq", "parallel", "sim"]
        .iter()
        .map(|exec| {
            let out = dir.path().join(format!("out-{exec}.txt"));
            let o = tsia(&[
                "run", path(&sim), "--workload", "simulate", "--input", path(&input), "--output", path(&out),
                "--executor", exec,
            ]);
            assert!(o.status.success(), "{}", stderr(&o));
            assert_eq!(stdout(&o), "events = 3\n");
            std::fs::read_to_string(out).unwrap()
        })
        .collect();
    assert_eq!(outputs[0].lines().count(), 3);
    assert!(outputs[0].lines().all(|l| l.ends_with(" 4")), "{}", outputs[0]);
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[0], outputs[2]);

    let out = dir.path().join("out.txt");
    let malformed = write(dir.path(), "bad.txt", "1 2.0\n1 two\n");
    let o = tsia(&["run", path(&sim), "--workload", "simulate", "--input", path(&malformed), "--output", path(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));
    let o = tsia(&["run", path(&sim), "--workload", "simulate", "--input", "/no/events", "--output", path(&out)]);
    assert_eq!(o.status.code(), Some(2));
    let o = tsia(&["run", path(&sim), "--workload", "square", "--input", path(&input), "--output", path(&out)]);
    assert_eq!(o.status.code(), Some(2));
    let o = tsia(&["run", path(&sim), "--workload", "nope", "--input", path(&input), "--output", path(&out)]);
    assert_eq!(o.status.code(), Some(2));
}
