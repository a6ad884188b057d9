//! Bag-of-tasks input and output, and the trace sink.
//!
//! An input file holds one event per line as whitespace-separated values
//! matching the mapped routine's in-parameters. Blank lines and lines
//! starting with `#` are skipped. Each event becomes one root task and
//! produces one output line, written in input order.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::Mutex;

use thiserror::Error;

use crate::exec::{Trace, TraceEvent};
use crate::frontend::ast::{Group, Params};
use crate::frontend::CheckedProgram;
use crate::pool::{Arg, Binding, Callee, ChildSpec, Loc};
use crate::store::{ItemId, ItemStore};
use crate::value::{ScalarType, Value};

#[derive(Debug, Error)]
pub enum WorkloadError {
    #[error("missing file {0}")]
    MissingFile(String),
    #[error("line {line}: {message}")]
    MalformedRecord { line: usize, message: String },
    #[error("routine `{routine}` cannot map events: {reason}")]
    BadRoutine { routine: String, reason: String },
    #[error("output for event {0} was never produced")]
    Unresolved(usize),
    #[error("i/o failure: {0}")]
    IoFailure(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventRecord {
    /// 1-based position among the events.
    pub index: usize,
    pub payload: Vec<Value>,
}

/// Root tasks for a workload and the out items of each event.
#[derive(Debug, Clone, PartialEq)]
pub struct Workload {
    pub roots: Vec<ChildSpec>,
    pub outputs: Vec<Vec<ItemId>>,
}

/// A routine usable for a workload: at least one in and one out, no
/// inouts, and scalars only.
pub fn check_routine(program: &CheckedProgram, routine: &str) -> Result<Params, WorkloadError> {
    let bad = |reason: &str| WorkloadError::BadRoutine { routine: routine.to_string(), reason: reason.to_string() };
    let def = program.routine(routine).ok_or_else(|| bad("no such routine"))?;
    let p = &def.params;
    if p.group(Group::In).is_empty() || p.group(Group::Out).is_empty() {
        return Err(bad("it needs at least one in and one out"));
    }
    if !p.group(Group::InOut).is_empty() {
        return Err(bad("events must be independent, so inouts are not allowed"));
    }
    if p.iter().any(|(_, q)| q.is_array() || q.ty.scalar().is_none()) {
        return Err(bad("only scalar parameters are supported"));
    }
    Ok(p.clone())
}

fn parse_value(text: &str, ty: ScalarType) -> Option<Value> {
    match ty {
        ScalarType::Int => text.parse().ok().map(Value::Int),
        ScalarType::Real => text.parse().ok().map(Value::Real),
    }
}

pub fn parse_events(text: &str, params: &Params) -> Result<Vec<EventRecord>, WorkloadError> {
    let ins = params.group(Group::In);
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let malformed = |message: String| WorkloadError::MalformedRecord { line: n + 1, message };
        if fields.len() != ins.len() {
            return Err(malformed(format!("expected {} values, found {}", ins.len(), fields.len())));
        }
        let mut payload = Vec::with_capacity(fields.len());
        for (f, p) in fields.iter().zip(ins) {
            let ty = p.ty.scalar().expect("checked scalar");
            payload.push(parse_value(f, ty).ok_or_else(|| malformed(format!("`{f}` is not a valid {ty}")))?);
        }
        out.push(EventRecord { index: out.len() + 1, payload });
    }
    Ok(out)
}

pub fn load_events(path: &Path, params: &Params) -> Result<Vec<EventRecord>, WorkloadError> {
    let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => WorkloadError::MissingFile(path.display().to_string()),
        _ => WorkloadError::IoFailure(e),
    })?;
    parse_events(&text, params)
}

/// One root task per event, each writing fresh out items.
pub fn build(store: &ItemStore, routine: &str, params: &Params, events: &[EventRecord]) -> Workload {
    let (a, b, c) = params.arities();
    let mut roots = Vec::with_capacity(events.len());
    let mut outputs = Vec::with_capacity(events.len());
    for ev in events {
        let mut args: Vec<Arg> = ev.payload.iter().map(|v| Arg::new(Binding::Value(*v))).collect();
        let outs: Vec<ItemId> =
            params.group(Group::Out).iter().map(|p| store.new_scalar(p.ty.scalar().expect("scalar"))).collect();
        args.extend(outs.iter().map(|id| Arg::new(Binding::Write(Loc::Item(*id)))));
        roots.push(ChildSpec { callee: Callee::Routine(routine.to_string()), receiver: None, args, arity: [a, b, c] });
        outputs.push(outs);
    }
    Workload { roots, outputs }
}

/// Output lines in input order: the event's outs separated by spaces.
pub fn format_outputs(store: &ItemStore, workload: &Workload) -> Result<String, WorkloadError> {
    let st = store.read();
    let mut s = String::new();
    for (i, outs) in workload.outputs.iter().enumerate() {
        let vals: Vec<String> = outs
            .iter()
            .map(|id| st.scalar_value(*id).map(|v| v.to_string()).map_err(|_| WorkloadError::Unresolved(i + 1)))
            .collect::<Result<_, _>>()?;
        s.push_str(&vals.join(" "));
        s.push('\n');
    }
    Ok(s)
}

pub fn write_outputs(store: &ItemStore, workload: &Workload, path: &Path) -> Result<(), WorkloadError> {
    let text = format_outputs(store, workload)?;
    std::fs::write(path, text)?;
    Ok(())
}

/// Appends trace events to a file, one JSON object per line. Safe to share
/// between threads.
pub struct TraceSink {
    out: Mutex<BufWriter<File>>,
}

impl TraceSink {
    pub fn create(path: &Path) -> Result<TraceSink, WorkloadError> {
        Ok(TraceSink { out: Mutex::new(BufWriter::new(File::create(path)?)) })
    }

    pub fn emit(&self, event: &TraceEvent) -> Result<(), WorkloadError> {
        let mut w = self.out.lock().expect("trace lock");
        writeln!(w, "{}", event.line())?;
        Ok(())
    }

    pub fn emit_all(&self, trace: &Trace) -> Result<(), WorkloadError> {
        for e in &trace.events {
            self.emit(e)?;
        }
        Ok(())
    }

    pub fn flush(&self) -> Result<(), WorkloadError> {
        self.out.lock().expect("trace lock").flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::compile;

    fn params() -> Params {
        let p = compile("simulate(int seed, real energy;; real d, int h) { d = energy; h = seed; }").unwrap();
        check_routine(&p, "simulate").unwrap()
    }

    #[test]
    fn parses_events_and_reports_bad_lines() {
        let evs = parse_events("1 2.5\n\n# comment\n2 3\n", &params()).unwrap();
        assert_eq!(evs.len(), 2);
        assert_eq!(evs[1], EventRecord { index: 2, payload: vec![Value::Int(2), Value::Real(3.0)] });
        assert!(parse_events("", &params()).unwrap().is_empty());
        match parse_events("1 2.0\n1 2 3\n", &params()) {
            Err(WorkloadError::MalformedRecord { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_events("x 2.0\n", &params()), Err(WorkloadError::MalformedRecord { line: 1, .. })));
    }

    #[test]
    fn missing_file_is_reported() {
        let err = load_events(Path::new("/nonexistent/events.txt"), &params()).unwrap_err();
        assert!(matches!(err, WorkloadError::MissingFile(_)));
    }

    #[test]
    fn routine_requirements() {
        let p = compile("f(int a; int b; int c) { c = a; } g(;; int c) { c = 1; }").unwrap();
        assert!(check_routine(&p, "f").is_err());
        assert!(check_routine(&p, "g").is_err());
        assert!(check_routine(&p, "h").is_err());
    }
}
