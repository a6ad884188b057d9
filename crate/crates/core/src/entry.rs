//! Root calls: turning a command-line call such as `fib(10;;a)` into a
//! root task bound to freshly created store items.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::eval::eval_expr;
use crate::frontend::ast::{ExprKind, Group, Param};
use crate::frontend::lexer::tokenize;
use crate::frontend::parser::{parse_entry, EntryArg, EntryCall};
use crate::frontend::{CheckedProgram, Diagnostic};
use crate::pool::{Arg, Binding, Callee, ChildSpec, Loc, Source};
use crate::store::{AccessMode, ItemId, ItemStore, Region, StoreError};
use crate::value::{BaseType, ScalarType, Value};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EntryError {
    #[error("entry call: {0}")]
    Syntax(Diagnostic),
    #[error("unknown routine `{0}`")]
    UnknownRoutine(String),
    #[error("`{routine}` takes {expected} arguments in group {group}, got {found}")]
    Arity { routine: String, group: usize, expected: usize, found: usize },
    #[error("argument `{0}` must be a literal value")]
    NotLiteral(String),
    #[error("argument `{name}`: {message}")]
    BadArgument { name: String, message: String },
    #[error("no entry given and the program has no routine without in-parameters")]
    NoDefault,
    #[error(transparent)]
    Store(#[from] StoreError),
}

/// Where a named result of a run lives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputRef {
    Scalar(ItemId),
    Array(ItemId),
    Record(ItemId),
}

/// A root task ready to be spawned and the named items it produces.
#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub root: ChildSpec,
    /// Inouts and outs in call order.
    pub outputs: Vec<(String, OutputRef)>,
}

pub fn parse_call(text: &str) -> Result<EntryCall, EntryError> {
    let tokens = tokenize(text).map_err(EntryError::Syntax)?;
    parse_entry(tokens).map_err(EntryError::Syntax)
}

/// The routine run when no entry is given: `main`, or else the first
/// routine (by name) without ins or inouts.
pub fn default_entry(program: &CheckedProgram) -> Result<EntryCall, EntryError> {
    if let Some(main) = &program.entry {
        return Ok(EntryCall { callee: main.clone(), args: None });
    }
    program
        .routines
        .values()
        .find(|r| {
            r.body.is_some() && r.params.group(Group::In).is_empty() && r.params.group(Group::InOut).is_empty()
        })
        .map(|r| EntryCall { callee: r.name.clone(), args: None })
        .ok_or(EntryError::NoDefault)
}

fn literal(a: &EntryArg, name: &str) -> Result<Vec<Value>, EntryError> {
    let one = |e| eval_expr(&BTreeMap::new(), e).map_err(|_| EntryError::NotLiteral(name.to_string()));
    match &a.expr.kind {
        ExprKind::ArrayLit(items) => items.iter().map(one).collect(),
        _ => Ok(vec![one(&a.expr)?]),
    }
}

fn bad(name: &str, message: impl Into<String>) -> EntryError {
    EntryError::BadArgument { name: name.to_string(), message: message.into() }
}

fn scalar_value(p: &Param, vals: Vec<Value>, name: &str) -> Result<Value, EntryError> {
    let ty = p.ty.scalar().ok_or_else(|| bad(name, "records cannot be given as literals"))?;
    match vals[..] {
        [v] => v.coerce(ty).ok_or_else(|| bad(name, format!("expected {ty}, got {}", v.type_name()))),
        _ => Err(bad(name, "expected a single value")),
    }
}

fn array_item(
    store: &ItemStore,
    p: &Param,
    vals: &[Value],
    ins: &BTreeMap<String, Value>,
    name: &str,
) -> Result<ItemId, EntryError> {
    let ty = p.ty.scalar().ok_or_else(|| bad(name, "arrays of records are not supported"))?;
    let want = param_len(p, ins, name)?;
    if vals.len() != want {
        return Err(bad(name, format!("expected {want} values, got {}", vals.len())));
    }
    Ok(store.new_array_from(ty, vals)?)
}

fn param_len(p: &Param, ins: &BTreeMap<String, Value>, name: &str) -> Result<usize, EntryError> {
    match eval_expr(ins, p.len.as_ref().expect("array parameter")) {
        Ok(Value::Int(n)) if n >= 1 => Ok(n as usize),
        _ => Err(bad(name, "array length is not a positive int")),
    }
}

/// Create the items a root call needs and the root task binding them.
pub fn build(program: &CheckedProgram, store: &ItemStore, call: &EntryCall) -> Result<Entry, EntryError> {
    let def = program.routine(&call.callee).ok_or_else(|| EntryError::UnknownRoutine(call.callee.clone()))?;
    let params = &def.params;
    let given: [Vec<EntryArg>; 3] = match &call.args {
        Some(g) => g.clone(),
        None => {
            let mut g: [Vec<EntryArg>; 3] = Default::default();
            for p in params.group(Group::Out) {
                g[2].push(EntryArg {
                    name: None,
                    expr: crate::frontend::ast::Expr::new(ExprKind::Name(p.name().to_string()), Default::default()),
                });
            }
            g
        }
    };
    for g in Group::ALL {
        let (expected, found) = (params.group(g).len(), given[g.index()].len());
        if expected != found {
            return Err(EntryError::Arity { routine: def.name.clone(), group: g.index(), expected, found });
        }
    }

    let mut ins = BTreeMap::new();
    let mut args = Vec::new();
    let mut outputs = Vec::new();
    for g in Group::ALL {
        for (p, a) in params.group(g).iter().zip(&given[g.index()]) {
            let name = match (&a.name, &a.expr.kind, g) {
                (Some(n), _, _) => n.clone(),
                (None, ExprKind::Name(n), Group::Out) => n.clone(),
                _ => p.name().to_string(),
            };
            let binding = match g {
                Group::In => {
                    let vals = literal(a, &name)?;
                    if p.is_array() {
                        let id = array_item(store, p, &vals, &ins, &name)?;
                        Binding::Array { region: Region::range(id, 1, vals.len()), mode: AccessMode::Read }
                    } else {
                        let v = scalar_value(p, vals, &name)?;
                        ins.insert(p.name().to_string(), v);
                        Binding::Value(v)
                    }
                }
                Group::InOut => {
                    let vals = literal(a, &name)?;
                    if p.is_array() {
                        let id = array_item(store, p, &vals, &ins, &name)?;
                        outputs.push((name, OutputRef::Array(id)));
                        Binding::Array { region: Region::range(id, 1, vals.len()), mode: AccessMode::ReadWrite }
                    } else {
                        let v = scalar_value(p, vals, &name)?;
                        let id = store.new_scalar(p.ty.scalar().expect("scalar"));
                        outputs.push((name, OutputRef::Scalar(id)));
                        Binding::Update { input: Source::Value(v), output: Loc::Item(id) }
                    }
                }
                Group::Out => {
                    if !matches!(a.expr.kind, ExprKind::Name(_)) || a.name.is_some() {
                        return Err(bad(&name, "out arguments must be plain names"));
                    }
                    match &p.ty {
                        BaseType::Record(r) => {
                            let id = store.new_record(r);
                            outputs.push((name, OutputRef::Record(id)));
                            Binding::Write(Loc::Item(id))
                        }
                        t if p.is_array() => {
                            let n = param_len(p, &ins, &name)?;
                            let id = store.new_array(t.scalar().expect("scalar"), n as i64)?;
                            outputs.push((name, OutputRef::Array(id)));
                            Binding::Array { region: Region::range(id, 1, n), mode: AccessMode::Write }
                        }
                        t => {
                            let id = store.new_scalar(t.scalar().unwrap_or(ScalarType::Int));
                            outputs.push((name, OutputRef::Scalar(id)));
                            Binding::Write(Loc::Item(id))
                        }
                    }
                }
            };
            args.push(Arg { binding, del: p.del });
        }
    }
    let (a, b, c) = params.arities();
    let root = ChildSpec { callee: Callee::Routine(def.name.clone()), receiver: None, args, arity: [a, b, c] };
    Ok(Entry { root, outputs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::compile;

    const FIB: &str = "sum(int a, int b;; int c) { c = a + b; }
        fib(int n;; int k) { if (n<2) k=n; else { fib(n-1;;x); fib(n-2;;y); sum(x,y;;k); } }";

    #[test]
    fn scalar_entry_binds_value_and_fresh_out() {
        let p = compile(FIB).unwrap();
        let store = ItemStore::new();
        let e = build(&p, &store, &parse_call("fib(10;;a)").unwrap()).unwrap();
        assert_eq!(e.root.args[0].binding, Binding::Value(Value::Int(10)));
        assert_eq!(e.outputs.len(), 1);
        assert_eq!(e.outputs[0].0, "a");
        assert_eq!(e.root.to_string(), format!("fib(10;;{})", match e.outputs[0].1 {
            OutputRef::Scalar(id) => id,
            _ => unreachable!(),
        }));
    }

    #[test]
    fn arity_and_literal_errors() {
        let p = compile(FIB).unwrap();
        let store = ItemStore::new();
        assert!(matches!(build(&p, &store, &parse_call("fib(1,2;;a)").unwrap()), Err(EntryError::Arity { .. })));
        assert!(matches!(build(&p, &store, &parse_call("fib(n;;a)").unwrap()), Err(EntryError::NotLiteral(_))));
        assert!(matches!(build(&p, &store, &parse_call("nope(1;;a)").unwrap()), Err(EntryError::UnknownRoutine(_))));
        assert_eq!(default_entry(&p), Err(EntryError::NoDefault));
    }

    #[test]
    fn array_inout_entry() {
        let src = "scale(int n; real a[n];) { a(1) = a(1) * 2; }";
        let p = compile(src).unwrap();
        let store = ItemStore::new();
        let e = build(&p, &store, &parse_call("scale(3; a = [1, 2, 3];)").unwrap()).unwrap();
        let OutputRef::Array(id) = e.outputs[0].1 else { panic!() };
        assert_eq!(store.read().array(id).unwrap().values, vec![Some(Value::Real(1.0)), Some(Value::Real(2.0)), Some(Value::Real(3.0))]);
        assert!(build(&p, &store, &parse_call("scale(2; a = [1, 2, 3];)").unwrap()).is_err());
    }
}
