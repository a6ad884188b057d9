//! Evaluation of one task body.
//!
//! Statements run top to bottom on a private frame. Each call is either
//! evaluated in place or emitted as a child task; a body that emitted any
//! children ends in a delegation. Writes are buffered and returned in the
//! [`Outcome`], so an evaluation that is thrown away leaves no trace.
//!
//! Scalars follow single assignment by renaming: passing a scalar variable
//! as an inout or out argument of a delegated call binds the child to a
//! fresh item and repoints the variable at it. When the body ends, an out
//! whose final value is such a fresh item is handed to the child that
//! produces it by substituting the parent's own target for the fresh item.

mod ops;

use std::collections::{BTreeMap, HashMap};

use thiserror::Error;

pub use ops::{binary, builtin, negate};

use crate::frontend::ast::{Block, Call, Declarator, Expr, ExprKind, Group, LValue, Param, Params, Stmt, StmtKind};
use crate::frontend::check::{CheckedProgram, MethodDef};
use crate::pool::{Arg, Binding, Callee, ChildSpec, Loc, Outcome, Policy, Source, Task};
use crate::store::{
    AccessMode, CommitSet, Env, EnvEntry, ItemId, ItemKind, ItemStore, NewArray, Region, StoreError, StoreState,
};
use crate::value::{BaseType, ScalarType, Value};

pub const DEFAULT_DEPTH_CAP: usize = 100_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("`{0}` is read before it has a value")]
    ReadOfUnresolved(String),
    #[error("`{routine}` ended without producing out `{out}`")]
    MissingOut { routine: String, out: String },
    #[error("division by zero")]
    DivisionByZero,
    #[error("index {index} outside `{name}` of length {len}")]
    IndexOutOfBounds { name: String, index: i64, len: usize },
    #[error("type mismatch: {0}")]
    TypeMismatch(String),
    #[error("access violation: {0}")]
    AccessViolation(String),
    #[error("inline evaluation exceeded depth {0}")]
    StackBudgetExceeded(usize),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("array length must be positive, got {0}")]
    NonPositiveLength(i64),
    #[error("unknown routine `{0}`")]
    UnknownRoutine(String),
    #[error(transparent)]
    Store(#[from] StoreError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalConfig {
    pub policy: Policy,
    /// Maximum nesting of in-place calls within one task.
    pub depth_cap: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig { policy: Policy::DelegateAlways, depth_cap: DEFAULT_DEPTH_CAP }
    }
}

impl EvalConfig {
    pub fn with_policy(policy: Policy) -> EvalConfig {
        EvalConfig { policy, ..EvalConfig::default() }
    }
}

/// Evaluate a scalar expression over named values. Used for array length
/// expressions and available to tests.
pub fn eval_expr(env: &BTreeMap<String, Value>, e: &Expr) -> Result<Value, EvalError> {
    match &e.kind {
        ExprKind::Int(i) => Ok(Value::Int(*i)),
        ExprKind::Real(r) => Ok(Value::Real(*r)),
        ExprKind::Name(n) => env.get(n).copied().ok_or_else(|| EvalError::ReadOfUnresolved(n.clone())),
        ExprKind::Neg(x) => negate(eval_expr(env, x)?),
        ExprKind::Binary { op, lhs, rhs } => binary(*op, eval_expr(env, lhs)?, eval_expr(env, rhs)?),
        ExprKind::Builtin { func, arg } => builtin(*func, eval_expr(env, arg)?),
        _ => Err(EvalError::Unsupported("expression form needs a frame".into())),
    }
}

/// Run `task`'s body against `store` and return what it commits.
pub fn eval_task(
    program: &CheckedProgram,
    store: &ItemStore,
    task: &Task,
    cfg: &EvalConfig,
) -> Result<Outcome, EvalError> {
    let st = store.read();
    let mut cx = Ctx {
        program,
        store,
        st: &st,
        task,
        cfg,
        ov: Overlay::default(),
        children: Vec::new(),
        dirty: Vec::new(),
        substituted: HashMap::new(),
        depth: 0,
    };
    cx.run()?;
    Ok(cx.outcome())
}

#[derive(Debug, Clone, Copy)]
struct View {
    item: ItemId,
    /// Store index of local index `base`.
    lo: usize,
    base: i64,
    len: usize,
    ty: ScalarType,
    del: bool,
    writable: bool,
}

impl View {
    fn store_index(&self, name: &str, i: i64) -> Result<usize, EvalError> {
        let off = i - self.base;
        if off < 0 || off as usize >= self.len {
            return Err(EvalError::IndexOutOfBounds { name: name.into(), index: i, len: self.len });
        }
        Ok(self.lo + off as usize)
    }

    fn region(&self) -> Region {
        Region::range(self.item, self.lo, self.lo + self.len - 1)
    }

    /// `len` elements starting at store index `start`.
    fn sub(&self, name: &str, start: usize, len: usize) -> Result<View, EvalError> {
        if start + len > self.lo + self.len {
            return Err(EvalError::IndexOutOfBounds {
                name: name.into(),
                index: (start + len - self.lo) as i64 - 1 + self.base,
                len: self.len,
            });
        }
        Ok(View { lo: start, base: 1, len, ..*self })
    }
}

#[derive(Debug, Clone)]
enum Slot {
    Unset(ScalarType),
    Val(Value),
    /// A scalar location whose value is pending or must not be read here.
    Handle { loc: Loc, ty: ScalarType, del: bool },
    Array(View),
    Record { id: Option<ItemId>, def: String, del: bool },
}

fn slot_type(s: &Slot) -> Option<ScalarType> {
    match s {
        Slot::Unset(t) | Slot::Handle { ty: t, .. } => Some(*t),
        Slot::Val(Value::Int(_)) => Some(ScalarType::Int),
        Slot::Val(Value::Real(_)) => Some(ScalarType::Real),
        _ => None,
    }
}

struct Frame {
    scopes: Vec<HashMap<String, Slot>>,
    /// Index of the scope holding the parameters.
    params: usize,
    /// Every call must be evaluated in place.
    forced: bool,
    in_method: bool,
    routine: String,
}

impl Frame {
    fn new(routine: &str, forced: bool, in_method: bool) -> Frame {
        Frame { scopes: vec![HashMap::new()], params: 0, forced, in_method, routine: routine.to_string() }
    }

    fn get(&self, name: &str) -> Option<&Slot> {
        self.scopes.iter().rev().find_map(|s| s.get(name))
    }

    fn declare(&mut self, name: &str, slot: Slot) {
        self.scopes.last_mut().expect("scope").insert(name.to_string(), slot);
    }

    /// Rebind an existing name in the scope that holds it, or declare it
    /// in the innermost scope.
    fn set(&mut self, name: &str, slot: Slot) {
        for s in self.scopes.iter_mut().rev() {
            if let Some(old) = s.get_mut(name) {
                *old = slot;
                return;
            }
        }
        self.declare(name, slot);
    }

    fn param(&self, name: &str) -> Option<&Slot> {
        self.scopes[self.params].get(name)
    }
}

#[derive(Debug, PartialEq)]
enum Flow {
    Normal,
    Return,
}

#[derive(Default)]
struct Overlay {
    new_scalars: Vec<(ItemId, ScalarType)>,
    new_records: Vec<(ItemId, String)>,
    new_arrays: HashMap<ItemId, NewArray>,
    array_order: Vec<ItemId>,
    scalars: Vec<(ItemId, Value)>,
    elems: HashMap<(ItemId, usize), Value>,
    elem_order: Vec<(ItemId, usize)>,
    records: HashMap<ItemId, Env>,
    record_order: Vec<ItemId>,
}

/// A region touched by an emitted child; later in-place code must not
/// read what it writes or write what it touches.
struct Dirty {
    region: Region,
    write: bool,
}

enum Target<'p> {
    Routine(&'p crate::frontend::ast::RoutineDef),
    Method { recv: ItemId, def: &'p MethodDef, del: bool },
}

impl Target<'_> {
    fn params(&self) -> &Params {
        match self {
            Target::Routine(r) => &r.params,
            Target::Method { def, .. } => &def.params,
        }
    }

    fn body(&self) -> &Block {
        match self {
            Target::Routine(r) => r.body.as_ref().expect("checked routines have bodies"),
            Target::Method { def, .. } => &def.body,
        }
    }

    fn name(&self) -> String {
        match self {
            Target::Routine(r) => r.name.clone(),
            Target::Method { def, .. } => format!("{}.{}", def.record, def.name),
        }
    }
}

enum InArg {
    Value(Value),
    Handle { loc: Loc, del: bool },
    Region(View),
    Record { id: ItemId, del: bool },
}

impl InArg {
    fn del(&self) -> bool {
        match self {
            InArg::Value(_) => false,
            InArg::Handle { del, .. } | InArg::Record { del, .. } => *del,
            InArg::Region(v) => v.del,
        }
    }
}

enum OutArg {
    Var { name: String, ty: ScalarType, del: bool },
    Elem { loc: Loc, ty: ScalarType, del: bool },
    Region(View),
    Record { name: String, id: Option<ItemId>, def: String, del: bool },
}

impl OutArg {
    fn del(&self) -> bool {
        match self {
            OutArg::Var { del, .. } | OutArg::Elem { del, .. } | OutArg::Record { del, .. } => *del,
            OutArg::Region(v) => v.del,
        }
    }
}

fn scalar_of(p: &Param) -> ScalarType {
    p.ty.scalar().unwrap_or(ScalarType::Int)
}

fn coerce(v: Value, ty: ScalarType, what: &str) -> Result<Value, EvalError> {
    v.coerce(ty)
        .ok_or_else(|| EvalError::TypeMismatch(format!("{} value for {ty} `{what}`", v.type_name())))
}

fn unresolved(name: &str) -> impl Fn(EvalError) -> EvalError + '_ {
    move |e| match e {
        EvalError::Store(StoreError::NotResolved(_)) => EvalError::ReadOfUnresolved(name.to_string()),
        e => e,
    }
}

struct Ctx<'a> {
    program: &'a CheckedProgram,
    store: &'a ItemStore,
    st: &'a StoreState,
    task: &'a Task,
    cfg: &'a EvalConfig,
    ov: Overlay,
    children: Vec<ChildSpec>,
    dirty: Vec<Dirty>,
    substituted: HashMap<ItemId, Loc>,
    depth: usize,
}

impl<'a> Ctx<'a> {
    fn run(&mut self) -> Result<(), EvalError> {
        let spec = &self.task.spec;
        match &spec.callee {
            Callee::Copy(ty) => {
                let (Binding::Read(from), Binding::Write(to)) = (&spec.args[0].binding, &spec.args[1].binding) else {
                    return Err(EvalError::Unsupported("malformed copy task".into()));
                };
                let v = coerce(self.read_loc_checked(*from)?, *ty, "copy")?;
                self.resolve_target(*to, v)
            }
            Callee::Routine(name) => {
                let def = self.program.routine(name).ok_or_else(|| EvalError::UnknownRoutine(name.clone()))?;
                let mut f = Frame::new(name, false, false);
                self.bind_task_params(&mut f, &def.params)?;
                self.run_body(&mut f, def.body.as_ref().expect("checked"), &def.params)?;
                self.finish_task_outs(&f, &def.params)
            }
            Callee::Method { record, method } => {
                let def = self
                    .program
                    .method(record, method)
                    .ok_or_else(|| EvalError::UnknownRoutine(format!("{record}.{method}")))?;
                let recv = spec.receiver.ok_or_else(|| EvalError::Unsupported("method task without receiver".into()))?;
                let env = self.record_env(recv).ok_or(StoreError::NotResolved(recv))?;
                let mut f = Frame::new(&def.name, true, true);
                self.load_env(&mut f, &env)?;
                f.scopes.push(HashMap::new());
                f.params = 1;
                self.bind_task_params(&mut f, &def.params)?;
                self.run_body(&mut f, &def.body, &def.params)?;
                self.save_env(&f, recv, &env)?;
                self.finish_task_outs(&f, &def.params)
            }
        }
    }

    fn outcome(self) -> Outcome {
        let mut ov = self.ov;
        let new_arrays = ov.array_order.iter().map(|id| ov.new_arrays.remove(id).expect("ordered")).collect();
        let elems = ov.elem_order.iter().map(|k| (k.0, k.1, ov.elems[k])).collect();
        let records = ov.record_order.iter().map(|id| (*id, ov.records[id].clone())).collect();
        Outcome {
            commits: CommitSet {
                new_scalars: ov.new_scalars,
                new_arrays,
                new_records: ov.new_records,
                scalars: ov.scalars,
                elems,
                records,
            },
            children: self.children,
        }
    }

    // ---- item access --------------------------------------------------------

    fn read_loc_checked(&self, loc: Loc) -> Result<Value, EvalError> {
        Ok(match loc {
            Loc::Item(x) => self.st.read_scalar(self.task.id, x)?,
            Loc::Elem(a, i) => self.read_elem(a, i)?,
        })
    }

    fn dirty_write(&self, r: &Region) -> bool {
        self.dirty.iter().any(|d| d.write && crate::store::regions_overlap(&d.region, r))
    }

    fn dirty_any(&self, r: &Region) -> bool {
        self.dirty.iter().any(|d| crate::store::regions_overlap(&d.region, r))
    }

    fn array_len(&self, a: ItemId) -> Result<usize, EvalError> {
        match self.ov.new_arrays.get(&a) {
            Some(n) => Ok(n.values.len()),
            None => Ok(self.st.array(a)?.values.len()),
        }
    }

    fn peek_elem(&self, a: ItemId, i: usize) -> Option<Value> {
        if let Some(n) = self.ov.new_arrays.get(&a) {
            return n.values.get(i.wrapping_sub(1)).copied().flatten();
        }
        if let Some(v) = self.ov.elems.get(&(a, i)) {
            return Some(*v);
        }
        self.st.read_elem(self.task.id, a, i).ok()
    }

    fn read_elem(&self, a: ItemId, i: usize) -> Result<Value, EvalError> {
        if let Some(n) = self.ov.new_arrays.get(&a) {
            return match n.values.get(i.wrapping_sub(1)) {
                None => Err(StoreError::IndexOutOfBounds { item: a, index: i as i64, len: n.values.len() }.into()),
                Some(v) => v.ok_or(StoreError::NotResolved(a).into()),
            };
        }
        if let Some(v) = self.ov.elems.get(&(a, i)) {
            return Ok(*v);
        }
        Ok(self.st.read_elem(self.task.id, a, i)?)
    }

    fn write_elem(&mut self, a: ItemId, i: usize, v: Value) -> Result<(), EvalError> {
        let region = Region::elem(a, i);
        if self.dirty_any(&region) {
            return Err(EvalError::Unsupported(format!(
                "element {a}({i}) is written while a delegated call still uses it"
            )));
        }
        if let Some(n) = self.ov.new_arrays.get_mut(&a) {
            let len = n.values.len();
            let cell = n
                .values
                .get_mut(i.wrapping_sub(1))
                .ok_or(StoreError::IndexOutOfBounds { item: a, index: i as i64, len })?;
            *cell = Some(coerce(v, n.ty, "element")?);
            return Ok(());
        }
        let arr = self.st.array(a)?;
        if i < 1 || i > arr.values.len() {
            return Err(StoreError::IndexOutOfBounds { item: a, index: i as i64, len: arr.values.len() }.into());
        }
        self.st.check_access(self.task.id, region, true)?;
        let v = coerce(v, arr.ty, "element")?;
        if self.ov.elems.insert((a, i), v).is_none() {
            self.ov.elem_order.push((a, i));
        }
        Ok(())
    }

    fn loc_available(&self, loc: Loc) -> bool {
        match loc {
            Loc::Item(x) => {
                self.st.is_resolved(x) && self.st.check_access(self.task.id, Region::whole(x), false).is_ok()
            }
            Loc::Elem(a, i) => !self.dirty_write(&Region::elem(a, i)) && self.peek_elem(a, i).is_some(),
        }
    }

    fn resolve_target(&mut self, loc: Loc, v: Value) -> Result<(), EvalError> {
        match loc {
            Loc::Item(x) => {
                self.ov.scalars.push((x, v));
                Ok(())
            }
            Loc::Elem(a, i) => self.write_elem(a, i, v),
        }
    }

    fn fresh_scalar(&mut self, ty: ScalarType) -> ItemId {
        let id = self.store.fresh_id(ItemKind::Scalar);
        self.ov.new_scalars.push((id, ty));
        id
    }

    /// Hand the value at `from` to location `to`: by substitution when
    /// `from` is a fresh item an emitted child produces, by copying when it
    /// is available, and through a copy task otherwise.
    fn forward_to(&mut self, from: Loc, to: Loc, ty: ScalarType) -> Result<(), EvalError> {
        if let Loc::Item(x) = from {
            if let Some(done) = self.substituted.get(&x).copied() {
                return self.forward_to(done, to, ty);
            }
            let produced = self.children.iter().any(|c| c.outputs().contains(&x));
            if produced && self.ov.new_scalars.iter().any(|(i, _)| *i == x) {
                for c in &mut self.children {
                    c.substitute(x, to);
                }
                self.ov.new_scalars.retain(|(i, _)| *i != x);
                self.substituted.insert(x, to);
                self.dirty.push(Dirty { region: to.region(), write: true });
                return Ok(());
            }
        }
        if self.loc_available(from) {
            let v = coerce(self.read_loc_checked(from)?, ty, "out")?;
            return self.resolve_target(to, v);
        }
        let spec = ChildSpec::copy(ty, from, to);
        self.emit(spec);
        Ok(())
    }

    fn emit(&mut self, spec: ChildSpec) {
        for (region, mode, _) in spec.accesses() {
            self.dirty.push(Dirty { region, write: mode.writes() });
        }
        self.children.push(spec);
    }

    /// Environment of a record this task may use in place.
    fn record_env(&self, r: ItemId) -> Option<Env> {
        if let Some(env) = self.ov.records.get(&r) {
            return Some(env.clone());
        }
        if self.st.check_access(self.task.id, Region::whole(r), true).is_err() {
            return None;
        }
        self.st.record(r).ok()?.env.clone()
    }

    fn set_record(&mut self, r: ItemId, env: Env) {
        if self.ov.records.insert(r, env).is_none() {
            self.ov.record_order.push(r);
        }
    }

    // ---- frames ---------------------------------------------------------------

    fn bind_task_params(&mut self, f: &mut Frame, params: &Params) -> Result<(), EvalError> {
        let args = &self.task.spec.args;
        for ((g, p), arg) in params.iter().zip(args) {
            let ty = scalar_of(p);
            let slot = match &arg.binding {
                Binding::Value(v) => Slot::Val(coerce(*v, ty, p.name())?),
                Binding::Read(loc) if p.del => Slot::Handle { loc: *loc, ty, del: true },
                Binding::Read(loc) => Slot::Val(coerce(self.read_loc_checked(*loc)?, ty, p.name())?),
                Binding::Update { input: Source::Value(v), .. } => Slot::Val(coerce(*v, ty, p.name())?),
                Binding::Update { input: Source::Loc(l), .. } if p.del => Slot::Handle { loc: *l, ty, del: true },
                Binding::Update { input: Source::Loc(l), .. } => {
                    Slot::Val(coerce(self.read_loc_checked(*l)?, ty, p.name())?)
                }
                Binding::Write(Loc::Item(r)) if r.kind == ItemKind::Record => {
                    Slot::Record { id: Some(*r), def: p.ty.to_string(), del: p.del }
                }
                Binding::Write(_) => Slot::Unset(ty),
                Binding::Array { region, .. } => Slot::Array(View {
                    item: region.item,
                    lo: region.lo,
                    base: 1,
                    len: region.len(),
                    ty,
                    del: p.del,
                    writable: g != Group::In,
                }),
                Binding::Record(r) => Slot::Record { id: Some(*r), def: p.ty.to_string(), del: p.del },
            };
            f.declare(p.name(), slot);
        }
        Ok(())
    }

    fn run_body(&mut self, f: &mut Frame, body: &Block, params: &Params) -> Result<(), EvalError> {
        f.scopes.push(HashMap::new());
        let r = self.exec_stmts(f, &body.stmts);
        let r = r.and_then(|_| self.finish_constructor(f, params));
        f.scopes.pop();
        r
    }

    /// A constructor's top-level locals and ins become the instance state
    /// of the record it produces.
    fn finish_constructor(&mut self, f: &Frame, params: &Params) -> Result<(), EvalError> {
        if f.in_method {
            return Ok(());
        }
        let Some(rec) = self.program.constructed_record(&f.routine) else { return Ok(()) };
        let Some(Slot::Record { id: Some(r), .. }) = f.param(&rec.receiver).cloned() else {
            return Err(EvalError::MissingOut { routine: f.routine.clone(), out: rec.receiver.clone() });
        };
        let ins: Vec<&str> = params.group(Group::In).iter().map(Param::name).collect();
        let mut env = Env::new();
        let state = f.scopes[f.params]
            .iter()
            .filter(|(k, _)| ins.contains(&k.as_str()))
            .chain(f.scopes[f.params + 1].iter());
        for (name, slot) in state {
            let entry = match slot {
                Slot::Val(v) => EnvEntry::Scalar(*v),
                Slot::Unset(t) => EnvEntry::Unset(*t),
                Slot::Handle { loc, ty, del: false } if self.loc_available(*loc) => {
                    EnvEntry::Scalar(coerce(self.read_loc_checked(*loc)?, *ty, name)?)
                }
                Slot::Array(v) if self.ov.new_arrays.contains_key(&v.item) && v.base == 1 => {
                    if self.dirty_any(&v.region()) {
                        return Err(EvalError::Unsupported(format!(
                            "instance array `{name}` is still in use by a delegated call"
                        )));
                    }
                    self.ov.new_arrays.get_mut(&v.item).expect("present").owner = Some(r);
                    EnvEntry::Array(v.item)
                }
                Slot::Record { .. } => continue,
                _ => {
                    return Err(EvalError::Unsupported(format!(
                        "instance state `{name}` of `{}` must be a local value or array",
                        rec.name
                    )))
                }
            };
            env.insert(name.clone(), entry);
        }
        self.set_record(r, env);
        Ok(())
    }

    fn load_env(&mut self, f: &mut Frame, env: &Env) -> Result<(), EvalError> {
        for (name, e) in env {
            let slot = match e {
                EnvEntry::Scalar(v) => Slot::Val(*v),
                EnvEntry::Unset(t) => Slot::Unset(*t),
                EnvEntry::Array(id) => {
                    let ty = match self.ov.new_arrays.get(id) {
                        Some(n) => n.ty,
                        None => self.st.array(*id)?.ty,
                    };
                    Slot::Array(View {
                        item: *id,
                        lo: 1,
                        base: 1,
                        len: self.array_len(*id)?,
                        ty,
                        del: false,
                        writable: true,
                    })
                }
            };
            f.declare(name, slot);
        }
        Ok(())
    }

    fn save_env(&mut self, f: &Frame, r: ItemId, old: &Env) -> Result<(), EvalError> {
        let mut env = Env::new();
        for (name, e) in old {
            let entry = match (e, f.scopes[0].get(name)) {
                (EnvEntry::Array(id), _) => EnvEntry::Array(*id),
                (_, Some(Slot::Val(v))) => EnvEntry::Scalar(*v),
                (_, Some(Slot::Unset(t))) => EnvEntry::Unset(*t),
                _ => return Err(EvalError::Unsupported(format!("instance state `{name}` lost its value"))),
            };
            env.insert(name.clone(), entry);
        }
        self.set_record(r, env);
        Ok(())
    }

    fn finish_task_outs(&mut self, f: &Frame, params: &Params) -> Result<(), EvalError> {
        let args = self.task.spec.args.clone();
        for ((g, p), arg) in params.iter().zip(&args) {
            if g == Group::In {
                continue;
            }
            let missing = || EvalError::MissingOut { routine: f.routine.clone(), out: p.name().to_string() };
            match &arg.binding {
                Binding::Write(Loc::Item(r)) if r.kind == ItemKind::Record => {
                    let built = self.ov.records.contains_key(r) || self.children.iter().any(|c| c.outputs().contains(r));
                    if !built {
                        return Err(missing());
                    }
                }
                Binding::Write(target) | Binding::Update { output: target, .. } => {
                    let ty = scalar_of(p);
                    match f.param(p.name()).cloned() {
                        Some(Slot::Val(v)) => {
                            let v = coerce(v, ty, p.name())?;
                            self.resolve_target(*target, v)?
                        }
                        Some(Slot::Handle { loc, .. }) => self.forward_to(loc, *target, ty)?,
                        _ => return Err(missing()),
                    }
                }
                _ => {}
            }
        }
        Ok(())
    }

    // ---- statements -----------------------------------------------------------

    fn exec_stmts(&mut self, f: &mut Frame, stmts: &[Stmt]) -> Result<Flow, EvalError> {
        for s in stmts {
            if self.exec_stmt(f, s)? == Flow::Return {
                return Ok(Flow::Return);
            }
        }
        Ok(Flow::Normal)
    }

    fn exec_scoped(&mut self, f: &mut Frame, run: impl FnOnce(&mut Self, &mut Frame) -> Result<Flow, EvalError>) -> Result<Flow, EvalError> {
        f.scopes.push(HashMap::new());
        let r = run(self, f);
        f.scopes.pop();
        r
    }

    fn exec_stmt(&mut self, f: &mut Frame, s: &Stmt) -> Result<Flow, EvalError> {
        match &s.kind {
            StmtKind::Decl { ty, decls } => {
                for d in decls {
                    self.declare(f, ty, d)?;
                }
            }
            StmtKind::Assign { target, value } => {
                let v = self.eval(f, value)?;
                match target {
                    LValue::Name(n) => self.assign_name(f, n, v)?,
                    LValue::Index { base, index } => {
                        let i = self.eval_int(f, index)?;
                        let view = self.view(f, base)?;
                        if view.del {
                            return Err(EvalError::AccessViolation(format!("`{base}` is delegated")));
                        }
                        if !view.writable {
                            return Err(EvalError::AccessViolation(format!("`{base}` is read-only")));
                        }
                        let idx = view.store_index(base, i)?;
                        self.write_elem(view.item, idx, coerce(v, view.ty, base)?)?;
                    }
                }
            }
            StmtKind::Call(c) => self.exec_call(f, c)?,
            StmtKind::If { cond, then, els } => {
                let c = self.eval(f, cond)?;
                let branch = if c.as_f64().unwrap_or(0.0) != 0.0 { Some(then) } else { els.as_ref() };
                if let Some(b) = branch {
                    return self.exec_scoped(f, |cx, f| cx.exec_stmt(f, b));
                }
            }
            StmtKind::Return => return Ok(Flow::Return),
            StmtKind::Block(b) => return self.exec_scoped(f, |cx, f| cx.exec_stmts(f, &b.stmts)),
            StmtKind::MethodImpl(_) => {}
            StmtKind::Expr(e) => {
                self.eval(f, e)?;
            }
        }
        Ok(Flow::Normal)
    }

    fn declare(&mut self, f: &mut Frame, ty: &BaseType, d: &Declarator) -> Result<(), EvalError> {
        let slot = match (ty, &d.dims) {
            (BaseType::Record(r), _) => Slot::Record { id: None, def: r.clone(), del: false },
            (t, Some((lo, hi))) => {
                let base = match lo {
                    Some(lo) => self.eval_int(f, lo)?,
                    None => 1,
                };
                let hi = self.eval_int(f, hi)?;
                let n = hi - base + 1;
                if n < 1 {
                    return Err(EvalError::NonPositiveLength(n));
                }
                let st = t.scalar().expect("scalar array");
                let id = self.store.fresh_id(ItemKind::Array);
                self.ov.new_arrays.insert(id, NewArray { id, ty: st, values: vec![None; n as usize], owner: None });
                self.ov.array_order.push(id);
                Slot::Array(View { item: id, lo: 1, base, len: n as usize, ty: st, del: false, writable: true })
            }
            (t, None) => {
                let st = t.scalar().expect("scalar");
                match &d.init {
                    Some(e) => {
                        let v = self.eval(f, e)?;
                        Slot::Val(coerce(v, st, &d.name)?)
                    }
                    None => Slot::Unset(st),
                }
            }
        };
        f.declare(&d.name, slot);
        Ok(())
    }

    fn assign_name(&mut self, f: &mut Frame, n: &str, v: Value) -> Result<(), EvalError> {
        let slot = f.get(n).ok_or_else(|| EvalError::ReadOfUnresolved(n.to_string()))?;
        if let Slot::Handle { del: true, .. } = slot {
            return Err(EvalError::AccessViolation(format!("`{n}` is delegated")));
        }
        let ty = slot_type(slot).ok_or_else(|| EvalError::TypeMismatch(format!("`{n}` is not a scalar")))?;
        let v = coerce(v, ty, n)?;
        f.set(n, Slot::Val(v));
        Ok(())
    }

    fn view(&self, f: &Frame, name: &str) -> Result<View, EvalError> {
        match f.get(name) {
            Some(Slot::Array(v)) => Ok(*v),
            Some(_) => Err(EvalError::TypeMismatch(format!("`{name}` is not an array"))),
            None => Err(EvalError::ReadOfUnresolved(name.to_string())),
        }
    }

    // ---- expressions ----------------------------------------------------------

    fn eval_int(&mut self, f: &mut Frame, e: &Expr) -> Result<i64, EvalError> {
        match self.eval(f, e)? {
            Value::Int(i) => Ok(i),
            v => Err(EvalError::TypeMismatch(format!("index must be int, got {}", v.type_name()))),
        }
    }

    fn read_name(&self, f: &Frame, n: &str) -> Result<Value, EvalError> {
        match f.get(n) {
            Some(Slot::Val(v)) => Ok(*v),
            Some(Slot::Unset(_)) | None => Err(EvalError::ReadOfUnresolved(n.to_string())),
            Some(Slot::Handle { del: true, .. }) => Err(EvalError::AccessViolation(format!("`{n}` is delegated"))),
            Some(Slot::Handle { loc, ty, .. }) => {
                if !self.loc_available(*loc) {
                    return Err(EvalError::ReadOfUnresolved(n.to_string()));
                }
                coerce(self.read_loc_checked(*loc).map_err(unresolved(n))?, *ty, n)
            }
            Some(_) => Err(EvalError::TypeMismatch(format!("`{n}` is not a scalar"))),
        }
    }

    fn eval(&mut self, f: &mut Frame, e: &Expr) -> Result<Value, EvalError> {
        match &e.kind {
            ExprKind::Int(i) => Ok(Value::Int(*i)),
            ExprKind::Real(r) => Ok(Value::Real(*r)),
            ExprKind::Name(n) => self.read_name(f, n),
            ExprKind::Index { base, index } => {
                let i = self.eval_int(f, index)?;
                let view = self.view(f, base)?;
                if view.del {
                    return Err(EvalError::AccessViolation(format!("`{base}` is delegated")));
                }
                let idx = view.store_index(base, i)?;
                let what = format!("{base}({i})");
                if self.dirty_write(&Region::elem(view.item, idx)) {
                    return Err(EvalError::ReadOfUnresolved(what));
                }
                let v = self.read_elem(view.item, idx).map_err(unresolved(&what))?;
                coerce(v, view.ty, base)
            }
            ExprKind::Neg(x) => {
                let v = self.eval(f, x)?;
                negate(v)
            }
            ExprKind::Binary { op, lhs, rhs } => {
                let a = self.eval(f, lhs)?;
                let b = self.eval(f, rhs)?;
                binary(*op, a, b)
            }
            ExprKind::Builtin { func, arg } => {
                let v = self.eval(f, arg)?;
                builtin(*func, v)
            }
            ExprKind::Step { name, inc, prefix } => {
                let old = match self.read_name(f, name)? {
                    Value::Int(i) => i,
                    _ => return Err(EvalError::TypeMismatch(format!("`{name}` is not an int"))),
                };
                let new = if *inc { old.wrapping_add(1) } else { old.wrapping_sub(1) };
                f.set(name, Slot::Val(Value::Int(new)));
                Ok(Value::Int(if *prefix { new } else { old }))
            }
            ExprKind::Range { base, .. } => {
                Err(EvalError::TypeMismatch(format!("range of `{base}` used as a value")))
            }
            ExprKind::ArrayLit(_) => Err(EvalError::TypeMismatch("array literal used as a value".into())),
        }
    }

    // ---- calls ------------------------------------------------------------------

    /// Region of array argument `arg` bound to a parameter of length `len`
    /// (`None` keeps the argument's own length).
    fn region_arg(&mut self, f: &mut Frame, arg: &Expr, len: Option<usize>) -> Result<View, EvalError> {
        let (name, view, start, avail) = match &arg.kind {
            ExprKind::Name(n) => {
                let v = self.view(f, n)?;
                (n, v, v.lo, v.len)
            }
            ExprKind::Index { base, index } => {
                let i = self.eval_int(f, index)?;
                let v = self.view(f, base)?;
                let s = v.store_index(base, i)?;
                (base, v, s, v.lo + v.len - s)
            }
            ExprKind::Range { base, lo, hi } => {
                let (l, h) = (self.eval_int(f, lo)?, self.eval_int(f, hi)?);
                let v = self.view(f, base)?;
                let (s, e) = (v.store_index(base, l)?, v.store_index(base, h)?);
                if e < s {
                    return Err(EvalError::NonPositiveLength(h - l + 1));
                }
                (base, v, s, e - s + 1)
            }
            _ => return Err(EvalError::TypeMismatch("array argument must be an array location".into())),
        };
        let want = len.unwrap_or(avail);
        if want > avail {
            return Err(EvalError::IndexOutOfBounds {
                name: name.clone(),
                index: (start - view.lo) as i64 + view.base + want as i64 - 1,
                len: view.len,
            });
        }
        view.sub(name, start, want)
    }

    fn in_arg(&mut self, f: &mut Frame, arg: &Expr, p: &Param, len: Option<usize>) -> Result<InArg, EvalError> {
        if let BaseType::Record(_) = p.ty {
            return match &arg.kind {
                ExprKind::Name(n) => match f.get(n) {
                    Some(Slot::Record { id: Some(id), del, .. }) => Ok(InArg::Record { id: *id, del: *del }),
                    _ => Err(EvalError::ReadOfUnresolved(n.clone())),
                },
                _ => Err(EvalError::TypeMismatch("record argument must be a name".into())),
            };
        }
        if p.is_array() {
            return Ok(InArg::Region(self.region_arg(f, arg, len)?));
        }
        let elem = match &arg.kind {
            ExprKind::Name(n) => match f.get(n).cloned() {
                Some(Slot::Val(v)) => return Ok(InArg::Value(v)),
                Some(Slot::Unset(_)) | None => return Err(EvalError::ReadOfUnresolved(n.clone())),
                Some(Slot::Handle { loc, ty, del }) => {
                    if !del && self.loc_available(loc) {
                        return Ok(InArg::Value(coerce(self.read_loc_checked(loc)?, ty, n)?));
                    }
                    return Ok(InArg::Handle { loc, del });
                }
                Some(Slot::Record { .. }) => return Err(EvalError::TypeMismatch(format!("`{n}` is a record"))),
                Some(Slot::Array(_)) => self.region_arg(f, arg, None)?,
            },
            ExprKind::Index { .. } | ExprKind::Range { .. } => self.region_arg(f, arg, Some(1))?,
            _ => return Ok(InArg::Value(self.eval(f, arg)?)),
        };
        if elem.len != 1 {
            return Err(EvalError::TypeMismatch(format!("array of length {} passed as scalar `{}`", elem.len, p.name())));
        }
        let loc = Loc::Elem(elem.item, elem.lo);
        if !elem.del && self.loc_available(loc) {
            return Ok(InArg::Value(coerce(self.read_elem(elem.item, elem.lo)?, elem.ty, p.name())?));
        }
        Ok(InArg::Handle { loc, del: elem.del })
    }

    fn out_arg(&mut self, f: &mut Frame, arg: &Expr, p: &Param, len: Option<usize>) -> Result<OutArg, EvalError> {
        if let BaseType::Record(def) = &p.ty {
            let ExprKind::Name(n) = &arg.kind else {
                return Err(EvalError::TypeMismatch("record argument must be a name".into()));
            };
            return Ok(match f.get(n) {
                Some(Slot::Record { id, def, del }) => OutArg::Record { name: n.clone(), id: *id, def: def.clone(), del: *del },
                Some(_) => return Err(EvalError::TypeMismatch(format!("`{n}` is not a record"))),
                None => OutArg::Record { name: n.clone(), id: None, def: def.clone(), del: false },
            });
        }
        if p.is_array() {
            let v = self.region_arg(f, arg, len)?;
            if !v.writable {
                return Err(EvalError::AccessViolation("read-only array passed for writing".into()));
            }
            return Ok(OutArg::Region(v));
        }
        let elem = match &arg.kind {
            ExprKind::Name(n) => match f.get(n) {
                None => return Ok(OutArg::Var { name: n.clone(), ty: scalar_of(p), del: false }),
                Some(Slot::Array(_)) => self.region_arg(f, arg, None)?,
                Some(s @ (Slot::Val(_) | Slot::Unset(_) | Slot::Handle { .. })) => {
                    let del = matches!(s, Slot::Handle { del: true, .. });
                    return Ok(OutArg::Var { name: n.clone(), ty: slot_type(s).expect("scalar"), del });
                }
                Some(Slot::Record { .. }) => return Err(EvalError::TypeMismatch(format!("`{n}` is a record"))),
            },
            ExprKind::Index { .. } | ExprKind::Range { .. } => self.region_arg(f, arg, Some(1))?,
            _ => return Err(EvalError::TypeMismatch("out argument must be a location".into())),
        };
        if elem.len != 1 {
            return Err(EvalError::TypeMismatch(format!("array of length {} passed as scalar `{}`", elem.len, p.name())));
        }
        if !elem.writable {
            return Err(EvalError::AccessViolation("read-only array passed for writing".into()));
        }
        Ok(OutArg::Elem { loc: Loc::Elem(elem.item, elem.lo), ty: elem.ty, del: elem.del })
    }

    fn exec_call(&mut self, f: &mut Frame, call: &Call) -> Result<(), EvalError> {
        let program = self.program;
        let target = match &call.receiver {
            Some(recv) => {
                let (id, def, del) = match f.get(recv) {
                    Some(Slot::Record { id, def, del }) => (*id, def.clone(), *del),
                    _ => return Err(EvalError::TypeMismatch(format!("`{recv}` is not a record"))),
                };
                let recv_id = id.ok_or_else(|| EvalError::ReadOfUnresolved(recv.clone()))?;
                let m = program
                    .method(&def, &call.callee)
                    .ok_or_else(|| EvalError::UnknownRoutine(format!("{def}.{}", call.callee)))?;
                Target::Method { recv: recv_id, def: m, del }
            }
            None => Target::Routine(
                program.routine(&call.callee).ok_or_else(|| EvalError::UnknownRoutine(call.callee.clone()))?,
            ),
        };
        let params = target.params();

        // in-arguments, then the callee's array lengths, then locations
        let mut in_env = BTreeMap::new();
        let mut ins = Vec::new();
        for (arg, p) in call.group(Group::In).iter().zip(params.group(Group::In)) {
            let len = if p.is_array() { Some(self.param_len(p, &in_env)?) } else { None };
            let a = self.in_arg(f, arg, p, len)?;
            if let InArg::Value(v) = &a {
                in_env.insert(p.name().to_string(), *v);
            }
            ins.push(a);
        }
        let mut outs = Vec::new();
        for g in [Group::InOut, Group::Out] {
            for (arg, p) in call.group(g).iter().zip(params.group(g)) {
                let len = if p.is_array() { Some(self.param_len(p, &in_env)?) } else { None };
                outs.push((g, self.out_arg(f, arg, p, len)?));
            }
        }

        let (recv, recv_del) = match &target {
            Target::Method { recv, del, .. } => (Some(*recv), *del),
            Target::Routine(_) => (None, false),
        };
        let touches_del = recv_del || ins.iter().any(InArg::del) || outs.iter().any(|(_, o)| o.del());
        let forced = f.forced || f.in_method || call.must_inline;
        let by_policy = match self.cfg.policy {
            Policy::DelegateAlways => false,
            Policy::InlineAlways => true,
            Policy::InlineBelowDepth(d) => self.task.depth >= d,
            Policy::InlineBelowSize(n) => ins.iter().all(|a| match a {
                InArg::Value(Value::Int(i)) => i.unsigned_abs() < n.unsigned_abs(),
                InArg::Value(_) => true,
                _ => false,
            }),
        };
        if !touches_del && (forced || by_policy) {
            if self.inline_available(f, recv, &ins, &outs)? {
                return self.inline_call(f, call, &target, ins, outs);
            }
            if forced {
                return Err(EvalError::ReadOfUnresolved(format!(
                    "an argument of `{}`, whose result is needed in place",
                    target.name()
                )));
            }
        }
        self.delegate(f, &target, ins, outs)
    }

    fn param_len(&self, p: &Param, in_env: &BTreeMap<String, Value>) -> Result<usize, EvalError> {
        let e = p.len.as_ref().expect("array param");
        match eval_expr(in_env, e) {
            Ok(Value::Int(n)) if n >= 1 => Ok(n as usize),
            Ok(Value::Int(n)) => Err(EvalError::NonPositiveLength(n)),
            Ok(v) => Err(EvalError::TypeMismatch(format!("length of `{}` is {}", p.name(), v.type_name()))),
            Err(EvalError::ReadOfUnresolved(n)) => Err(EvalError::Unsupported(format!(
                "length of `{}` depends on `{n}`, which is not available",
                p.name()
            ))),
            Err(e) => Err(e),
        }
    }

    fn inline_available(
        &self,
        f: &Frame,
        recv: Option<ItemId>,
        ins: &[InArg],
        outs: &[(Group, OutArg)],
    ) -> Result<bool, EvalError> {
        if let Some(r) = recv {
            if self.record_env(r).is_none() || self.dirty_any(&Region::whole(r)) {
                return Ok(false);
            }
        }
        for a in ins {
            let ok = match a {
                InArg::Value(_) => true,
                InArg::Handle { .. } => false,
                InArg::Region(v) => !self.dirty_write(&v.region()),
                InArg::Record { id, .. } => self.record_env(*id).is_some() && !self.dirty_any(&Region::whole(*id)),
            };
            if !ok {
                return Ok(false);
            }
        }
        for (g, o) in outs {
            let ok = match o {
                OutArg::Var { name, .. } if *g == Group::InOut => match f.get(name) {
                    Some(Slot::Val(_)) => true,
                    Some(Slot::Handle { loc, .. }) => self.loc_available(*loc),
                    _ => return Err(EvalError::ReadOfUnresolved(name.clone())),
                },
                OutArg::Var { .. } => true,
                OutArg::Elem { loc, .. } => {
                    !self.dirty_any(&loc.region()) && (*g == Group::Out || self.loc_available(*loc))
                }
                OutArg::Region(v) => !self.dirty_any(&v.region()),
                OutArg::Record { id: Some(id), .. } if *g == Group::InOut => {
                    self.record_env(*id).is_some() && !self.dirty_any(&Region::whole(*id))
                }
                OutArg::Record { .. } => true,
            };
            if !ok {
                return Ok(false);
            }
        }
        Ok(true)
    }

    fn new_record(&mut self, f: &mut Frame, name: &str, def: &str) -> ItemId {
        let id = self.store.fresh_id(ItemKind::Record);
        self.ov.new_records.push((id, def.to_string()));
        f.set(name, Slot::Record { id: Some(id), def: def.to_string(), del: false });
        id
    }

    fn inline_call(
        &mut self,
        f: &mut Frame,
        call: &Call,
        target: &Target,
        ins: Vec<InArg>,
        outs: Vec<(Group, OutArg)>,
    ) -> Result<(), EvalError> {
        self.depth += 1;
        if self.depth > self.cfg.depth_cap {
            return Err(EvalError::StackBudgetExceeded(self.cfg.depth_cap));
        }
        let params = target.params();
        let in_method = matches!(target, Target::Method { .. });
        let forced = f.forced || f.in_method || call.must_inline || in_method;
        let mut cf = Frame::new(&target.name(), forced, in_method);
        if let Target::Routine(r) = target {
            cf.routine = r.name.clone();
        }
        let mut env = None;
        if let Target::Method { recv, .. } = target {
            let e = self.record_env(*recv).ok_or(StoreError::NotResolved(*recv))?;
            self.load_env(&mut cf, &e)?;
            cf.scopes.push(HashMap::new());
            cf.params = 1;
            env = Some(e);
        }
        for (p, a) in params.group(Group::In).iter().zip(ins) {
            let slot = match a {
                InArg::Value(v) => Slot::Val(coerce(v, scalar_of(p), p.name())?),
                InArg::Region(v) => Slot::Array(View { del: p.del, writable: false, ..v }),
                InArg::Record { id, .. } => Slot::Record { id: Some(id), def: p.ty.to_string(), del: p.del },
                InArg::Handle { .. } => unreachable!("checked available"),
            };
            cf.declare(p.name(), slot);
        }
        let outer: Vec<&Param> = params.group(Group::InOut).iter().chain(params.group(Group::Out)).collect();
        for (p, (g, o)) in outer.iter().zip(&outs) {
            let slot = match o {
                OutArg::Var { name, .. } if *g == Group::InOut => {
                    Slot::Val(coerce(self.read_name(f, name)?, scalar_of(p), p.name())?)
                }
                OutArg::Elem { loc, .. } if *g == Group::InOut => {
                    Slot::Val(coerce(self.read_loc_checked(*loc)?, scalar_of(p), p.name())?)
                }
                OutArg::Var { .. } | OutArg::Elem { .. } => Slot::Unset(scalar_of(p)),
                OutArg::Region(v) => Slot::Array(View { del: p.del, writable: true, ..*v }),
                OutArg::Record { id: Some(id), def, .. } => Slot::Record { id: Some(*id), def: def.clone(), del: p.del },
                OutArg::Record { name, def, .. } => {
                    let id = self.new_record(f, name, def);
                    Slot::Record { id: Some(id), def: def.clone(), del: p.del }
                }
            };
            cf.declare(p.name(), slot);
        }

        self.run_body(&mut cf, target.body(), params)?;
        if let (Target::Method { recv, .. }, Some(e)) = (target, env) {
            self.save_env(&cf, *recv, &e)?;
        }

        for (p, (_, o)) in outer.iter().zip(outs) {
            let fin = cf.param(p.name()).cloned();
            let missing = || EvalError::MissingOut { routine: cf.routine.clone(), out: p.name().to_string() };
            match o {
                OutArg::Var { name, ty, .. } => match fin {
                    Some(Slot::Val(v)) => f.set(&name, Slot::Val(coerce(v, ty, &name)?)),
                    Some(Slot::Handle { loc, del: false, .. }) => f.set(&name, Slot::Handle { loc, ty, del: false }),
                    _ => return Err(missing()),
                },
                OutArg::Elem { loc, ty, .. } => match fin {
                    Some(Slot::Val(v)) => self.resolve_target(loc, coerce(v, ty, p.name())?)?,
                    Some(Slot::Handle { loc: h, .. }) => self.forward_to(h, loc, ty)?,
                    _ => return Err(missing()),
                },
                OutArg::Region(_) | OutArg::Record { .. } => {}
            }
        }
        self.depth -= 1;
        Ok(())
    }

    fn delegate(&mut self, f: &mut Frame, target: &Target, ins: Vec<InArg>, outs: Vec<(Group, OutArg)>) -> Result<(), EvalError> {
        let params = target.params();
        let mut args = Vec::with_capacity(params.len());
        for (p, a) in params.group(Group::In).iter().zip(ins) {
            let binding = match a {
                InArg::Value(v) => Binding::Value(coerce(v, scalar_of(p), p.name())?),
                InArg::Handle { loc, .. } => Binding::Read(loc),
                InArg::Region(v) => Binding::Array { region: v.region(), mode: AccessMode::Read },
                InArg::Record { id, .. } => Binding::Record(id),
            };
            args.push(Arg { binding, del: p.del });
        }
        let outer: Vec<&Param> = params.group(Group::InOut).iter().chain(params.group(Group::Out)).collect();
        for (p, (g, o)) in outer.into_iter().zip(outs) {
            let inout = g == Group::InOut;
            let binding = match o {
                OutArg::Var { name, ty, .. } => {
                    let input = if inout {
                        Some(match f.get(&name) {
                            Some(Slot::Val(v)) => Source::Value(*v),
                            Some(Slot::Handle { loc, ty: t, del }) => {
                                if !*del && self.loc_available(*loc) {
                                    Source::Value(coerce(self.read_loc_checked(*loc)?, *t, &name)?)
                                } else {
                                    Source::Loc(*loc)
                                }
                            }
                            _ => return Err(EvalError::ReadOfUnresolved(name.clone())),
                        })
                    } else {
                        None
                    };
                    let x = self.fresh_scalar(ty);
                    f.set(&name, Slot::Handle { loc: Loc::Item(x), ty, del: false });
                    match input {
                        Some(input) => Binding::Update { input, output: Loc::Item(x) },
                        None => Binding::Write(Loc::Item(x)),
                    }
                }
                OutArg::Elem { loc, .. } if inout => Binding::Update { input: Source::Loc(loc), output: loc },
                OutArg::Elem { loc, .. } => Binding::Write(loc),
                OutArg::Region(v) => Binding::Array {
                    region: v.region(),
                    mode: if inout { AccessMode::ReadWrite } else { AccessMode::Write },
                },
                OutArg::Record { id: Some(id), .. } if inout => Binding::Record(id),
                OutArg::Record { name, .. } if inout => return Err(EvalError::ReadOfUnresolved(name)),
                OutArg::Record { id: Some(id), .. } => Binding::Write(Loc::Item(id)),
                OutArg::Record { name, def, .. } => Binding::Write(Loc::Item(self.new_record(f, &name, &def))),
            };
            args.push(Arg { binding, del: p.del });
        }
        let (callee, receiver) = match target {
            Target::Routine(r) => (Callee::Routine(r.name.clone()), None),
            Target::Method { recv, def, .. } => {
                (Callee::Method { record: def.record.clone(), method: def.name.clone() }, Some(*recv))
            }
        };
        let (a, b, c) = params.arities();
        self.emit(ChildSpec { callee, receiver, args, arity: [a, b, c] });
        Ok(())
    }
}
