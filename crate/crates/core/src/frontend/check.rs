//! Semantic checks turning a parsed [`Program`] into a [`CheckedProgram`].
//!
//! Besides name, arity and type checks this pass enforces the delegation
//! rule (a `del` parameter is only ever forwarded as a call argument) and
//! computes which calls must be evaluated in place because a later
//! statement reads a value they produce.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use super::ast::*;
use super::diag::{DiagCode, Diagnostic, Span};
use crate::value::{BaseType, ScalarType};

/// A record method with names from its implementation and types from the
/// record declaration.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodDef {
    pub record: String,
    pub name: String,
    pub params: Params,
    pub body: Block,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecordDef {
    pub name: String,
    /// Signatures in declaration order.
    pub signatures: Vec<MethodSig>,
    pub methods: BTreeMap<String, MethodDef>,
    /// Routine whose body implements the methods.
    pub constructor: String,
    /// Name of the constructor's record out parameter.
    pub receiver: String,
}

/// A program that passed [`check`]. The runtime relies on its invariants:
/// every call resolves, arities match, and `del` items are never read.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckedProgram {
    pub routines: BTreeMap<String, RoutineDef>,
    pub records: BTreeMap<String, RecordDef>,
    /// `main` when defined.
    pub entry: Option<String>,
}

impl CheckedProgram {
    pub fn routine(&self, name: &str) -> Option<&RoutineDef> {
        self.routines.get(name)
    }

    pub fn method(&self, record: &str, method: &str) -> Option<&MethodDef> {
        self.records.get(record)?.methods.get(method)
    }

    /// Record whose methods are implemented by routine `name`, with the
    /// receiver parameter name.
    pub fn constructed_record(&self, routine: &str) -> Option<&RecordDef> {
        self.records.values().find(|r| r.constructor == routine)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Kind {
    Scalar(ScalarType),
    Array(ScalarType),
    Record(String),
}

#[derive(Debug, Clone)]
struct Var {
    kind: Kind,
    group: Option<Group>,
    del: bool,
}

/// Static expression type.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Ty {
    Int,
    Real,
    Bool,
}

impl From<ScalarType> for Ty {
    fn from(s: ScalarType) -> Self {
        match s {
            ScalarType::Int => Ty::Int,
            ScalarType::Real => Ty::Real,
        }
    }
}

fn kind_of(param: &Param) -> Kind {
    match (&param.ty, param.is_array()) {
        (BaseType::Record(r), _) => Kind::Record(r.clone()),
        (t, true) => Kind::Array(t.scalar().expect("scalar")),
        (t, false) => Kind::Scalar(t.scalar().expect("scalar")),
    }
}

pub fn check(program: Program) -> Result<CheckedProgram, Vec<Diagnostic>> {
    let mut cx = Checker::default();
    let result = cx.run(program);
    if cx.diags.is_empty() {
        Ok(result)
    } else {
        cx.diags.sort_by_key(|d| d.span);
        Err(cx.diags)
    }
}

#[derive(Default)]
struct Checker {
    diags: Vec<Diagnostic>,
    /// record name → declaration
    records: BTreeMap<String, RecordDecl>,
    /// routine name → signature (definition or prototype)
    sigs: BTreeMap<String, Params>,
    /// (record, method) → implementation found so far
    impls: BTreeMap<(String, String), (String, MethodDef, Span)>,
}

/// Per-body state for the forward walk.
struct BodyCx<'a> {
    routine: &'a str,
    scopes: Vec<HashMap<String, Var>>,
    /// Out params not yet definitely produced.
    outs: Vec<String>,
    in_method: bool,
}

impl BodyCx<'_> {
    fn lookup(&self, name: &str) -> Option<&Var> {
        self.scopes.iter().rev().find_map(|s| s.get(name))
    }

    fn declare(&mut self, name: &str, var: Var) -> bool {
        self.scopes.last_mut().expect("scope").insert(name.to_string(), var).is_none()
    }
}

/// Flow state: out params produced so far, or `None` once every path has
/// returned.
type Flow = Option<BTreeSet<String>>;

impl Checker {
    fn err(&mut self, code: DiagCode, span: Span, msg: impl Into<String>) {
        self.diags.push(Diagnostic::new(code, span, msg));
    }

    fn run(&mut self, program: Program) -> CheckedProgram {
        let mut defs: BTreeMap<String, RoutineDef> = BTreeMap::new();
        let mut protos: Vec<RoutineDef> = Vec::new();
        for item in program.items {
            match item {
                Item::Record(r) => {
                    if self.records.contains_key(&r.name) {
                        self.err(DiagCode::DuplicateDefinition, r.pos.0, format!("record `{}` defined twice", r.name));
                    } else {
                        self.records.insert(r.name.clone(), r);
                    }
                }
                Item::Routine(r) if r.body.is_none() => protos.push(r),
                Item::Routine(r) => {
                    if defs.contains_key(&r.name) {
                        self.err(DiagCode::DuplicateDefinition, r.pos.0, format!("routine `{}` defined twice", r.name));
                    } else if Builtin::lookup(&r.name).is_some() {
                        self.err(DiagCode::DuplicateDefinition, r.pos.0, format!("`{}` is a builtin", r.name));
                    } else {
                        defs.insert(r.name.clone(), r);
                    }
                }
            }
        }
        for p in &protos {
            match defs.get(&p.name) {
                None => self.err(
                    DiagCode::UndefinedName,
                    p.pos.0,
                    format!("routine `{}` is declared but never defined", p.name),
                ),
                Some(d) => {
                    if !same_signature(&d.params, &p.params) {
                        self.err(
                            DiagCode::ArityMismatch,
                            p.pos.0,
                            format!("declaration of `{}` does not match its definition", p.name),
                        );
                    }
                }
            }
        }
        let record_decls: Vec<RecordDecl> = self.records.values().cloned().collect();
        for r in &record_decls {
            let mut seen = HashSet::new();
            for m in &r.methods {
                if !seen.insert(m.name.clone()) {
                    self.err(DiagCode::DuplicateDefinition, m.pos.0, format!("method `{}` declared twice", m.name));
                }
                self.check_params(&m.params);
            }
        }
        for d in defs.values() {
            self.sigs.insert(d.name.clone(), d.params.clone());
        }
        let names: Vec<String> = defs.keys().cloned().collect();
        for name in &names {
            let mut def = defs.remove(name).expect("present");
            self.check_params(&def.params);
            self.check_routine(&mut def);
            defs.insert(name.clone(), def);
        }

        let mut records = BTreeMap::new();
        for r in record_decls {
            let mut methods = BTreeMap::new();
            let mut constructor: Option<(String, String)> = None;
            for sig in &r.methods {
                match self.impls.remove(&(r.name.clone(), sig.name.clone())) {
                    None => self.err(
                        DiagCode::UndefinedName,
                        sig.pos.0,
                        format!("method `{}.{}` has no implementation", r.name, sig.name),
                    ),
                    Some((ctor, m, span)) => {
                        let receiver = defs
                            .get(&ctor)
                            .and_then(|d| {
                                d.params
                                    .group(Group::Out)
                                    .iter()
                                    .find(|p| p.ty == BaseType::Record(r.name.clone()))
                            })
                            .map(|p| p.name().to_string())
                            .unwrap_or_default();
                        match &constructor {
                            Some((c, _)) if *c != ctor => self.err(
                                DiagCode::DuplicateDefinition,
                                span,
                                format!("record `{}` has methods in both `{c}` and `{ctor}`", r.name),
                            ),
                            _ => constructor = Some((ctor, receiver)),
                        }
                        methods.insert(sig.name.clone(), m);
                    }
                }
            }
            let (constructor, receiver) = constructor.unwrap_or_default();
            records.insert(
                r.name.clone(),
                RecordDef { name: r.name.clone(), signatures: r.methods, methods, constructor, receiver },
            );
        }
        let entry = defs.contains_key("main").then(|| "main".to_string());
        CheckedProgram { routines: defs, records, entry }
    }

    fn check_params(&mut self, params: &Params) {
        let mut seen = HashSet::new();
        let ins: HashMap<&str, &Param> =
            params.group(Group::In).iter().filter_map(|p| p.name.as_deref().map(|n| (n, p))).collect();
        for (_, p) in params.iter() {
            if let Some(n) = &p.name {
                if !seen.insert(n.clone()) {
                    self.err(DiagCode::DuplicateDefinition, p.pos.0, format!("parameter `{n}` appears twice"));
                }
            }
            if let BaseType::Record(r) = &p.ty {
                if !self.records.contains_key(r) {
                    self.err(DiagCode::UndefinedName, p.pos.0, format!("unknown type `{r}`"));
                }
                if p.is_array() {
                    self.err(DiagCode::Unsupported, p.pos.0, "arrays of records are not supported");
                }
            }
            if let Some(len) = &p.len {
                let mut bad = Vec::new();
                len.walk_names(&mut |n| match ins.get(n) {
                    Some(q) if !q.del && !q.is_array() && q.ty == BaseType::Int => {}
                    _ => bad.push(n.to_string()),
                });
                for n in bad {
                    self.err(
                        DiagCode::UndefinedName,
                        len.span(),
                        format!("array length may only use int in-parameters; `{n}` is not one"),
                    );
                }
            }
        }
    }

    fn check_routine(&mut self, def: &mut RoutineDef) {
        let mut params_scope = HashMap::new();
        for (g, p) in def.params.iter() {
            params_scope.insert(p.name().to_string(), Var { kind: kind_of(p), group: Some(g), del: p.del });
        }
        let record_outs: Vec<String> = def
            .params
            .group(Group::Out)
            .iter()
            .filter(|p| matches!(p.ty, BaseType::Record(_)))
            .map(|p| p.name().to_string())
            .collect();
        let mut bcx = BodyCx {
            routine: &def.name,
            scopes: vec![params_scope],
            outs: def.params.group(Group::Out).iter().map(|p| p.name().to_string()).collect(),
            in_method: false,
        };
        let body = def.body.as_mut().expect("definition has a body");
        // A constructor produces its record outs implicitly.
        let implemented: BTreeSet<String> = body
            .stmts
            .iter()
            .filter_map(|s| match &s.kind {
                StmtKind::MethodImpl(m) if record_outs.contains(&m.receiver) => Some(m.receiver.clone()),
                _ => None,
            })
            .collect();
        let start: BTreeSet<String> = implemented.into_iter().collect();
        let flow = self.block(&mut bcx, body, Some(start), true);
        if let Some(done) = flow {
            self.check_outs(&bcx, &done, def.pos.0, "at end of body");
        }
        let dels: HashSet<String> =
            def.params.iter().filter(|(_, p)| p.del).map(|(_, p)| p.name().to_string()).collect();
        let mut needed = HashSet::new();
        self.mark_inline_block(body, &mut needed, &dels);
    }

    fn check_outs(&mut self, bcx: &BodyCx, done: &BTreeSet<String>, span: Span, when: &str) {
        for o in &bcx.outs {
            if !done.contains(o) {
                self.err(
                    DiagCode::OutNeverProduced,
                    span,
                    format!("out `{o}` of `{}` is not produced {when}", bcx.routine),
                );
            }
        }
    }

    fn block(&mut self, bcx: &mut BodyCx, block: &mut Block, flow: Flow, top: bool) -> Flow {
        if !top {
            bcx.scopes.push(HashMap::new());
        }
        let mut flow = flow;
        for stmt in &mut block.stmts {
            if flow.is_none() {
                // unreachable code still gets checked, against an empty state
                flow = Some(BTreeSet::new());
                let f = self.stmt(bcx, stmt, flow.take().expect("set"), top);
                let _ = f;
                flow = None;
                continue;
            }
            flow = self.stmt(bcx, stmt, flow.expect("live"), top);
        }
        if !top {
            bcx.scopes.pop();
        }
        flow
    }

    fn stmt(&mut self, bcx: &mut BodyCx, stmt: &mut Stmt, mut done: BTreeSet<String>, top: bool) -> Flow {
        let span = stmt.pos.0;
        match &mut stmt.kind {
            StmtKind::Decl { ty, decls } => {
                if let BaseType::Record(r) = ty {
                    if !self.records.contains_key(r.as_str()) {
                        self.err(DiagCode::UndefinedName, span, format!("unknown type `{r}`"));
                    }
                }
                for d in decls.iter() {
                    if let Some((lo, hi)) = &d.dims {
                        if let Some(lo) = lo {
                            self.int_expr(bcx, lo);
                        }
                        self.int_expr(bcx, hi);
                    }
                    let kind = match (&*ty, d.dims.is_some()) {
                        (BaseType::Record(r), false) => Kind::Record(r.clone()),
                        (BaseType::Record(_), true) => {
                            self.err(DiagCode::Unsupported, d.pos.0, "arrays of records are not supported");
                            continue;
                        }
                        (t, true) => Kind::Array(t.scalar().expect("scalar")),
                        (t, false) => Kind::Scalar(t.scalar().expect("scalar")),
                    };
                    if let Some(init) = &d.init {
                        match &kind {
                            Kind::Scalar(st) => {
                                let t = self.value_expr(bcx, init);
                                self.assignable(*st, t, init.span());
                            }
                            _ => self.err(DiagCode::TypeMismatch, d.pos.0, "only scalars take initializers"),
                        }
                    }
                    if !bcx.declare(&d.name, Var { kind, group: None, del: false }) {
                        self.err(DiagCode::DuplicateDefinition, d.pos.0, format!("`{}` declared twice", d.name));
                    }
                }
                Some(done)
            }
            StmtKind::Assign { target, value } => {
                let vt = self.value_expr(bcx, value);
                match target {
                    LValue::Name(n) => match bcx.lookup(n).cloned() {
                        None => self.err(DiagCode::UndefinedName, span, format!("undefined name `{n}`")),
                        Some(v) if v.del => self.err(
                            DiagCode::DelItemAccessed,
                            span,
                            format!("delegated item `{n}` may only be forwarded"),
                        ),
                        Some(Var { kind: Kind::Scalar(st), group, .. }) => {
                            self.assignable(st, vt, value.span());
                            if group == Some(Group::Out) {
                                done.insert(n.clone());
                            }
                        }
                        Some(_) => self.err(DiagCode::TypeMismatch, span, format!("`{n}` is not a scalar")),
                    },
                    LValue::Index { base, index } => {
                        self.int_expr(bcx, index);
                        match bcx.lookup(base).cloned() {
                            None => self.err(DiagCode::UndefinedName, span, format!("undefined name `{base}`")),
                            Some(v) if v.del => self.err(
                                DiagCode::DelItemAccessed,
                                span,
                                format!("delegated item `{base}` may only be forwarded"),
                            ),
                            Some(Var { kind: Kind::Array(st), group, .. }) => {
                                if group == Some(Group::In) {
                                    self.err(DiagCode::NotAssignable, span, format!("in-parameter `{base}` is read-only"));
                                }
                                self.assignable(st, vt, value.span());
                                if group == Some(Group::Out) {
                                    done.insert(base.clone());
                                }
                            }
                            Some(_) => self.err(DiagCode::TypeMismatch, span, format!("`{base}` is not an array")),
                        }
                    }
                }
                Some(done)
            }
            StmtKind::Call(call) => {
                self.call(bcx, call, &mut done);
                Some(done)
            }
            StmtKind::If { cond, then, els } => {
                let ct = self.value_expr_inner(bcx, cond, true);
                if ct != Some(Ty::Bool) {
                    self.err(DiagCode::TypeMismatch, cond.span(), "condition must be a comparison");
                }
                let a = self.branch(bcx, then, done.clone());
                let b = match els {
                    Some(e) => self.branch(bcx, e, done.clone()),
                    None => Some(done),
                };
                match (a, b) {
                    (None, None) => None,
                    (Some(x), None) | (None, Some(x)) => Some(x),
                    (Some(x), Some(y)) => Some(x.intersection(&y).cloned().collect()),
                }
            }
            StmtKind::Return => {
                self.check_outs(bcx, &done, span, "on this return path");
                None
            }
            StmtKind::Block(b) => self.block(bcx, b, Some(done), false),
            StmtKind::MethodImpl(m) => {
                if !top || bcx.in_method {
                    self.err(DiagCode::Unsupported, span, "method implementations belong at the top of a constructor body");
                    return Some(done);
                }
                self.method_impl(bcx, m, span);
                Some(done)
            }
            StmtKind::Expr(e) => {
                if !matches!(e.kind, ExprKind::Step { .. }) {
                    self.err(DiagCode::SyntaxError, span, "expression statement has no effect");
                }
                self.value_expr(bcx, e);
                Some(done)
            }
        }
    }

    /// A branch of an `if` gets its own scope, so implicit locals declared
    /// inside it stay local to it.
    fn branch(&mut self, bcx: &mut BodyCx, stmt: &mut Stmt, done: BTreeSet<String>) -> Flow {
        bcx.scopes.push(HashMap::new());
        let f = self.stmt(bcx, stmt, done, false);
        bcx.scopes.pop();
        f
    }

    fn method_impl(&mut self, bcx: &mut BodyCx, m: &mut MethodImpl, span: Span) {
        let record = match bcx.lookup(&m.receiver) {
            Some(Var { kind: Kind::Record(r), group: Some(Group::Out), .. }) => r.clone(),
            _ => {
                self.err(
                    DiagCode::TypeMismatch,
                    span,
                    format!("`{}` is not a record out-parameter of `{}`", m.receiver, bcx.routine),
                );
                return;
            }
        };
        let Some(sig) = self.records.get(&record).and_then(|r| r.methods.iter().find(|s| s.name == m.method)).cloned()
        else {
            self.err(DiagCode::UndefinedName, span, format!("record `{record}` has no method `{}`", m.method));
            return;
        };
        let want = sig.params.arities();
        let got = (m.params[0].len(), m.params[1].len(), m.params[2].len());
        if want != got {
            self.err(
                DiagCode::ArityMismatch,
                span,
                format!("`{record}.{}` takes groups {want:?}, implementation has {got:?}", m.method),
            );
            return;
        }
        let mut params = sig.params.clone();
        let mut scope = HashMap::new();
        for g in Group::ALL {
            for (p, name) in params.groups[g.index()].iter_mut().zip(&m.params[g.index()]) {
                p.name = Some(name.clone());
                if scope
                    .insert(name.clone(), Var { kind: kind_of(p), group: Some(g), del: p.del })
                    .is_some()
                {
                    self.err(DiagCode::DuplicateDefinition, span, format!("parameter `{name}` appears twice"));
                }
            }
        }
        // Constructor locals are visible; constructor params other than ins
        // are not part of the instance.
        let mut visible: HashMap<String, Var> = HashMap::new();
        for s in &bcx.scopes {
            for (k, v) in s {
                if matches!(v.group, None | Some(Group::In)) {
                    visible.insert(k.clone(), Var { group: None, ..v.clone() });
                }
            }
        }
        let mut mcx = BodyCx {
            routine: bcx.routine,
            scopes: vec![visible, scope],
            outs: params.group(Group::Out).iter().map(|p| p.name().to_string()).collect(),
            in_method: true,
        };
        // Method outs may be left unset on error paths (a pop from an empty
        // stack only sets its error flag); the runtime reports the ones
        // actually missing.
        self.block(&mut mcx, &mut m.body, Some(BTreeSet::new()), false);
        let key = (record.clone(), m.method.clone());
        if self.impls.contains_key(&key) {
            self.err(DiagCode::DuplicateDefinition, span, format!("`{record}.{}` implemented twice", m.method));
            return;
        }
        let def = MethodDef { record, name: m.method.clone(), params, body: m.body.clone() };
        self.impls.insert(key, (bcx.routine.to_string(), def, span));
    }

    fn call(&mut self, bcx: &mut BodyCx, call: &mut Call, done: &mut BTreeSet<String>) {
        let span = call.pos.0;
        let params = match &call.receiver {
            Some(recv) => {
                if bcx.in_method {
                    self.err(DiagCode::Unsupported, span, "method calls inside method bodies are not supported");
                }
                let rec = match bcx.lookup(recv).cloned() {
                    None => {
                        self.err(DiagCode::UndefinedName, span, format!("undefined name `{recv}`"));
                        return assume_outs(call, done);
                    }
                    Some(Var { kind: Kind::Record(r), .. }) => r,
                    Some(_) => {
                        self.err(DiagCode::TypeMismatch, span, format!("`{recv}` is not a record"));
                        return assume_outs(call, done);
                    }
                };
                match self.records.get(&rec).and_then(|r| r.methods.iter().find(|m| m.name == call.callee)) {
                    Some(sig) => sig.params.clone(),
                    None => {
                        self.err(
                            DiagCode::UndefinedName,
                            span,
                            format!("record `{rec}` has no method `{}`", call.callee),
                        );
                        return assume_outs(call, done);
                    }
                }
            }
            None => match self.sigs.get(&call.callee) {
                Some(p) => p.clone(),
                None => {
                    self.err(DiagCode::UndefinedName, span, format!("undefined routine `{}`", call.callee));
                    return assume_outs(call, done);
                }
            },
        };
        let want = params.arities();
        let got = (call.args[0].len(), call.args[1].len(), call.args[2].len());
        if want != got {
            self.err(
                DiagCode::ArityMismatch,
                span,
                format!("`{}` takes groups {want:?}, call passes {got:?}", call.callee),
            );
            return assume_outs(call, done);
        }
        for g in Group::ALL {
            for (arg, param) in call.args[g.index()].iter().zip(params.group(g)) {
                self.arg(bcx, arg, param, g, done);
            }
        }
    }

    fn arg(&mut self, bcx: &mut BodyCx, arg: &Expr, param: &Param, g: Group, done: &mut BTreeSet<String>) {
        let span = arg.span();
        let pkind = kind_of(param);
        // Location arguments: `x`, `a(i)`, `a[lo:hi]`.
        let loc = match &arg.kind {
            ExprKind::Name(n) => Some((n.clone(), None::<()>)),
            ExprKind::Index { base, index } => {
                self.int_expr(bcx, index);
                Some((base.clone(), Some(())))
            }
            ExprKind::Range { base, lo, hi } => {
                self.int_expr(bcx, lo);
                self.int_expr(bcx, hi);
                Some((base.clone(), Some(())))
            }
            _ => None,
        };
        let Some((base, indexed)) = loc else {
            if g != Group::In {
                self.err(DiagCode::NotAssignable, span, "inout and out arguments must be names or array locations");
                return;
            }
            match pkind {
                Kind::Scalar(st) => {
                    let t = self.value_expr(bcx, arg);
                    self.assignable(st, t, span);
                }
                _ => self.err(DiagCode::TypeMismatch, span, format!("`{}` expects an array or record", param.name())),
            }
            return;
        };
        let var = match bcx.lookup(&base).cloned() {
            Some(v) => v,
            None if g == Group::Out && indexed.is_none() && matches!(pkind, Kind::Array(_)) => {
                self.err(DiagCode::Unsupported, span, format!("array `{base}` must be declared before it is produced"));
                return;
            }
            None if g == Group::Out && indexed.is_none() => {
                // implicit local typed from the callee's out
                bcx.declare(&base, Var { kind: pkind.clone(), group: None, del: false });
                return;
            }
            None => {
                self.err(DiagCode::UndefinedName, span, format!("undefined name `{base}`"));
                return;
            }
        };
        if g != Group::In {
            if var.group == Some(Group::In) && matches!(var.kind, Kind::Array(_)) {
                self.err(DiagCode::NotAssignable, span, format!("in-parameter `{base}` is read-only"));
            }
            if var.group == Some(Group::Out) {
                done.insert(base.clone());
            }
        }
        match (&pkind, &var.kind, indexed.is_some()) {
            (Kind::Scalar(pt), Kind::Scalar(vt), false) => {
                if g == Group::In {
                    self.assignable(*pt, Some((*vt).into()), span);
                } else {
                    // values flow both ways for inouts
                    self.assignable(*vt, Some((*pt).into()), span);
                    if g == Group::InOut {
                        self.assignable(*pt, Some((*vt).into()), span);
                    }
                }
            }
            (Kind::Scalar(pt), Kind::Array(vt), _) | (Kind::Array(pt), Kind::Array(vt), _) => {
                if pt != vt {
                    self.err(DiagCode::TypeMismatch, span, format!("`{base}` holds {vt}, `{}` expects {pt}", param.name()));
                }
            }
            (Kind::Record(pr), Kind::Record(vr), false) if pr == vr => {}
            _ => self.err(
                DiagCode::TypeMismatch,
                span,
                format!("argument `{base}` does not fit parameter `{}`", param.name()),
            ),
        }
    }

    fn assignable(&mut self, target: ScalarType, value: Option<Ty>, span: Span) {
        match (target, value) {
            (_, None) => {}
            (ScalarType::Int, Some(Ty::Int)) | (ScalarType::Real, Some(Ty::Int | Ty::Real)) => {}
            (ScalarType::Int, Some(Ty::Real)) => {
                self.err(DiagCode::TypeMismatch, span, "real value where an int is required")
            }
            (_, Some(Ty::Bool)) => self.err(DiagCode::TypeMismatch, span, "comparisons are only allowed in `if`"),
        }
    }

    fn int_expr(&mut self, bcx: &BodyCx, e: &Expr) {
        match self.value_expr(bcx, e) {
            Some(Ty::Int) | None => {}
            Some(_) => self.err(DiagCode::TypeMismatch, e.span(), "index must be an int"),
        }
    }

    fn value_expr(&mut self, bcx: &BodyCx, e: &Expr) -> Option<Ty> {
        self.value_expr_inner(bcx, e, false)
    }

    /// Type of a value expression; `None` after an error was reported.
    fn value_expr_inner(&mut self, bcx: &BodyCx, e: &Expr, allow_cmp: bool) -> Option<Ty> {
        let span = e.span();
        match &e.kind {
            ExprKind::Int(_) => Some(Ty::Int),
            ExprKind::Real(_) => Some(Ty::Real),
            ExprKind::Name(n) | ExprKind::Step { name: n, .. } => {
                let is_step = matches!(e.kind, ExprKind::Step { .. });
                match bcx.lookup(n) {
                    None => {
                        self.err(DiagCode::UndefinedName, span, format!("undefined name `{n}`"));
                        None
                    }
                    Some(v) if v.del => {
                        self.err(DiagCode::DelItemAccessed, span, format!("delegated item `{n}` may only be forwarded"));
                        None
                    }
                    Some(Var { kind: Kind::Scalar(st), .. }) => {
                        if is_step && *st != ScalarType::Int {
                            self.err(DiagCode::TypeMismatch, span, "++/-- apply to ints only");
                        }
                        Some((*st).into())
                    }
                    Some(_) => {
                        self.err(DiagCode::TypeMismatch, span, format!("`{n}` is not a scalar"));
                        None
                    }
                }
            }
            ExprKind::Index { base, index } => {
                self.int_expr(bcx, index);
                match bcx.lookup(base) {
                    None => {
                        self.err(DiagCode::UndefinedName, span, format!("undefined name `{base}`"));
                        None
                    }
                    Some(v) if v.del => {
                        self.err(DiagCode::DelItemAccessed, span, format!("delegated item `{base}` may only be forwarded"));
                        None
                    }
                    Some(Var { kind: Kind::Array(st), .. }) => Some((*st).into()),
                    Some(_) => {
                        self.err(DiagCode::TypeMismatch, span, format!("`{base}` is not an array"));
                        None
                    }
                }
            }
            ExprKind::Range { .. } => {
                self.err(DiagCode::TypeMismatch, span, "ranges are only allowed as call arguments");
                None
            }
            ExprKind::ArrayLit(_) => {
                self.err(DiagCode::Unsupported, span, "array literals are only allowed in entry calls");
                None
            }
            ExprKind::Neg(inner) | ExprKind::Builtin { arg: inner, .. } => match self.value_expr(bcx, inner) {
                Some(Ty::Bool) => {
                    self.err(DiagCode::TypeMismatch, span, "comparisons are only allowed in `if`");
                    None
                }
                t => t,
            },
            ExprKind::Binary { op, lhs, rhs } => {
                let l = self.value_expr(bcx, lhs);
                let r = self.value_expr(bcx, rhs);
                if l == Some(Ty::Bool) || r == Some(Ty::Bool) {
                    self.err(DiagCode::TypeMismatch, span, "comparisons are only allowed in `if`");
                    return None;
                }
                if op.is_comparison() {
                    if !allow_cmp {
                        self.err(DiagCode::TypeMismatch, span, "comparisons are only allowed in `if`");
                        return None;
                    }
                    return Some(Ty::Bool);
                }
                let (l, r) = (l?, r?);
                if *op == BinOp::Rem && (l != Ty::Int || r != Ty::Int) {
                    self.err(DiagCode::TypeMismatch, span, "`%` applies to ints only");
                    return None;
                }
                Some(if l == Ty::Real || r == Ty::Real { Ty::Real } else { Ty::Int })
            }
        }
    }

    // ---- must-inline analysis -------------------------------------------------
    //
    // Walk statements backwards tracking names whose current value is read
    // directly later. A call that writes such a name cannot be handed to
    // the pool: its result is needed inside this body.

    fn mark_inline_block(&mut self, block: &mut Block, needed: &mut HashSet<String>, dels: &HashSet<String>) {
        for stmt in block.stmts.iter_mut().rev() {
            self.mark_inline_stmt(stmt, needed, dels);
        }
    }

    fn mark_inline_stmt(&mut self, stmt: &mut Stmt, needed: &mut HashSet<String>, dels: &HashSet<String>) {
        let span = stmt.pos.0;
        match &mut stmt.kind {
            StmtKind::Decl { decls, .. } => {
                for d in decls.iter().rev() {
                    needed.remove(&d.name);
                    if let Some(i) = &d.init {
                        i.walk_names(&mut |n| {
                            needed.insert(n.to_string());
                        });
                    }
                    if let Some((lo, hi)) = &d.dims {
                        if let Some(lo) = lo {
                            lo.walk_names(&mut |n| {
                                needed.insert(n.to_string());
                            });
                        }
                        hi.walk_names(&mut |n| {
                            needed.insert(n.to_string());
                        });
                    }
                }
            }
            StmtKind::Assign { target, value } => {
                match target {
                    LValue::Name(n) => {
                        needed.remove(n.as_str());
                    }
                    LValue::Index { base, index } => {
                        needed.insert(base.clone());
                        index.walk_names(&mut |n| {
                            needed.insert(n.to_string());
                        });
                    }
                }
                value.walk_names(&mut |n| {
                    needed.insert(n.to_string());
                });
            }
            StmtKind::Call(call) => {
                let writes: Vec<&str> = call
                    .args[1]
                    .iter()
                    .chain(&call.args[2])
                    .filter_map(Expr::location_base)
                    .chain(call.receiver.as_deref())
                    .collect();
                let must = writes.iter().any(|w| needed.contains(*w));
                if must {
                    call.must_inline = true;
                    let touches_del = call
                        .iter_args()
                        .filter_map(|(_, e)| e.location_base())
                        .chain(call.receiver.as_deref())
                        .any(|n| dels.contains(n));
                    if touches_del {
                        self.err(
                            DiagCode::DelItemAccessed,
                            span,
                            format!("a result of `{}` is read later, but the call forwards a delegated item", call.callee),
                        );
                    }
                    for (_, e) in call.iter_args() {
                        e.walk_names(&mut |n| {
                            needed.insert(n.to_string());
                        });
                    }
                    if let Some(r) = &call.receiver {
                        needed.insert(r.clone());
                    }
                } else {
                    for (_, e) in call.iter_args() {
                        match &e.kind {
                            ExprKind::Name(_) => {}
                            ExprKind::Index { index, .. } => index.walk_names(&mut |n| {
                                needed.insert(n.to_string());
                            }),
                            ExprKind::Range { lo, hi, .. } => {
                                lo.walk_names(&mut |n| {
                                    needed.insert(n.to_string());
                                });
                                hi.walk_names(&mut |n| {
                                    needed.insert(n.to_string());
                                });
                            }
                            _ => e.walk_names(&mut |n| {
                                needed.insert(n.to_string());
                            }),
                        }
                    }
                }
            }
            StmtKind::If { cond, then, els } => {
                let mut a = needed.clone();
                self.mark_inline_stmt(then, &mut a, dels);
                let mut b = needed.clone();
                if let Some(e) = els {
                    self.mark_inline_stmt(e, &mut b, dels);
                }
                *needed = a.union(&b).cloned().collect();
                cond.walk_names(&mut |n| {
                    needed.insert(n.to_string());
                });
            }
            StmtKind::Return => needed.clear(),
            StmtKind::Block(b) => self.mark_inline_block(b, needed, dels),
            StmtKind::MethodImpl(_) => {}
            StmtKind::Expr(e) => e.walk_names(&mut |n| {
                needed.insert(n.to_string());
            }),
        }
    }
}

/// After an error in a call, treat its location arguments as produced so
/// one mistake does not also report every out it would have set.
fn assume_outs(call: &Call, done: &mut BTreeSet<String>) {
    for e in call.args[1].iter().chain(&call.args[2]) {
        if let Some(n) = e.location_base() {
            done.insert(n.to_string());
        }
    }
}

fn same_signature(a: &Params, b: &Params) -> bool {
    a.arities() == b.arities()
        && a.iter().zip(b.iter()).all(|((_, p), (_, q))| p.ty == q.ty && p.del == q.del && p.is_array() == q.is_array())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::{lexer::tokenize, parser::parse};

    fn check_src(src: &str) -> Result<CheckedProgram, Vec<Diagnostic>> {
        check(parse(tokenize(src).unwrap()).unwrap())
    }

    fn codes(src: &str) -> Vec<DiagCode> {
        check_src(src).unwrap_err().into_iter().map(|d| d.code).collect()
    }

    const FIB: &str = include_str!("../../../../corpus/fib.tsia");
    const JACOBI: &str = include_str!("../../../../corpus/jacobi.tsia");
    const STACK: &str = include_str!("../../../../corpus/stack.tsia");

    #[test]
    fn corpus_checks_clean() {
        for src in [FIB, JACOBI, STACK, include_str!("../../../../corpus/simulate.tsia")] {
            if let Err(d) = check_src(src) {
                panic!("{d:?}");
            }
        }
    }

    #[test]
    fn jacobi_del_array_written_is_rejected() {
        let bad = JACOBI.replace("if (e < emax) return;", "a[1]=0; if (e < emax) return;");
        assert!(codes(&bad).contains(&DiagCode::DelItemAccessed));
        let bad = JACOBI.replace("if (e < emax) return;", "if (a(1) < emax) return;");
        assert!(codes(&bad).contains(&DiagCode::DelItemAccessed));
    }

    #[test]
    fn fib_without_else_never_produces_k() {
        let bad = FIB.replace("else { fib(n-1;;x); fib(n-2;;y); sum(x,y;;k); }", "");
        assert_eq!(codes(&bad), vec![DiagCode::OutNeverProduced]);
    }

    #[test]
    fn stack_methods_matched_to_record() {
        let p = check_src(STACK).unwrap();
        let rec = &p.records["Stack"];
        assert_eq!(rec.constructor, "stack");
        assert_eq!(rec.receiver, "s");
        let push = &rec.methods["push"];
        assert_eq!(push.params.group(Group::In)[0].name(), "u");
        assert_eq!(push.params.group(Group::In)[0].ty, BaseType::Int);
        assert_eq!(rec.methods["pop"].params.arities(), (0, 0, 2));
        assert_eq!(p.entry.as_deref(), Some("main"));
    }

    #[test]
    fn undefined_and_arity() {
        assert_eq!(codes("f(;;int k) { g(1;;k); }"), vec![DiagCode::UndefinedName]);
        assert_eq!(codes("g(int a;;int b) { b = a; } f(;;int k) { g(1,2;;k); }"), vec![DiagCode::ArityMismatch]);
        assert_eq!(codes("f(;;int k) { k = z; }"), vec![DiagCode::UndefinedName]);
    }

    #[test]
    fn duplicates() {
        assert_eq!(codes("f(;;) { } f(;;) { }"), vec![DiagCode::DuplicateDefinition]);
        assert_eq!(codes("f(int a;;int a) { a = 1; }"), vec![DiagCode::DuplicateDefinition]);
    }

    #[test]
    fn missing_method_impl() {
        let bad = STACK.replace("s.pop(;;o,e) { if (p>0) { o=a[p--]; e=0; } else e=1; }", "");
        assert!(codes(&bad).contains(&DiagCode::UndefinedName));
    }

    #[test]
    fn early_return_must_have_outs() {
        assert_eq!(codes("f(int n;;int k) { if (n < 0) return; k = n; }"), vec![DiagCode::OutNeverProduced]);
        assert!(check_src("f(int n;;int k) { if (n < 0) { k = 0; return; } k = n; }").is_ok());
    }

    #[test]
    fn out_argument_must_be_location() {
        assert_eq!(
            codes("g(;;int b) { b = 1; } f(int n;;) { g(;;n+1); }"),
            vec![DiagCode::NotAssignable]
        );
    }

    #[test]
    fn real_into_int_rejected() {
        assert_eq!(codes("f(;;int k) { k = 1.5; }"), vec![DiagCode::TypeMismatch]);
        assert!(check_src("f(;;real k) { k = 1; }").is_ok());
    }

    #[test]
    fn must_inline_marks_producer_of_read_value() {
        let p = check_src("g(int a;;int b) { b = a + 1; } f(int n;;int k) { g(n;;x); g(x;;y); k = y * 2; }").unwrap();
        let body = p.routines["f"].body.as_ref().unwrap();
        let inl: Vec<bool> = body
            .stmts
            .iter()
            .filter_map(|s| match &s.kind {
                StmtKind::Call(c) => Some(c.must_inline),
                _ => None,
            })
            .collect();
        assert_eq!(inl, vec![true, true]);
        let fib = check_src(FIB).unwrap();
        let mut any = false;
        fn walk(b: &Block, any: &mut bool) {
            for s in &b.stmts {
                match &s.kind {
                    StmtKind::Call(c) => *any |= c.must_inline,
                    StmtKind::Block(b) => walk(b, any),
                    StmtKind::If { then, els, .. } => {
                        walk(&Block { stmts: vec![(**then).clone()] }, any);
                        if let Some(e) = els {
                            walk(&Block { stmts: vec![(**e).clone()] }, any);
                        }
                    }
                    _ => {}
                }
            }
        }
        walk(fib.routines["fib"].body.as_ref().unwrap(), &mut any);
        assert!(!any, "fib's calls can all be delegated");
    }
}
