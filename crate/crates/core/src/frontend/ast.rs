//! Abstract syntax for the task language.
//!
//! Both `a(i)` and `a[i]` parse to [`ExprKind::Index`]; ranges `a[lo:hi]`
//! only appear as call arguments.

use super::diag::Span;
use crate::value::BaseType;

/// Source position attached to AST nodes. Positions never take part in
/// equality, so re-parsed trees compare equal to the originals.
#[derive(Debug, Clone, Copy, Default)]
pub struct Pos(pub Span);

impl PartialEq for Pos {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

impl From<Span> for Pos {
    fn from(s: Span) -> Self {
        Pos(s)
    }
}

/// Parameter/argument group: 0 = in, 1 = inout, 2 = out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Group {
    In = 0,
    InOut = 1,
    Out = 2,
}

impl Group {
    pub const ALL: [Group; 3] = [Group::In, Group::InOut, Group::Out];

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    /// `None` only in record method signatures such as `push(int;;int)`.
    pub name: Option<String>,
    pub ty: BaseType,
    /// Array length expression; `Some` makes this an array parameter.
    pub len: Option<Expr>,
    pub del: bool,
    pub pos: Pos,
}

impl Param {
    pub fn name(&self) -> &str {
        self.name.as_deref().unwrap_or("_")
    }

    pub fn is_array(&self) -> bool {
        self.len.is_some()
    }
}

/// The three ordered parameter groups of a signature.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Params {
    pub groups: [Vec<Param>; 3],
}

impl Params {
    pub fn group(&self, g: Group) -> &[Param] {
        &self.groups[g.index()]
    }

    pub fn arities(&self) -> (usize, usize, usize) {
        (self.groups[0].len(), self.groups[1].len(), self.groups[2].len())
    }

    /// All params in declaration order with their group.
    pub fn iter(&self) -> impl Iterator<Item = (Group, &Param)> {
        Group::ALL
            .into_iter()
            .flat_map(move |g| self.groups[g.index()].iter().map(move |p| (g, p)))
    }

    pub fn len(&self) -> usize {
        self.groups.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn find(&self, name: &str) -> Option<(Group, &Param)> {
        self.iter().find(|(_, p)| p.name.as_deref() == Some(name))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoutineDef {
    pub name: String,
    pub params: Params,
    /// `None` for a prototype such as `set(real a;;real b);`.
    pub body: Option<Block>,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodSig {
    pub name: String,
    pub params: Params,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecordDecl {
    pub name: String,
    pub methods: Vec<MethodSig>,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Item {
    Routine(RoutineDef),
    Record(RecordDecl),
}

/// Unchecked program: top-level items in source order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Program {
    pub items: Vec<Item>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Block {
    pub stmts: Vec<Stmt>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stmt {
    pub kind: StmtKind,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Declarator {
    pub name: String,
    /// `a[n]` is `(None, n)`, `a[1:max]` is `(Some(1), max)`.
    pub dims: Option<(Option<Expr>, Expr)>,
    pub init: Option<Expr>,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LValue {
    Name(String),
    Index { base: String, index: Expr },
}

impl LValue {
    pub fn base(&self) -> &str {
        match self {
            LValue::Name(n) => n,
            LValue::Index { base, .. } => base,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Call {
    pub receiver: Option<String>,
    pub callee: String,
    pub args: [Vec<Expr>; 3],
    /// Set by the checker when a later statement reads a value this call
    /// produces, which forces in-place evaluation.
    pub must_inline: bool,
    pub pos: Pos,
}

impl Call {
    pub fn group(&self, g: Group) -> &[Expr] {
        &self.args[g.index()]
    }

    pub fn iter_args(&self) -> impl Iterator<Item = (Group, &Expr)> {
        Group::ALL
            .into_iter()
            .flat_map(move |g| self.args[g.index()].iter().map(move |e| (g, e)))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodImpl {
    pub receiver: String,
    pub method: String,
    pub params: [Vec<String>; 3],
    pub body: Block,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StmtKind {
    Decl { ty: BaseType, decls: Vec<Declarator> },
    Assign { target: LValue, value: Expr },
    Call(Call),
    If { cond: Expr, then: Box<Stmt>, els: Option<Box<Stmt>> },
    Return,
    Block(Block),
    MethodImpl(MethodImpl),
    /// Expression evaluated for its side effect (`p++;`).
    Expr(Expr),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Rem,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Rem => "%",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
        }
    }

    pub fn is_comparison(self) -> bool {
        matches!(self, BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge | BinOp::Eq | BinOp::Ne)
    }

    pub fn precedence(self) -> u8 {
        match self {
            BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge | BinOp::Eq | BinOp::Ne => 1,
            BinOp::Add | BinOp::Sub => 2,
            BinOp::Mul | BinOp::Div | BinOp::Rem => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Builtin {
    Abs,
}

impl Builtin {
    pub fn name(self) -> &'static str {
        match self {
            Builtin::Abs => "abs",
        }
    }

    pub fn lookup(name: &str) -> Option<Builtin> {
        match name {
            "abs" => Some(Builtin::Abs),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    pub kind: ExprKind,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExprKind {
    Int(i64),
    Real(f64),
    Name(String),
    Index { base: String, index: Box<Expr> },
    Range { base: String, lo: Box<Expr>, hi: Box<Expr> },
    Neg(Box<Expr>),
    Binary { op: BinOp, lhs: Box<Expr>, rhs: Box<Expr> },
    Builtin { func: Builtin, arg: Box<Expr> },
    /// `++p`, `p++`, `--p`, `p--`.
    Step { name: String, inc: bool, prefix: bool },
    /// `[e1, e2, ...]`; accepted only in entry calls.
    ArrayLit(Vec<Expr>),
}

impl Expr {
    pub fn new(kind: ExprKind, span: Span) -> Self {
        Expr { kind, pos: Pos(span) }
    }

    pub fn span(&self) -> Span {
        self.pos.0
    }

    /// The variable this expression designates when used as a call
    /// argument location: `x`, `a(i)`, `a[lo:hi]`.
    pub fn location_base(&self) -> Option<&str> {
        match &self.kind {
            ExprKind::Name(n) => Some(n),
            ExprKind::Index { base, .. } | ExprKind::Range { base, .. } => Some(base),
            _ => None,
        }
    }

    /// Visit every variable name read by this expression, including
    /// indexed bases.
    pub fn walk_names<'a>(&'a self, f: &mut impl FnMut(&'a str)) {
        match &self.kind {
            ExprKind::Int(_) | ExprKind::Real(_) => {}
            ExprKind::Name(n) => f(n),
            ExprKind::Index { base, index } => {
                f(base);
                index.walk_names(f);
            }
            ExprKind::Range { base, lo, hi } => {
                f(base);
                lo.walk_names(f);
                hi.walk_names(f);
            }
            ExprKind::Neg(e) | ExprKind::Builtin { arg: e, .. } => e.walk_names(f),
            ExprKind::Binary { lhs, rhs, .. } => {
                lhs.walk_names(f);
                rhs.walk_names(f);
            }
            ExprKind::Step { name, .. } => f(name),
            ExprKind::ArrayLit(items) => items.iter().for_each(|e| e.walk_names(f)),
        }
    }
}
