use std::fmt;

use crate::store::{AccessMode, ItemId, ItemKind, Region, Seq, TaskId};
use crate::value::{ScalarType, Value};

/// A scalar location: a whole scalar item or one array element.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Loc {
    Item(ItemId),
    /// Array element at a 1-based store index.
    Elem(ItemId, usize),
}

impl Loc {
    pub fn region(&self) -> Region {
        match *self {
            Loc::Item(id) => Region::whole(id),
            Loc::Elem(id, i) => Region::elem(id, i),
        }
    }

    pub fn item(&self) -> ItemId {
        match *self {
            Loc::Item(id) | Loc::Elem(id, _) => id,
        }
    }
}

impl fmt::Display for Loc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Loc::Item(id) => write!(f, "{id}"),
            Loc::Elem(id, i) => write!(f, "{id}({i})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Source {
    Value(Value),
    Loc(Loc),
}

/// How one parameter of a task is bound.
#[derive(Debug, Clone, PartialEq)]
pub enum Binding {
    /// In-argument snapshotted at creation.
    Value(Value),
    /// In-argument passed as a handle.
    Read(Loc),
    /// Out-argument.
    Write(Loc),
    /// Scalar inout: reads `input`, produces `output`.
    Update { input: Source, output: Loc },
    /// Array parameter bound to a region.
    Array { region: Region, mode: AccessMode },
    /// Record instance passed as an in or inout argument.
    Record(ItemId),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Arg {
    pub binding: Binding,
    /// The callee declared this parameter `del`.
    pub del: bool,
}

impl Arg {
    pub fn new(binding: Binding) -> Arg {
        Arg { binding, del: false }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Callee {
    Routine(String),
    Method { record: String, method: String },
    /// Runtime copy of one scalar, emitted when a body hands back an
    /// inout it only forwarded.
    Copy(ScalarType),
}

impl Callee {
    pub fn name(&self) -> String {
        match self {
            Callee::Routine(n) => n.clone(),
            Callee::Method { record, method } => format!("{record}.{method}"),
            Callee::Copy(_) => "copy".into(),
        }
    }
}

/// A task before it enters the pool.
#[derive(Debug, Clone, PartialEq)]
pub struct ChildSpec {
    pub callee: Callee,
    pub receiver: Option<ItemId>,
    /// Bindings for ins, then inouts, then outs.
    pub args: Vec<Arg>,
    /// Group sizes, for display.
    pub arity: [usize; 3],
}

impl ChildSpec {
    pub fn copy(ty: ScalarType, from: Loc, to: Loc) -> ChildSpec {
        ChildSpec {
            callee: Callee::Copy(ty),
            receiver: None,
            args: vec![Arg::new(Binding::Read(from)), Arg::new(Binding::Write(to))],
            arity: [1, 0, 1],
        }
    }

    /// Ledger entries this task claims: `(region, mode, del)`.
    pub fn accesses(&self) -> Vec<(Region, AccessMode, bool)> {
        let mut out = Vec::new();
        if let Some(r) = self.receiver {
            out.push((Region::whole(r), AccessMode::ReadWrite, false));
        }
        for a in &self.args {
            match &a.binding {
                Binding::Value(_) => {}
                Binding::Read(l) => out.push((l.region(), AccessMode::Read, a.del)),
                Binding::Write(l) => out.push((l.region(), AccessMode::Write, a.del)),
                Binding::Update { input: Source::Loc(i), output } if i == output => {
                    out.push((output.region(), AccessMode::ReadWrite, a.del))
                }
                Binding::Update { input, output } => {
                    if let Source::Loc(i) = input {
                        out.push((i.region(), AccessMode::Read, a.del));
                    }
                    out.push((output.region(), AccessMode::Write, a.del));
                }
                Binding::Array { region, mode } => out.push((*region, *mode, a.del)),
                Binding::Record(r) => out.push((Region::whole(*r), AccessMode::ReadWrite, a.del)),
            }
        }
        out
    }

    /// Scalar and record items this task is responsible for producing.
    pub fn outputs(&self) -> Vec<ItemId> {
        self.args
            .iter()
            .filter_map(|a| match a.binding {
                Binding::Write(Loc::Item(id)) | Binding::Update { output: Loc::Item(id), .. } => Some(id),
                _ => None,
            })
            .filter(|id| id.kind != ItemKind::Array)
            .collect()
    }

    /// Replace every reference to scalar item `from` by `to`.
    pub fn substitute(&mut self, from: ItemId, to: Loc) {
        let swap = |l: &mut Loc| {
            if *l == Loc::Item(from) {
                *l = to;
            }
        };
        for a in &mut self.args {
            match &mut a.binding {
                Binding::Read(l) | Binding::Write(l) => swap(l),
                Binding::Update { input, output } => {
                    if let Source::Loc(l) = input {
                        swap(l);
                    }
                    swap(output);
                }
                _ => {}
            }
        }
    }
}

/// A routine bound to its items, as scheduled by the pool.
#[derive(Debug, Clone, PartialEq)]
pub struct Task {
    pub id: TaskId,
    pub spec: ChildSpec,
    pub seq: Seq,
    pub parent: Option<TaskId>,
    pub depth: u32,
}

impl Task {
    pub fn callee(&self) -> &Callee {
        &self.spec.callee
    }
}

fn binding_text(b: &Binding) -> String {
    match b {
        Binding::Value(v) => v.to_string(),
        Binding::Read(l) | Binding::Write(l) => l.to_string(),
        Binding::Update { input: Source::Value(v), output } => format!("{v}->{output}"),
        Binding::Update { input: Source::Loc(l), output } if l == output => l.to_string(),
        Binding::Update { input: Source::Loc(l), output } => format!("{l}->{output}"),
        Binding::Array { region, .. } => region.to_string(),
        Binding::Record(r) => r.to_string(),
    }
}

impl fmt::Display for ChildSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(r) = self.receiver {
            write!(f, "{r}.")?;
        }
        let mut groups = Vec::new();
        let mut it = self.args.iter();
        for n in self.arity {
            let g: Vec<String> = it.by_ref().take(n).map(|a| binding_text(&a.binding)).collect();
            groups.push(g.join(","));
        }
        let name = match &self.callee {
            Callee::Method { method, .. } => method.clone(),
            c => c.name(),
        };
        write!(f, "{name}({})", groups.join(";"))
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.spec.fmt(f)
    }
}
