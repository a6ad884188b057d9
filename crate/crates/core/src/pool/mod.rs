//! The task system: the pool of not-yet-completed tasks, delegation, and
//! the responsibility index mapping each pending output to its producer.

mod policy;
mod task;

use std::collections::hash_map::DefaultHasher;
use std::collections::{HashMap, HashSet, VecDeque};
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use thiserror::Error;

pub use policy::{Order, ParseError, Policy};
pub use task::{Arg, Binding, Callee, ChildSpec, Loc, Source, Task};

use crate::store::{CommitSet, ItemId, ItemStore, Seq, StoreError, TaskId};
use crate::value::Value;

pub const DEFAULT_CAPACITY: usize = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PoolError {
    #[error("delegation by {task} leaves {item} without exactly one producer")]
    ResponsibilityGap { task: TaskId, item: ItemId },
    #[error("task pool exceeded its capacity of {0} tasks")]
    CapacityExceeded(usize),
    #[error("unknown task {0}")]
    UnknownTask(TaskId),
    #[error("task {0} is not running")]
    NotRunning(TaskId),
    #[error("replayed commit of {0} differs from the original")]
    ConflictingRecommit(TaskId),
    #[error(transparent)]
    Store(#[from] StoreError),
}

/// Result of running a task body.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Outcome {
    pub commits: CommitSet,
    /// Non-empty for a delegation.
    pub children: Vec<ChildSpec>,
}

impl Outcome {
    pub fn is_delegation(&self) -> bool {
        !self.children.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskState {
    Pending,
    Ready,
    Running,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventKind {
    Spawned,
    Delegated,
    Resolved,
    Requeued,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PoolEvent {
    pub kind: EventKind,
    pub task: TaskId,
}

/// What a commit did.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CommitReport {
    pub children: Vec<TaskId>,
    /// Responsibilities discharged by direct resolution.
    pub resolved: Vec<ItemId>,
    /// The task had already committed identical results.
    pub replay: bool,
}

struct Entry {
    task: Arc<Task>,
    state: TaskState,
}

pub struct TaskPool {
    store: Arc<ItemStore>,
    tasks: HashMap<TaskId, Entry>,
    ready: VecDeque<TaskId>,
    order: Order,
    waiting: HashMap<ItemId, Vec<TaskId>>,
    responsible: HashMap<ItemId, TaskId>,
    owned: HashMap<TaskId, Vec<ItemId>>,
    done: HashMap<TaskId, u64>,
    next_task: u64,
    next_root: u32,
    capacity: usize,
    peak: usize,
    events: Vec<PoolEvent>,
}

impl TaskPool {
    pub fn new(store: Arc<ItemStore>, order: Order) -> TaskPool {
        TaskPool {
            store,
            tasks: HashMap::new(),
            ready: VecDeque::new(),
            order,
            waiting: HashMap::new(),
            responsible: HashMap::new(),
            owned: HashMap::new(),
            done: HashMap::new(),
            next_task: 0,
            next_root: 0,
            capacity: DEFAULT_CAPACITY,
            peak: 0,
            events: Vec::new(),
        }
    }

    pub fn with_capacity(mut self, capacity: usize) -> TaskPool {
        self.capacity = capacity;
        self
    }

    pub fn store(&self) -> &Arc<ItemStore> {
        &self.store
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    pub fn peak(&self) -> usize {
        self.peak
    }

    pub fn running(&self) -> usize {
        self.tasks.values().filter(|e| e.state == TaskState::Running).count()
    }

    pub fn has_ready(&self) -> bool {
        !self.ready.is_empty()
    }

    pub fn task(&self, id: TaskId) -> Option<&Arc<Task>> {
        self.tasks.get(&id).map(|e| &e.task)
    }

    pub fn state(&self, id: TaskId) -> Option<TaskState> {
        self.tasks.get(&id).map(|e| e.state)
    }

    /// All tasks in the pool, in seq order.
    pub fn tasks(&self) -> Vec<Arc<Task>> {
        let mut v: Vec<Arc<Task>> = self.tasks.values().map(|e| e.task.clone()).collect();
        v.sort_by(|a, b| a.seq.cmp(&b.seq));
        v
    }

    pub fn drain_events(&mut self) -> Vec<PoolEvent> {
        std::mem::take(&mut self.events)
    }

    /// Insert a root task. Roots get consecutive seqs in spawn order.
    pub fn spawn_root(&mut self, spec: ChildSpec) -> Result<TaskId, PoolError> {
        let seq = Seq::root(self.next_root);
        self.next_root += 1;
        let id = self.insert(spec, seq, None, 0);
        self.check_capacity()?;
        Ok(id)
    }

    fn insert(&mut self, spec: ChildSpec, seq: Seq, parent: Option<TaskId>, depth: u32) -> TaskId {
        let id = TaskId(self.next_task);
        self.next_task += 1;
        self.store.write().register_accesses(id, &seq, &spec.accesses());
        let outs = spec.outputs();
        for item in &outs {
            self.responsible.insert(*item, id);
        }
        self.owned.insert(id, outs);
        let task = Arc::new(Task { id, spec, seq, parent, depth });
        self.tasks.insert(id, Entry { task, state: TaskState::Pending });
        self.events.push(PoolEvent { kind: EventKind::Spawned, task: id });
        self.park(id);
        self.peak = self.peak.max(self.tasks.len());
        id
    }

    fn check_capacity(&self) -> Result<(), PoolError> {
        if self.tasks.len() > self.capacity {
            Err(PoolError::CapacityExceeded(self.capacity))
        } else {
            Ok(())
        }
    }

    /// Move a pending task to the ready queue, or index it under the first
    /// item blocking it.
    fn park(&mut self, id: TaskId) {
        let blocker = self.store.read().first_blocker(id);
        match blocker {
            Some(item) => self.waiting.entry(item).or_default().push(id),
            None => {
                if let Some(e) = self.tasks.get_mut(&id) {
                    e.state = TaskState::Ready;
                }
                self.ready.push_back(id);
            }
        }
    }

    fn wake(&mut self, items: impl IntoIterator<Item = ItemId>) {
        for item in items {
            if let Some(ids) = self.waiting.remove(&item) {
                for id in ids {
                    if self.state(id) == Some(TaskState::Pending) {
                        self.park(id);
                    }
                }
            }
        }
    }

    /// Snapshot of the ready tasks, in the order they would be taken.
    pub fn ready_tasks(&self) -> Vec<Arc<Task>> {
        let mut v: Vec<Arc<Task>> = self.ready.iter().map(|id| self.tasks[id].task.clone()).collect();
        if self.order == Order::Lifo {
            v.reverse();
        }
        v
    }

    /// Take the next ready task and mark it running.
    pub fn take_ready(&mut self) -> Option<Arc<Task>> {
        let id = match self.order {
            Order::Lifo => self.ready.pop_back()?,
            Order::Fifo => self.ready.pop_front()?,
        };
        let e = self.tasks.get_mut(&id).expect("ready task present");
        e.state = TaskState::Running;
        Some(e.task.clone())
    }

    /// Take a specific ready task.
    pub fn take(&mut self, id: TaskId) -> Option<Arc<Task>> {
        let pos = self.ready.iter().position(|t| *t == id)?;
        self.ready.remove(pos);
        let e = self.tasks.get_mut(&id).expect("ready task present");
        e.state = TaskState::Running;
        Some(e.task.clone())
    }

    /// Return a running task to the ready queue after its worker failed.
    pub fn requeue(&mut self, id: TaskId) -> Result<(), PoolError> {
        match self.state(id) {
            Some(TaskState::Running) => {}
            Some(_) => return Err(PoolError::NotRunning(id)),
            None => return Err(PoolError::UnknownTask(id)),
        }
        self.tasks.get_mut(&id).expect("present").state = TaskState::Pending;
        self.events.push(PoolEvent { kind: EventKind::Requeued, task: id });
        self.park(id);
        Ok(())
    }

    /// Items with a pending producer, sorted.
    pub fn responsibility(&self) -> Vec<ItemId> {
        let mut v: Vec<ItemId> = self.responsible.keys().copied().collect();
        v.sort();
        v
    }

    pub fn responsible_for(&self, item: ItemId) -> Option<TaskId> {
        self.responsible.get(&item).copied()
    }

    /// Apply a finished task's outcome: store its writes, hand its
    /// remaining responsibilities to its children and insert them.
    pub fn commit_outcome(&mut self, id: TaskId, outcome: Outcome) -> Result<CommitReport, PoolError> {
        let Some(entry) = self.tasks.get(&id) else {
            return match self.done.get(&id) {
                Some(d) if *d == digest(&outcome) => Ok(CommitReport { replay: true, ..Default::default() }),
                Some(_) => Err(PoolError::ConflictingRecommit(id)),
                None => Err(PoolError::UnknownTask(id)),
            };
        };
        if entry.state != TaskState::Running {
            return Err(PoolError::NotRunning(id));
        }
        let task = entry.task.clone();
        let commits = &outcome.commits;

        let resolved: HashSet<ItemId> =
            commits.scalars.iter().map(|(i, _)| *i).chain(commits.records.iter().map(|(i, _)| *i)).collect();
        let mut producers: HashMap<ItemId, usize> = HashMap::new();
        for c in &outcome.children {
            for item in c.outputs() {
                *producers.entry(item).or_default() += 1;
            }
        }
        let owned = self.owned.get(&id).cloned().unwrap_or_default();
        let fresh = commits.new_scalars.iter().map(|(i, _)| *i).chain(commits.new_records.iter().map(|(i, _)| *i));
        for item in owned.iter().copied().chain(fresh) {
            let n = producers.get(&item).copied().unwrap_or(0);
            let ok = if resolved.contains(&item) { n == 0 } else { n == 1 };
            if !ok {
                return Err(PoolError::ResponsibilityGap { task: id, item });
            }
        }
        for item in producers.keys() {
            if !owned.contains(item) && !resolved.contains(item) && !self.is_fresh(commits, *item) {
                return Err(PoolError::ResponsibilityGap { task: id, item: *item });
            }
        }

        let (touched, released) = {
            let mut st = self.store.write();
            let touched = st.apply(id, &task.seq, commits)?;
            (touched, st.release(id))
        };
        let mut report = CommitReport::default();
        for item in owned {
            if resolved.contains(&item) {
                report.resolved.push(item);
            }
            if self.responsible.get(&item) == Some(&id) {
                self.responsible.remove(&item);
            }
        }
        self.owned.remove(&id);
        self.tasks.remove(&id);
        self.done.insert(id, digest(&outcome));
        let kind = if outcome.is_delegation() { EventKind::Delegated } else { EventKind::Resolved };
        self.events.push(PoolEvent { kind, task: id });
        for (j, spec) in outcome.children.into_iter().enumerate() {
            let child = self.insert(spec, task.seq.child(j as u32), Some(id), task.depth + 1);
            report.children.push(child);
        }
        self.wake(touched.into_iter().chain(released));
        self.check_capacity()?;
        Ok(report)
    }

    fn is_fresh(&self, commits: &CommitSet, item: ItemId) -> bool {
        commits.new_scalars.iter().any(|(i, _)| *i == item) || commits.new_records.iter().any(|(i, _)| *i == item)
    }
}

/// Fingerprint of the values an outcome commits to existing items, used
/// to recognise an identical replay. Fresh ids differ between replays
/// and are left out.
fn digest(outcome: &Outcome) -> u64 {
    let mut h = DefaultHasher::new();
    let fresh: HashSet<ItemId> = outcome.commits.new_scalars.iter().map(|(i, _)| *i).collect();
    let bits = |v: &Value, h: &mut DefaultHasher| match v {
        Value::Int(i) => (0u8, *i as u64).hash(h),
        Value::Real(r) => (1u8, r.to_bits()).hash(h),
        Value::Record(_) => 2u8.hash(h),
    };
    for (id, v) in &outcome.commits.scalars {
        if !fresh.contains(id) {
            id.hash(&mut h);
            bits(v, &mut h);
        }
    }
    for (id, i, v) in &outcome.commits.elems {
        (id, i).hash(&mut h);
        bits(v, &mut h);
    }
    outcome.children.len().hash(&mut h);
    for c in &outcome.children {
        c.callee.hash(&mut h);
    }
    h.finish()
}
