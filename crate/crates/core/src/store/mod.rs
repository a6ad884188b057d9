//! The item architecture: single-assignment scalars, arrays with a
//! range-tracked access ledger, and record instances.
//!
//! A task only ever reaches items it holds an access for. Reads go
//! through [`StoreState::read_scalar`] and [`StoreState::read_elem`], which
//! reject anything unregistered; writes arrive as one [`CommitSet`] per
//! task and are applied atomically by [`StoreState::apply`].

mod ledger;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};

use parking_lot::{RwLock, RwLockReadGuard, RwLockWriteGuard};
use thiserror::Error;

pub use ledger::{regions_overlap, AccessMode, AccessRecord, Region, Seq, TaskId};

use crate::value::{ScalarType, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ItemKind {
    Scalar,
    Array,
    Record,
}

/// Unique item handle. Ids come from a monotone counter and are never
/// reused within a store.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ItemId {
    pub n: u64,
    pub kind: ItemKind,
}

impl fmt::Display for ItemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.kind {
            ItemKind::Scalar => 's',
            ItemKind::Array => 'a',
            ItemKind::Record => 'r',
        };
        write!(f, "{tag}{}", self.n)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StoreError {
    #[error("item {0} is not resolved")]
    NotResolved(ItemId),
    #[error("array length must be positive, got {0}")]
    NonPositiveLength(i64),
    #[error("item {item} already holds {old}, replay committed {new}")]
    ConflictingRecommit { item: ItemId, old: Value, new: Value },
    #[error("{task} committed to {item} while earlier {earlier} is pending")]
    OutOfOrderCommit { item: ItemId, task: TaskId, earlier: TaskId },
    #[error("{task} has no access to {region}")]
    AccessViolation { task: TaskId, region: Region },
    #[error("index {index} outside {item} of length {len}")]
    IndexOutOfBounds { item: ItemId, index: i64, len: usize },
    #[error("unknown item {0}")]
    UnknownItem(ItemId),
    #[error("{item} holds {found}, expected {expected}")]
    TypeMismatch { item: ItemId, expected: String, found: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarItem {
    pub ty: ScalarType,
    pub value: Option<Value>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArrayItem {
    pub ty: ScalarType,
    pub values: Vec<Option<Value>>,
    /// Record instance this array belongs to, if it is instance state.
    pub owner: Option<ItemId>,
}

/// One entry of a record instance's private environment.
#[derive(Debug, Clone, PartialEq)]
pub enum EnvEntry {
    Unset(ScalarType),
    Scalar(Value),
    Array(ItemId),
}

pub type Env = BTreeMap<String, EnvEntry>;

#[derive(Debug, Clone, PartialEq)]
pub struct RecordItem {
    pub def: String,
    /// `None` until the constructor commits.
    pub env: Option<Env>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Item {
    Scalar(ScalarItem),
    Array(ArrayItem),
    Record(RecordItem),
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewArray {
    pub id: ItemId,
    pub ty: ScalarType,
    pub values: Vec<Option<Value>>,
    pub owner: Option<ItemId>,
}

/// Everything one task execution writes, applied atomically.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CommitSet {
    pub new_scalars: Vec<(ItemId, ScalarType)>,
    pub new_arrays: Vec<NewArray>,
    pub new_records: Vec<(ItemId, String)>,
    pub scalars: Vec<(ItemId, Value)>,
    pub elems: Vec<(ItemId, usize, Value)>,
    pub records: Vec<(ItemId, Env)>,
}

impl CommitSet {
    pub fn scalar(item: ItemId, value: Value) -> CommitSet {
        CommitSet { scalars: vec![(item, value)], ..CommitSet::default() }
    }

    pub fn is_empty(&self) -> bool {
        *self == CommitSet::default()
    }
}

/// Thread-safe item store. Ledger mutations take the write lock; reads
/// by running tasks share the read lock.
#[derive(Debug, Default)]
pub struct ItemStore {
    next: AtomicU64,
    state: RwLock<StoreState>,
}

impl ItemStore {
    pub fn new() -> ItemStore {
        ItemStore::default()
    }

    /// Reserve a fresh id without creating the item.
    pub fn fresh_id(&self, kind: ItemKind) -> ItemId {
        ItemId { n: self.next.fetch_add(1, Ordering::Relaxed), kind }
    }

    pub fn read(&self) -> RwLockReadGuard<'_, StoreState> {
        self.state.read()
    }

    pub fn write(&self) -> RwLockWriteGuard<'_, StoreState> {
        self.state.write()
    }

    pub fn new_scalar(&self, ty: ScalarType) -> ItemId {
        let id = self.fresh_id(ItemKind::Scalar);
        self.write().items.insert(id, Item::Scalar(ScalarItem { ty, value: None }));
        id
    }

    /// Scalar created already resolved, for literal root arguments.
    pub fn new_resolved(&self, value: Value) -> ItemId {
        let ty = match value {
            Value::Int(_) => ScalarType::Int,
            _ => ScalarType::Real,
        };
        let id = self.fresh_id(ItemKind::Scalar);
        self.write().items.insert(id, Item::Scalar(ScalarItem { ty, value: Some(value) }));
        id
    }

    pub fn new_array(&self, ty: ScalarType, n: i64) -> Result<ItemId, StoreError> {
        if n < 1 {
            return Err(StoreError::NonPositiveLength(n));
        }
        let id = self.fresh_id(ItemKind::Array);
        self.write()
            .items
            .insert(id, Item::Array(ArrayItem { ty, values: vec![None; n as usize], owner: None }));
        Ok(id)
    }

    /// Array created fully resolved, for literal root arguments.
    pub fn new_array_from(&self, ty: ScalarType, values: &[Value]) -> Result<ItemId, StoreError> {
        let id = self.new_array(ty, values.len() as i64)?;
        let mut cells = Vec::with_capacity(values.len());
        for v in values {
            let c = v.coerce(ty).ok_or_else(|| StoreError::TypeMismatch {
                item: id,
                expected: ty.to_string(),
                found: v.type_name().to_string(),
            })?;
            cells.push(Some(c));
        }
        if let Some(Item::Array(a)) = self.write().items.get_mut(&id) {
            a.values = cells;
        }
        Ok(id)
    }

    pub fn new_record(&self, def: &str) -> ItemId {
        let id = self.fresh_id(ItemKind::Record);
        self.write().items.insert(id, Item::Record(RecordItem { def: def.to_string(), env: None }));
        id
    }
}

#[derive(Debug, Default)]
pub struct StoreState {
    items: HashMap<ItemId, Item>,
    ledger: HashMap<ItemId, Vec<AccessRecord>>,
    by_task: HashMap<TaskId, Vec<ItemId>>,
}

impl StoreState {
    pub fn item(&self, id: ItemId) -> Result<&Item, StoreError> {
        self.items.get(&id).ok_or(StoreError::UnknownItem(id))
    }

    pub fn contains(&self, id: ItemId) -> bool {
        self.items.contains_key(&id)
    }

    pub fn array(&self, id: ItemId) -> Result<&ArrayItem, StoreError> {
        match self.item(id)? {
            Item::Array(a) => Ok(a),
            other => Err(kind_error(id, "array", other)),
        }
    }

    pub fn record(&self, id: ItemId) -> Result<&RecordItem, StoreError> {
        match self.item(id)? {
            Item::Record(r) => Ok(r),
            other => Err(kind_error(id, "record", other)),
        }
    }

    /// Unchecked scalar read, for drivers and tests.
    pub fn scalar_value(&self, id: ItemId) -> Result<Value, StoreError> {
        match self.item(id)? {
            Item::Scalar(s) => s.value.ok_or(StoreError::NotResolved(id)),
            other => Err(kind_error(id, "scalar", other)),
        }
    }

    /// Unchecked element read (1-based), for drivers and tests.
    pub fn elem_value(&self, id: ItemId, i: usize) -> Result<Value, StoreError> {
        let a = self.array(id)?;
        match a.values.get(i.wrapping_sub(1)) {
            None => Err(StoreError::IndexOutOfBounds { item: id, index: i as i64, len: a.values.len() }),
            Some(v) => v.ok_or(StoreError::NotResolved(id)),
        }
    }

    /// Scalars and records are resolved once they hold a value; arrays
    /// always count as resolved.
    pub fn is_resolved(&self, id: ItemId) -> bool {
        match self.items.get(&id) {
            Some(Item::Scalar(s)) => s.value.is_some(),
            Some(Item::Record(r)) => r.env.is_some(),
            Some(Item::Array(_)) => true,
            None => false,
        }
    }

    pub fn ledger(&self, id: ItemId) -> &[AccessRecord] {
        self.ledger.get(&id).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn accesses_of(&self, task: TaskId) -> Vec<&AccessRecord> {
        let Some(items) = self.by_task.get(&task) else { return Vec::new() };
        items
            .iter()
            .flat_map(|i| self.ledger(*i).iter().filter(move |r| r.task == task))
            .collect()
    }

    /// Whether `task` may touch `region`: it holds a non-`del` access
    /// covering it, or the region is instance state of a record it holds.
    pub fn check_access(&self, task: TaskId, region: Region, write: bool) -> Result<(), StoreError> {
        let held = self.ledger(region.item).iter().any(|r| {
            r.task == task && !r.del && r.region.contains(&region) && (!write || r.mode.writes())
        });
        if held {
            return Ok(());
        }
        if let Some(Item::Array(ArrayItem { owner: Some(owner), .. })) = self.items.get(&region.item) {
            let via_owner = self
                .ledger(*owner)
                .iter()
                .any(|r| r.task == task && !r.del && (!write || r.mode.writes()));
            if via_owner {
                return Ok(());
            }
        }
        Err(StoreError::AccessViolation { task, region })
    }

    pub fn read_scalar(&self, task: TaskId, id: ItemId) -> Result<Value, StoreError> {
        self.check_access(task, Region::whole(id), false)?;
        self.scalar_value(id)
    }

    pub fn read_elem(&self, task: TaskId, id: ItemId, i: usize) -> Result<Value, StoreError> {
        let len = self.array(id)?.values.len();
        if i < 1 || i > len {
            return Err(StoreError::IndexOutOfBounds { item: id, index: i as i64, len });
        }
        self.check_access(task, Region::elem(id, i), false)?;
        self.elem_value(id, i)
    }

    pub fn register_accesses(&mut self, task: TaskId, seq: &Seq, accesses: &[(Region, AccessMode, bool)]) {
        let items = self.by_task.entry(task).or_default();
        for (region, mode, del) in accesses {
            if !items.contains(&region.item) {
                items.push(region.item);
            }
            self.ledger.entry(region.item).or_default().push(AccessRecord {
                task,
                region: *region,
                mode: *mode,
                seq: seq.clone(),
                del: *del,
            });
        }
    }

    fn earlier_conflict(&self, rec: &AccessRecord) -> Option<&AccessRecord> {
        self.ledger(rec.region.item)
            .iter()
            .find(|o| o.task != rec.task && o.seq < rec.seq && o.conflicts_with(rec))
    }

    /// An item that keeps `task` from running, or `None` when it is ready:
    /// every read scalar or record is resolved and no conflicting access
    /// with a smaller seq is pending.
    pub fn first_blocker(&self, task: TaskId) -> Option<ItemId> {
        for rec in self.accesses_of(task) {
            let id = rec.region.item;
            if rec.mode.reads() && id.kind != ItemKind::Array && !self.is_resolved(id) {
                return Some(id);
            }
            if self.earlier_conflict(rec).is_some() {
                return Some(id);
            }
        }
        None
    }

    pub fn is_ready(&self, task: TaskId) -> bool {
        self.first_blocker(task).is_none()
    }

    /// Drop all of `task`'s accesses; returns the items they were on.
    pub fn release(&mut self, task: TaskId) -> Vec<ItemId> {
        let items = self.by_task.remove(&task).unwrap_or_default();
        for i in &items {
            if let Some(l) = self.ledger.get_mut(i) {
                l.retain(|r| r.task != task);
                if l.is_empty() {
                    self.ledger.remove(i);
                }
            }
        }
        items
    }

    fn check_write(&self, task: TaskId, seq: &Seq, region: Region, fresh: &HashSet<ItemId>) -> Result<(), StoreError> {
        let owner_fresh = matches!(
            self.items.get(&region.item),
            Some(Item::Array(ArrayItem { owner: Some(o), .. })) if fresh.contains(o)
        );
        if fresh.contains(&region.item) || owner_fresh {
            return Ok(());
        }
        self.check_access(task, region, true)?;
        let probe = AccessRecord { task, region, mode: AccessMode::Write, seq: seq.clone(), del: false };
        if let Some(e) = self.earlier_conflict(&probe) {
            return Err(StoreError::OutOfOrderCommit { item: region.item, task, earlier: e.task });
        }
        Ok(())
    }

    /// Apply one task's writes atomically: all checks run before anything
    /// is stored. Re-resolving a scalar with bit-identical contents is a
    /// no-op. Returns the items written.
    pub fn apply(&mut self, task: TaskId, seq: &Seq, set: &CommitSet) -> Result<Vec<ItemId>, StoreError> {
        let fresh: HashSet<ItemId> = set
            .new_scalars
            .iter()
            .map(|(i, _)| *i)
            .chain(set.new_arrays.iter().map(|a| a.id))
            .chain(set.new_records.iter().map(|(i, _)| *i))
            .collect();
        let new_arrays: HashMap<ItemId, &NewArray> = set.new_arrays.iter().map(|a| (a.id, a)).collect();
        let mut skip_scalar = vec![false; set.scalars.len()];
        for (k, (id, v)) in set.scalars.iter().enumerate() {
            if fresh.contains(id) {
                continue;
            }
            let Item::Scalar(s) = self.item(*id)? else {
                return Err(kind_error(*id, "scalar", self.item(*id)?));
            };
            if v.coerce(s.ty).is_none() {
                return Err(StoreError::TypeMismatch { item: *id, expected: s.ty.to_string(), found: v.type_name().into() });
            }
            if let Some(old) = s.value {
                if old.same_bits(&v.coerce(s.ty).expect("checked")) {
                    skip_scalar[k] = true;
                    continue;
                }
                return Err(StoreError::ConflictingRecommit { item: *id, old, new: *v });
            }
            self.check_write(task, seq, Region::whole(*id), &fresh)?;
        }
        for (id, i, _) in &set.elems {
            let len = match new_arrays.get(id) {
                Some(a) => a.values.len(),
                None => self.array(*id)?.values.len(),
            };
            if *i < 1 || *i > len {
                return Err(StoreError::IndexOutOfBounds { item: *id, index: *i as i64, len });
            }
            if !new_arrays.contains_key(id) {
                self.check_write(task, seq, Region::elem(*id, *i), &fresh)?;
            }
        }
        for (id, _) in &set.records {
            if !fresh.contains(id) {
                self.record(*id)?;
                self.check_write(task, seq, Region::whole(*id), &fresh)?;
            }
        }

        for (id, ty) in &set.new_scalars {
            self.items.insert(*id, Item::Scalar(ScalarItem { ty: *ty, value: None }));
        }
        for a in &set.new_arrays {
            self.items
                .insert(a.id, Item::Array(ArrayItem { ty: a.ty, values: a.values.clone(), owner: a.owner }));
        }
        for (id, def) in &set.new_records {
            self.items.insert(*id, Item::Record(RecordItem { def: def.clone(), env: None }));
        }
        let mut touched = Vec::new();
        for (k, (id, v)) in set.scalars.iter().enumerate() {
            if skip_scalar[k] {
                continue;
            }
            if let Some(Item::Scalar(s)) = self.items.get_mut(id) {
                s.value = Some(v.coerce(s.ty).unwrap_or(*v));
            }
            touched.push(*id);
        }
        for (id, i, v) in &set.elems {
            if let Some(Item::Array(a)) = self.items.get_mut(id) {
                a.values[i - 1] = Some(v.coerce(a.ty).unwrap_or(*v));
            }
            if !touched.contains(id) {
                touched.push(*id);
            }
        }
        for (id, env) in &set.records {
            if let Some(Item::Record(r)) = self.items.get_mut(id) {
                r.env = Some(env.clone());
            }
            touched.push(*id);
        }
        Ok(touched)
    }

    /// Number of scalars, arrays and records held.
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

fn kind_error(id: ItemId, expected: &str, found: &Item) -> StoreError {
    let found = match found {
        Item::Scalar(_) => "scalar",
        Item::Array(_) => "array",
        Item::Record(_) => "record",
    };
    StoreError::TypeMismatch { item: id, expected: expected.into(), found: found.into() }
}
