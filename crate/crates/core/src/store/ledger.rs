//! Access ledger entries and the region conflict rule.

use std::fmt;

use super::ItemId;

/// Task identifier, unique per pool.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize)]
pub struct TaskId(pub u64);

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t{}", self.0)
    }
}

/// Program-order position. Root `i` is `[i]`; the `j`-th child of a task
/// with seq `s` is `s ++ [j]`, so children splice into their parent's
/// slot and compare before anything the parent preceded.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Seq(pub Vec<u32>);

impl Seq {
    pub fn root(i: u32) -> Seq {
        Seq(vec![i])
    }

    pub fn child(&self, j: u32) -> Seq {
        let mut v = self.0.clone();
        v.push(j);
        Seq(v)
    }
}

impl fmt::Display for Seq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(u32::to_string).collect();
        f.write_str(&parts.join("."))
    }
}

/// Inclusive 1-based index range of one item. Scalars and records are the
/// single-element region `1..=1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Region {
    pub item: ItemId,
    pub lo: usize,
    pub hi: usize,
}

impl Region {
    pub fn whole(item: ItemId) -> Region {
        Region { item, lo: 1, hi: 1 }
    }

    pub fn elem(item: ItemId, i: usize) -> Region {
        Region { item, lo: i, hi: i }
    }

    pub fn range(item: ItemId, lo: usize, hi: usize) -> Region {
        debug_assert!(1 <= lo && lo <= hi, "bad region {lo}..{hi}");
        Region { item, lo, hi }
    }

    pub fn len(&self) -> usize {
        self.hi + 1 - self.lo
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, other: &Region) -> bool {
        self.item == other.item && self.lo <= other.lo && other.hi <= self.hi
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.lo == self.hi {
            write!(f, "{}({})", self.item, self.lo)
        } else {
            write!(f, "{}[{}:{}]", self.item, self.lo, self.hi)
        }
    }
}

/// True iff both regions name the same item and their ranges intersect.
pub fn regions_overlap(a: &Region, b: &Region) -> bool {
    a.item == b.item && a.lo <= b.hi && b.lo <= a.hi
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AccessMode {
    Read,
    Write,
    ReadWrite,
}

impl AccessMode {
    pub fn writes(self) -> bool {
        self != AccessMode::Read
    }

    pub fn reads(self) -> bool {
        self != AccessMode::Write
    }

    pub fn conflicts(self, other: AccessMode) -> bool {
        self.writes() || other.writes()
    }
}

/// A pending access. Completed accesses are dropped from the ledger, so
/// every record present is pending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AccessRecord {
    pub task: TaskId,
    pub region: Region,
    pub mode: AccessMode,
    pub seq: Seq,
    /// Claimed for a `del` parameter: orders other tasks but gives the
    /// holder no right to read or write.
    pub del: bool,
}

impl AccessRecord {
    pub fn conflicts_with(&self, other: &AccessRecord) -> bool {
        regions_overlap(&self.region, &other.region) && self.mode.conflicts(other.mode)
    }
}
