//! Replica identifiers, dots and version vectors.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

/// Opaque replica identifier. Ordering is only used for canonical
/// encodings and for LWW tie-breaks.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct ReplicaId(String);

impl ReplicaId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ReplicaId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ReplicaId {
    fn from(s: &str) -> Self {
        Self(s.to_owned())
    }
}

impl From<String> for ReplicaId {
    fn from(s: String) -> Self {
        Self(s)
    }
}

/// A scalar logical clock: the `counter`-th write issued at `replica`.
///
/// Counters start at 1.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Dot {
    pub replica: ReplicaId,
    pub counter: u64,
}

impl Dot {
    pub fn new(replica: impl Into<ReplicaId>, counter: u64) -> Self {
        debug_assert!(counter >= 1, "dot counters start at 1");
        Self {
            replica: replica.into(),
            counter,
        }
    }
}

impl fmt::Display for Dot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.replica, self.counter)
    }
}

/// Map from replica to the highest counter observed from it.
///
/// Absent entries read as zero and zero entries are never stored, so two
/// vectors describing the same knowledge are structurally equal.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VersionVector {
    entries: BTreeMap<ReplicaId, u64>,
}

impl VersionVector {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, replica: &ReplicaId) -> u64 {
        self.entries.get(replica).copied().unwrap_or(0)
    }

    /// Sets the entry for `replica`; a zero counter removes it.
    pub fn set(&mut self, replica: ReplicaId, counter: u64) {
        if counter == 0 {
            self.entries.remove(&replica);
        } else {
            self.entries.insert(replica, counter);
        }
    }

    /// Bumps `replica`'s counter and returns the dot of the new event.
    pub fn increment(&mut self, replica: &ReplicaId) -> Dot {
        let next = self.get(replica) + 1;
        self.entries.insert(replica.clone(), next);
        Dot {
            replica: replica.clone(),
            counter: next,
        }
    }

    /// Whether the event identified by `dot` is covered by this vector.
    pub fn contains(&self, dot: &Dot) -> bool {
        dot.counter <= self.get(&dot.replica)
    }

    pub fn join(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.join_assign(other);
        out
    }

    pub fn join_assign(&mut self, other: &Self) {
        for (replica, &counter) in &other.entries {
            let slot = self.entries.entry(replica.clone()).or_insert(0);
            *slot = (*slot).max(counter);
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ReplicaId, u64)> + '_ {
        self.entries.iter().map(|(r, &c)| (r, c))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Causal comparison: `Less` when `self` is pointwise below `other`
    /// and differs somewhere, `None` when the vectors are concurrent.
    pub fn causal_cmp(&self, other: &Self) -> Option<Ordering> {
        let mut le = true;
        let mut ge = true;
        for (replica, counter) in self.iter() {
            let theirs = other.get(replica);
            le &= counter <= theirs;
            ge &= counter >= theirs;
        }
        for (replica, counter) in other.iter() {
            let ours = self.get(replica);
            le &= ours <= counter;
            ge &= ours >= counter;
        }
        match (le, ge) {
            (true, true) => Some(Ordering::Equal),
            (true, false) => Some(Ordering::Less),
            (false, true) => Some(Ordering::Greater),
            (false, false) => None,
        }
    }

    /// Strictly dominated by `other`.
    pub fn is_dominated_by(&self, other: &Self) -> bool {
        self.causal_cmp(other) == Some(Ordering::Less)
    }
}

impl fmt::Display for VersionVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (replica, counter)) in self.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{replica}:{counter}")?;
        }
        f.write_str("}")
    }
}

impl FromIterator<(ReplicaId, u64)> for VersionVector {
    fn from_iter<I: IntoIterator<Item = (ReplicaId, u64)>>(iter: I) -> Self {
        let mut vv = VersionVector::new();
        for (replica, counter) in iter {
            let merged = vv.get(&replica).max(counter);
            vv.set(replica, merged);
        }
        vv
    }
}

/// Pointwise maximum of two version vectors.
pub fn vv_join(a: &VersionVector, b: &VersionVector) -> VersionVector {
    a.join(b)
}
