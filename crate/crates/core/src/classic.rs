//! Baseline multi-value register carrying a full version vector per value.

use std::collections::BTreeSet;
use std::fmt;

use crate::clock::{ReplicaId, VersionVector};
use crate::order::ValueOrder;
use crate::register::MergeError;

pub struct ClassicMvrState<V> {
    entries: BTreeSet<(VersionVector, V)>,
    policy: ValueOrder<V>,
}

impl<V: Clone> Clone for ClassicMvrState<V> {
    fn clone(&self) -> Self {
        Self {
            entries: self.entries.clone(),
            policy: self.policy.clone(),
        }
    }
}

impl<V: fmt::Debug> fmt::Debug for ClassicMvrState<V> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ClassicMvrState")
            .field("entries", &self.entries)
            .field("policy", &self.policy.kind())
            .finish()
    }
}

impl<V: Ord> PartialEq for ClassicMvrState<V> {
    fn eq(&self, other: &Self) -> bool {
        self.entries == other.entries && self.policy == other.policy
    }
}

impl<V: Ord> Eq for ClassicMvrState<V> {}

impl<V: Clone + Ord> ClassicMvrState<V> {
    pub fn initial(policy: ValueOrder<V>) -> Self {
        Self {
            entries: BTreeSet::new(),
            policy,
        }
    }

    pub fn entries(&self) -> &BTreeSet<(VersionVector, V)> {
        &self.entries
    }

    /// Join of every retained vector.
    pub fn observed(&self) -> VersionVector {
        let mut vv = VersionVector::new();
        for (entry, _) in &self.entries {
            vv.join_assign(entry);
        }
        vv
    }

    pub fn write(&self, replica: &ReplicaId, value: V) -> Self {
        let mut vv = self.observed();
        vv.increment(replica);
        Self {
            entries: BTreeSet::from([(vv, value)]),
            policy: self.policy.clone(),
        }
    }

    /// Keeps the entries of each side that no entry of the other side
    /// strictly dominates.
    pub fn merge(&self, other: &Self) -> Result<Self, MergeError> {
        if self.policy != other.policy {
            return Err(MergeError::PolicyMismatch {
                left: self.policy.kind(),
                right: other.policy.kind(),
            });
        }
        let survivors = |ours: &BTreeSet<(VersionVector, V)>, theirs: &BTreeSet<(VersionVector, V)>| {
            ours.iter()
                .filter(|(vv, _)| !theirs.iter().any(|(w, _)| vv.is_dominated_by(w)))
                .cloned()
                .collect::<Vec<_>>()
        };
        let mut entries = BTreeSet::new();
        entries.extend(survivors(&self.entries, &other.entries));
        entries.extend(survivors(&other.entries, &self.entries));
        Ok(Self {
            entries,
            policy: self.policy.clone(),
        })
    }

    /// Stored values, unresolved.
    pub fn values(&self) -> BTreeSet<V> {
        self.entries.iter().map(|(_, v)| v.clone()).collect()
    }

    /// Stored values reduced to their maximal elements.
    pub fn read(&self) -> BTreeSet<V> {
        self.policy.resolve(&self.values())
    }

    pub fn version_vector_count(&self) -> usize {
        self.entries.len()
    }
}
