//! Reference semantics: a register's value as a function of the set of
//! observed writes and their happens-before relation.
//!
//! Everything here is deliberately naive (quadratic or cubic scans). It is
//! ground truth for the optimized implementations and is never tuned.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::clock::ReplicaId;
use crate::order::ValueOrder;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EventId(pub u64);

impl fmt::Display for EventId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "w{}", self.0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WriteEvent<V> {
    pub id: EventId,
    pub replica: ReplicaId,
    pub value: V,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("event {0} appears more than once")]
    DuplicateEvent(EventId),
    #[error("event {0} is not part of the graph")]
    UnknownEvent(EventId),
    #[error("happens-before is cyclic through event {0}")]
    Cycle(EventId),
    #[error("observed set is not causally closed: {missing} happens before {required_by} but is missing")]
    NotCausallyClosed { missing: EventId, required_by: EventId },
}

/// Write events with a happens-before relation, stored transitively closed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EventGraph<V> {
    events: BTreeMap<EventId, WriteEvent<V>>,
    hb: BTreeSet<(EventId, EventId)>,
}

impl<V> Default for EventGraph<V> {
    fn default() -> Self {
        Self {
            events: BTreeMap::new(),
            hb: BTreeSet::new(),
        }
    }
}

impl<V: Clone + Ord> EventGraph<V> {
    /// Builds a graph from `events` and any generating relation; the
    /// relation is closed under transitivity and must stay acyclic.
    pub fn new(
        events: impl IntoIterator<Item = WriteEvent<V>>,
        generating: impl IntoIterator<Item = (EventId, EventId)>,
    ) -> Result<Self, GraphError> {
        let mut map = BTreeMap::new();
        for event in events {
            let id = event.id;
            if map.insert(id, event).is_some() {
                return Err(GraphError::DuplicateEvent(id));
            }
        }
        let mut hb = BTreeSet::new();
        for (a, b) in generating {
            for id in [a, b] {
                if !map.contains_key(&id) {
                    return Err(GraphError::UnknownEvent(id));
                }
            }
            hb.insert((a, b));
        }

        let ids: Vec<EventId> = map.keys().copied().collect();
        for &k in &ids {
            let into_k: Vec<EventId> = ids.iter().copied().filter(|&i| hb.contains(&(i, k))).collect();
            let from_k: Vec<EventId> = ids.iter().copied().filter(|&j| hb.contains(&(k, j))).collect();
            for &i in &into_k {
                for &j in &from_k {
                    hb.insert((i, j));
                }
            }
        }
        if let Some(&(a, _)) = hb.iter().find(|(a, b)| a == b) {
            return Err(GraphError::Cycle(a));
        }
        Ok(Self { events: map, hb })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn events(&self) -> impl Iterator<Item = &WriteEvent<V>> + '_ {
        self.events.values()
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn happens_before(&self, a: EventId, b: EventId) -> bool {
        self.hb.contains(&(a, b))
    }

    pub fn relation(&self) -> &BTreeSet<(EventId, EventId)> {
        &self.hb
    }

    /// The events no other event in the graph happens after.
    pub fn maximal_events(&self) -> impl Iterator<Item = &WriteEvent<V>> + '_ {
        self.events
            .values()
            .filter(|e| !self.events.keys().any(|&other| self.happens_before(e.id, other)))
    }
}

/// Values of the happens-before-maximal writes.
pub fn f_mvr<V: Clone + Ord>(graph: &EventGraph<V>) -> BTreeSet<V> {
    graph.maximal_events().map(|e| e.value.clone()).collect()
}

/// `f_mvr` followed by resolution under `order`.
pub fn f_mvrr<V: Clone + Ord>(graph: &EventGraph<V>, order: &ValueOrder<V>) -> BTreeSet<V> {
    order.resolve(&f_mvr(graph))
}

/// Restricts `graph` to the events in `observed`, which must contain every
/// predecessor of each of its members.
pub fn observed_subgraph<V: Clone + Ord>(
    graph: &EventGraph<V>,
    observed: &BTreeSet<EventId>,
) -> Result<EventGraph<V>, GraphError> {
    for &id in observed {
        if !graph.events.contains_key(&id) {
            return Err(GraphError::UnknownEvent(id));
        }
    }
    for &(a, b) in &graph.hb {
        if observed.contains(&b) && !observed.contains(&a) {
            return Err(GraphError::NotCausallyClosed {
                missing: a,
                required_by: b,
            });
        }
    }
    let events = graph
        .events
        .iter()
        .filter(|(id, _)| observed.contains(id))
        .map(|(&id, e)| (id, e.clone()))
        .collect();
    let hb = graph
        .hb
        .iter()
        .filter(|(a, b)| observed.contains(a) && observed.contains(b))
        .copied()
        .collect();
    Ok(EventGraph { events, hb })
}
