//! State-based multi-value register with order-based conflict resolution.
//!
//! Each stored value is tagged by a single [`Dot`]; one [`VersionVector`]
//! (the causal context) records every dot the state has ever observed.
//! A dot that is covered by a peer's context but missing from the peer's
//! value set was overwritten there and is dropped on merge.
//!
//! Two merge flavours share the state type:
//!
//! * [`RegisterState::merge`] resolves dominated values inside the merge,
//!   so they are gone for good once their dots enter the context.
//! * [`RegisterState::lazy_merge`] keeps every concurrent value and
//!   [`RegisterState::lazy_read`] resolves at read time.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::clock::{Dot, ReplicaId, VersionVector};
use crate::order::{OrderKind, ValueOrder};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MergeError {
    #[error("cannot merge registers with different value orders ({left} vs {right})")]
    PolicyMismatch { left: OrderKind, right: OrderKind },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InvariantViolation {
    #[error("dot {0} is not covered by the causal context")]
    UncoveredDot(String),
    #[error("dot {0} has a zero counter")]
    ZeroCounter(String),
    #[error("value at {dominated} is dominated by the value at {by}")]
    Unresolved { dominated: String, by: String },
}

pub struct RegisterState<V> {
    values: BTreeMap<Dot, V>,
    context: VersionVector,
    policy: ValueOrder<V>,
}

impl<V: Clone> Clone for RegisterState<V> {
    fn clone(&self) -> Self {
        Self {
            values: self.values.clone(),
            context: self.context.clone(),
            policy: self.policy.clone(),
        }
    }
}

impl<V: fmt::Debug> fmt::Debug for RegisterState<V> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RegisterState")
            .field("values", &self.values)
            .field("context", &self.context)
            .field("policy", &self.policy.kind())
            .finish()
    }
}

impl<V: Ord> PartialEq for RegisterState<V> {
    fn eq(&self, other: &Self) -> bool {
        self.values == other.values && self.context == other.context && self.policy == other.policy
    }
}

impl<V: Ord> Eq for RegisterState<V> {}

impl<V: Clone + Ord> RegisterState<V> {
    pub fn initial(policy: ValueOrder<V>) -> Self {
        Self {
            values: BTreeMap::new(),
            context: VersionVector::new(),
            policy,
        }
    }

    /// Assembles a state from parts without checking invariants.
    pub(crate) fn from_parts(values: BTreeMap<Dot, V>, context: VersionVector, policy: ValueOrder<V>) -> Self {
        Self {
            values,
            context,
            policy,
        }
    }

    pub fn entries(&self) -> &BTreeMap<Dot, V> {
        &self.values
    }

    pub fn context(&self) -> &VersionVector {
        &self.context
    }

    pub fn policy(&self) -> &ValueOrder<V> {
        &self.policy
    }

    /// Replaces the whole value set with `value` under a fresh dot.
    pub fn write(&self, replica: &ReplicaId, value: V) -> Self {
        let mut context = self.context.clone();
        let dot = context.increment(replica);
        Self {
            values: BTreeMap::from([(dot, value)]),
            context,
            policy: self.policy.clone(),
        }
    }

    pub fn read(&self) -> BTreeSet<V> {
        self.values.values().cloned().collect()
    }

    /// Join that resolves dominated values as part of the merge.
    pub fn merge(&self, other: &Self) -> Result<Self, MergeError> {
        let mut merged = self.lazy_merge(other)?;
        let kept: Vec<(Dot, V)> = merged.values.into_iter().collect();
        merged.values = self.policy.retain_maximal(kept, |(_, v)| v).into_iter().collect();
        Ok(merged)
    }

    /// Join that keeps every value not overwritten on either side.
    pub fn lazy_merge(&self, other: &Self) -> Result<Self, MergeError> {
        if self.policy != other.policy {
            return Err(MergeError::PolicyMismatch {
                left: self.policy.kind(),
                right: other.policy.kind(),
            });
        }
        let mut values = BTreeMap::new();
        for (ours, theirs, their_context) in [
            (&self.values, &other.values, &other.context),
            (&other.values, &self.values, &self.context),
        ] {
            for (dot, v) in ours {
                let in_both = theirs.get(dot) == Some(v);
                if in_both || !their_context.contains(dot) {
                    values.insert(dot.clone(), v.clone());
                }
            }
        }
        Ok(Self {
            values,
            context: self.context.join(&other.context),
            policy: self.policy.clone(),
        })
    }

    /// Stored values reduced to their maximal elements.
    pub fn lazy_read(&self) -> BTreeSet<V> {
        self.policy.resolve(&self.read())
    }

    /// Metadata carried per state: one scalar clock per stored value plus
    /// a single version vector.
    pub fn version_vector_count(&self) -> usize {
        1
    }

    pub fn scalar_clock_count(&self) -> usize {
        self.values.len()
    }

    /// Dot coverage and positive counters always; resolved form only when
    /// `resolved` is set (states produced by the eager merge).
    pub fn check_invariants(&self, resolved: bool) -> Result<(), InvariantViolation> {
        for dot in self.values.keys() {
            if dot.counter == 0 {
                return Err(InvariantViolation::ZeroCounter(dot.to_string()));
            }
            if !self.context.contains(dot) {
                return Err(InvariantViolation::UncoveredDot(dot.to_string()));
            }
        }
        if resolved {
            for (dot, v) in &self.values {
                if let Some((by, _)) = self.values.iter().find(|(_, w)| self.policy.precedes(v, w)) {
                    return Err(InvariantViolation::Unresolved {
                        dominated: dot.to_string(),
                        by: by.to_string(),
                    });
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::order::bug_tracker::{self, ASSIGNED, CLOSED_IRREPRODUCIBLE};
    use crate::order::{lww_order, LwwValue};

    fn r(id: &str) -> ReplicaId {
        ReplicaId::from(id)
    }

    fn vv(pairs: &[(&str, u64)]) -> VersionVector {
        pairs.iter().map(|&(id, c)| (r(id), c)).collect()
    }

    fn state<V: Clone + Ord>(
        entries: &[(&str, u64, V)],
        context: &[(&str, u64)],
        policy: ValueOrder<V>,
    ) -> RegisterState<V> {
        RegisterState::from_parts(
            entries
                .iter()
                .map(|(id, c, v)| (Dot::new(*id, *c), v.clone()))
                .collect(),
            vv(context),
            policy,
        )
    }

    fn empty() -> RegisterState<&'static str> {
        RegisterState::initial(ValueOrder::empty())
    }

    #[test]
    fn initial_state_is_empty() {
        let s = empty();
        assert!(s.entries().is_empty());
        assert!(s.context().is_empty());
        assert!(s.read().is_empty());
        assert_eq!(s.merge(&s).unwrap(), s);
    }

    #[test]
    fn write_tags_value_with_next_dot() {
        let s = empty().write(&r("a"), "x");
        assert_eq!(s, state(&[("a", 1, "x")], &[("a", 1)], ValueOrder::empty()));
        let s = s.write(&r("a"), "y");
        assert_eq!(s, state(&[("a", 2, "y")], &[("a", 2)], ValueOrder::empty()));
        assert_eq!(s.read(), ["y"].into());
    }

    #[test]
    fn read_strips_dots_and_collapses() {
        let s = state(
            &[("a", 1, "x"), ("b", 1, "y")],
            &[("a", 1), ("b", 1)],
            ValueOrder::empty(),
        );
        assert_eq!(s.read(), ["x", "y"].into());
        let dup = state(
            &[("a", 1, "v"), ("b", 1, "v")],
            &[("a", 1), ("b", 1)],
            ValueOrder::empty(),
        );
        assert_eq!(dup.read(), ["v"].into());
    }

    #[test]
    fn concurrent_writes_are_both_kept() {
        let left = empty().write(&r("a"), "x");
        let right = empty().write(&r("b"), "y");
        let merged = left.merge(&right).unwrap();
        assert_eq!(
            merged,
            state(
                &[("a", 1, "x"), ("b", 1, "y")],
                &[("a", 1), ("b", 1)],
                ValueOrder::empty()
            )
        );
    }

    #[test]
    fn overwritten_value_is_dropped() {
        let a = empty().write(&r("a"), "x");
        let b = empty().merge(&a).unwrap().write(&r("b"), "y");
        let merged = a.merge(&b).unwrap();
        assert_eq!(
            merged,
            state(&[("b", 1, "y")], &[("a", 1), ("b", 1)], ValueOrder::empty())
        );
        assert_eq!(b.merge(&a).unwrap(), merged);
    }

    #[test]
    fn eager_merge_resolves_but_lazy_merge_defers() {
        let order = bug_tracker::status_order();
        let left = RegisterState::initial(order.clone()).write(&r("a"), ASSIGNED.to_string());
        let right = RegisterState::initial(order.clone()).write(&r("b"), CLOSED_IRREPRODUCIBLE.to_string());

        let eager = left.merge(&right).unwrap();
        assert_eq!(
            eager,
            state(
                &[("b", 1, CLOSED_IRREPRODUCIBLE.to_string())],
                &[("a", 1), ("b", 1)],
                order.clone()
            )
        );
        eager.check_invariants(true).unwrap();

        let lazy = left.lazy_merge(&right).unwrap();
        assert_eq!(lazy.entries().len(), 2);
        assert_eq!(lazy.lazy_read(), [CLOSED_IRREPRODUCIBLE.to_string()].into());
        assert!(lazy.check_invariants(true).is_err());
        lazy.check_invariants(false).unwrap();
    }

    #[test]
    fn lazy_merge_with_initial_is_identity() {
        let s = empty().write(&r("a"), "x").merge(&empty().write(&r("b"), "y")).unwrap();
        assert_eq!(s.lazy_merge(&empty()).unwrap(), s);
        assert_eq!(s.merge(&s).unwrap(), s);
    }

    #[test]
    fn equal_values_under_distinct_dots_survive_resolution() {
        let order = bug_tracker::status_order();
        let a = RegisterState::initial(order.clone()).write(&r("a"), ASSIGNED.to_string());
        let b = RegisterState::initial(order).write(&r("b"), ASSIGNED.to_string());
        let merged = a.merge(&b).unwrap();
        assert_eq!(merged.entries().len(), 2);
        assert_eq!(merged.read(), [ASSIGNED.to_string()].into());
    }

    #[test]
    fn merging_different_policies_is_rejected() {
        let a = RegisterState::initial(bug_tracker::status_order());
        let b = RegisterState::initial(ValueOrder::empty());
        assert_eq!(
            a.merge(&b),
            Err(MergeError::PolicyMismatch {
                left: OrderKind::ExplicitRelation,
                right: OrderKind::Empty
            })
        );
        assert!(a.lazy_merge(&b).is_err());
    }

    #[test]
    fn causally_later_small_timestamp_wins() {
        let order = lww_order::<&str>();
        let at_b = RegisterState::initial(order.clone()).write(&r("B"), LwwValue::new("v1", 100, "B", 1));
        let at_a = RegisterState::initial(order).merge(&at_b).unwrap();
        let at_a = at_a.write(&r("A"), LwwValue::new("v2", 50, "A", 1));
        assert_eq!(at_a.read(), [LwwValue::new("v2", 50, "A", 1)].into());
        let back = at_b.merge(&at_a).unwrap();
        assert_eq!(back.read(), at_a.read());
    }

    #[test]
    fn invariant_checks_catch_uncovered_dots() {
        let bad = state(&[("a", 2, "x")], &[("a", 1)], ValueOrder::empty());
        assert!(matches!(
            bad.check_invariants(false),
            Err(InvariantViolation::UncoveredDot(_))
        ));
    }
}
