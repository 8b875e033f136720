//! Strict partial orders on register values and the maximal-element reducer.
//!
//! A [`ValueOrder`] answers `precedes(a, b)`: `a` is dominated by `b`. When
//! concurrent writes meet, [`resolve_under`] keeps only the values that no
//! other value in the set dominates. The empty order keeps everything (a
//! plain multi-value register); a total order keeps at most one value.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::clock::ReplicaId;

/// The built-in order families.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum OrderKind {
    Empty,
    ExplicitRelation,
    TotalComparator,
    LwwTimestamped,
}

impl OrderKind {
    pub const ALL: [OrderKind; 4] = [
        OrderKind::Empty,
        OrderKind::ExplicitRelation,
        OrderKind::TotalComparator,
        OrderKind::LwwTimestamped,
    ];

    /// Wire tag used by the state codec.
    pub fn tag(self) -> u8 {
        match self {
            OrderKind::Empty => 0,
            OrderKind::ExplicitRelation => 1,
            OrderKind::TotalComparator => 2,
            OrderKind::LwwTimestamped => 3,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.tag() == tag)
    }

    /// Whether every pair of distinct values is expected to be comparable.
    pub fn is_total(self) -> bool {
        matches!(self, OrderKind::TotalComparator | OrderKind::LwwTimestamped)
    }
}

impl fmt::Display for OrderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OrderKind::Empty => "empty",
            OrderKind::ExplicitRelation => "partial",
            OrderKind::TotalComparator => "total",
            OrderKind::LwwTimestamped => "lww",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OrderError {
    #[error("relation contains a cycle: {0}")]
    Cycle(String),
    #[error("edge endpoint {0} is not in the relation's domain")]
    UnknownEndpoint(String),
    #[error("value {0} appears more than once in the relation's domain")]
    DuplicateDomainValue(String),
}

type Comparator<V> = Arc<dyn Fn(&V, &V) -> Ordering + Send + Sync>;

enum Relation<V> {
    Empty,
    Closure(Arc<ClosedRelation<V>>),
    Compare(Comparator<V>),
}

impl<V> Clone for Relation<V> {
    fn clone(&self) -> Self {
        match self {
            Relation::Empty => Relation::Empty,
            Relation::Closure(c) => Relation::Closure(Arc::clone(c)),
            Relation::Compare(c) => Relation::Compare(Arc::clone(c)),
        }
    }
}

/// Transitively closed relation over a finite domain, as a dense matrix.
struct ClosedRelation<V> {
    domain: Vec<V>,
    index: BTreeMap<V, usize>,
    below: Vec<bool>,
}

impl<V: Ord> ClosedRelation<V> {
    fn precedes(&self, a: &V, b: &V) -> bool {
        match (self.index.get(a), self.index.get(b)) {
            (Some(&i), Some(&j)) => self.below[i * self.domain.len() + j],
            _ => false,
        }
    }
}

/// A strict partial order on values, fixed for the lifetime of a register.
pub struct ValueOrder<V> {
    kind: OrderKind,
    relation: Relation<V>,
}

impl<V> Clone for ValueOrder<V> {
    fn clone(&self) -> Self {
        Self {
            kind: self.kind,
            relation: self.relation.clone(),
        }
    }
}

impl<V> fmt::Debug for ValueOrder<V> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ValueOrder").field("kind", &self.kind).finish()
    }
}

impl<V: Ord> PartialEq for ValueOrder<V> {
    /// Explicit relations compare by content. Comparator-backed orders are
    /// equal only to clones of themselves, except LWW which is unique.
    fn eq(&self, other: &Self) -> bool {
        if self.kind != other.kind {
            return false;
        }
        match (&self.relation, &other.relation) {
            (Relation::Empty, Relation::Empty) => true,
            (Relation::Closure(a), Relation::Closure(b)) => {
                Arc::ptr_eq(a, b) || (a.index == b.index && a.below == b.below)
            }
            (Relation::Compare(a), Relation::Compare(b)) => self.kind == OrderKind::LwwTimestamped || Arc::ptr_eq(a, b),
            _ => false,
        }
    }
}

impl<V> ValueOrder<V> {
    /// The order that relates nothing; resolving under it is the identity.
    pub fn empty() -> Self {
        Self {
            kind: OrderKind::Empty,
            relation: Relation::Empty,
        }
    }

    pub fn kind(&self) -> OrderKind {
        self.kind
    }
}

impl<V: Ord> ValueOrder<V> {
    /// `a ≺ b`: `a` is dominated by `b`.
    pub fn precedes(&self, a: &V, b: &V) -> bool {
        match &self.relation {
            Relation::Empty => false,
            Relation::Closure(rel) => rel.precedes(a, b),
            Relation::Compare(cmp) => cmp(a, b) == Ordering::Less,
        }
    }

    /// The finite domain of an explicit relation.
    pub fn domain(&self) -> Option<&[V]> {
        match &self.relation {
            Relation::Closure(rel) => Some(&rel.domain),
            _ => None,
        }
    }

    /// Keeps the values of `values` that are maximal under this order.
    pub fn resolve(&self, values: &BTreeSet<V>) -> BTreeSet<V>
    where
        V: Clone,
    {
        values
            .iter()
            .filter(|v| !values.iter().any(|w| self.precedes(v, w)))
            .cloned()
            .collect()
    }

    /// Lifts resolution to arbitrary items carrying a value: an item is
    /// dropped when its value is dominated by the value of any item kept
    /// in `items`. Items with equal values never remove each other.
    pub fn retain_maximal<T>(&self, items: Vec<T>, value_of: impl Fn(&T) -> &V) -> Vec<T> {
        if matches!(self.relation, Relation::Empty) {
            return items;
        }
        let dominated: Vec<bool> = items
            .iter()
            .map(|item| {
                let v = value_of(item);
                items.iter().any(|other| self.precedes(v, value_of(other)))
            })
            .collect();
        items
            .into_iter()
            .zip(dominated)
            .filter_map(|(item, d)| (!d).then_some(item))
            .collect()
    }
}

/// Application-supplied cover edges `(lesser, greater)` over a finite domain.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExplicitRelation<V> {
    domain: Vec<V>,
    edges: BTreeSet<(V, V)>,
}

impl<V: Ord + Clone + fmt::Debug> ExplicitRelation<V> {
    pub fn new(domain: Vec<V>, edges: impl IntoIterator<Item = (V, V)>) -> Result<Self, OrderError> {
        let mut seen = BTreeSet::new();
        for v in &domain {
            if !seen.insert(v) {
                return Err(OrderError::DuplicateDomainValue(format!("{v:?}")));
            }
        }
        let edges: BTreeSet<(V, V)> = edges.into_iter().collect();
        for (a, b) in &edges {
            for endpoint in [a, b] {
                if !seen.contains(endpoint) {
                    return Err(OrderError::UnknownEndpoint(format!("{endpoint:?}")));
                }
            }
        }
        Ok(Self { domain, edges })
    }

    /// Builds a relation whose domain is the edge endpoints, in order of
    /// first appearance.
    pub fn from_edges(edges: impl IntoIterator<Item = (V, V)>) -> Self {
        let edges: Vec<(V, V)> = edges.into_iter().collect();
        let mut domain: Vec<V> = Vec::new();
        for (a, b) in &edges {
            for endpoint in [a, b] {
                if !domain.contains(endpoint) {
                    domain.push(endpoint.clone());
                }
            }
        }
        Self {
            domain,
            edges: edges.into_iter().collect(),
        }
    }

    pub fn domain(&self) -> &[V] {
        &self.domain
    }

    pub fn edges(&self) -> &BTreeSet<(V, V)> {
        &self.edges
    }

    fn index(&self) -> BTreeMap<V, usize> {
        self.domain.iter().cloned().enumerate().map(|(i, v)| (v, i)).collect()
    }

    /// Warshall closure of the edges, cycles included.
    fn closure_matrix(&self) -> Vec<bool> {
        let n = self.domain.len();
        let index = self.index();
        let mut m = vec![false; n * n];
        for (a, b) in &self.edges {
            m[index[a] * n + index[b]] = true;
        }
        for k in 0..n {
            for i in 0..n {
                if m[i * n + k] {
                    for j in 0..n {
                        if m[k * n + j] {
                            m[i * n + j] = true;
                        }
                    }
                }
            }
        }
        m
    }

    /// One cycle of the edge graph, if any, as a closed walk `v0 .. vk v0`.
    fn find_cycle(&self) -> Option<Vec<V>> {
        let n = self.domain.len();
        let index = self.index();
        let mut succ = vec![Vec::new(); n];
        for (a, b) in &self.edges {
            succ[index[a]].push(index[b]);
        }
        // 0 = unvisited, 1 = on stack, 2 = done
        let mut state = vec![0u8; n];
        let mut path: Vec<usize> = Vec::new();
        fn dfs(u: usize, succ: &[Vec<usize>], state: &mut [u8], path: &mut Vec<usize>) -> Option<Vec<usize>> {
            state[u] = 1;
            path.push(u);
            for &w in &succ[u] {
                if state[w] == 1 {
                    let start = path.iter().position(|&p| p == w).unwrap();
                    let mut cycle = path[start..].to_vec();
                    cycle.push(w);
                    return Some(cycle);
                }
                if state[w] == 0 {
                    if let Some(c) = dfs(w, succ, state, path) {
                        return Some(c);
                    }
                }
            }
            path.pop();
            state[u] = 2;
            None
        }
        for start in 0..n {
            if state[start] == 0 {
                if let Some(c) = dfs(start, &succ, &mut state, &mut path) {
                    return Some(c.into_iter().map(|i| self.domain[i].clone()).collect());
                }
            }
        }
        None
    }

    /// Checks the order laws on the closure of the raw edges, without
    /// rejecting cycles first.
    pub fn validate(&self) -> ValidationReport<V> {
        let n = self.domain.len();
        let index = self.index();
        let m = self.closure_matrix();
        let precedes = |a: &V, b: &V| match (index.get(a), index.get(b)) {
            (Some(&i), Some(&j)) => m[i * n + j],
            _ => false,
        };
        check_laws(precedes, &self.domain, false)
    }
}

/// The order induced by the transitive closure of `rel`'s edges. Values
/// outside the domain are incomparable to everything.
pub fn explicit_relation_order<V>(rel: &ExplicitRelation<V>) -> Result<ValueOrder<V>, OrderError>
where
    V: Ord + Clone + fmt::Debug,
{
    if let Some(cycle) = rel.find_cycle() {
        let rendered: Vec<String> = cycle.iter().map(|v| format!("{v:?}")).collect();
        return Err(OrderError::Cycle(rendered.join(" -> ")));
    }
    let closed = ClosedRelation {
        domain: rel.domain.clone(),
        index: rel.index(),
        below: rel.closure_matrix(),
    };
    Ok(ValueOrder {
        kind: OrderKind::ExplicitRelation,
        relation: Relation::Closure(Arc::new(closed)),
    })
}

/// `precedes(a, b)` iff `compare(a, b) == Less`.
pub fn total_comparator_order<V>(compare: impl Fn(&V, &V) -> Ordering + Send + Sync + 'static) -> ValueOrder<V> {
    ValueOrder {
        kind: OrderKind::TotalComparator,
        relation: Relation::Compare(Arc::new(compare)),
    }
}

/// Total order following the value type's own `Ord`.
pub fn natural_order<V: Ord>() -> ValueOrder<V> {
    total_comparator_order(|a: &V, b: &V| a.cmp(b))
}

/// Total order ranking `ranking[0] < ranking[1] < ...`. Values missing
/// from the ranking sort above every ranked value, by their own `Ord`.
pub fn ranked_order<V>(ranking: Vec<V>) -> ValueOrder<V>
where
    V: Ord + Send + Sync + 'static,
{
    let rank: BTreeMap<V, usize> = ranking.into_iter().enumerate().map(|(i, v)| (v, i)).collect();
    total_comparator_order(move |a: &V, b: &V| {
        let ra = rank.get(a).copied().unwrap_or(usize::MAX);
        let rb = rank.get(b).copied().unwrap_or(usize::MAX);
        ra.cmp(&rb).then_with(|| a.cmp(b))
    })
}

/// A value written together with the writer's clock reading.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LwwValue<P> {
    pub payload: P,
    pub timestamp: u64,
    pub writer: ReplicaId,
    pub sequence: u64,
}

impl<P> LwwValue<P> {
    pub fn new(payload: P, timestamp: u64, writer: impl Into<ReplicaId>, sequence: u64) -> Self {
        Self {
            payload,
            timestamp,
            writer: writer.into(),
            sequence,
        }
    }

    /// Arbitration key; the payload never participates.
    pub fn rank(&self) -> (u64, &ReplicaId, u64) {
        (self.timestamp, &self.writer, self.sequence)
    }
}

impl<P: fmt::Display> fmt::Display for LwwValue<P> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}", self.payload, self.timestamp)
    }
}

/// Orders timestamped values by `(timestamp, writer, sequence)`.
pub fn lww_order<P: 'static>() -> ValueOrder<LwwValue<P>> {
    ValueOrder {
        kind: OrderKind::LwwTimestamped,
        relation: Relation::Compare(Arc::new(|a: &LwwValue<P>, b: &LwwValue<P>| a.rank().cmp(&b.rank()))),
    }
}

/// `{ v ∈ values | no w ∈ values with v ≺ w }`.
pub fn resolve_under<V: Ord + Clone>(order: &ValueOrder<V>, values: &BTreeSet<V>) -> BTreeSet<V> {
    order.resolve(values)
}

/// A broken order law, with a witness.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation<V> {
    /// `v ≺ v`.
    Irreflexivity { value: V },
    /// `a ≺ b` and `b ≺ a`.
    Asymmetry { lesser: V, greater: V },
    /// `a ≺ b`, `b ≺ c` but not `a ≺ c`.
    Transitivity { a: V, b: V, c: V },
    /// Distinct values left incomparable by an order declared total.
    Totality { a: V, b: V },
}

impl<V: fmt::Display> fmt::Display for Violation<V> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Irreflexivity { value } => write!(f, "irreflexivity: {value} < {value}"),
            Violation::Asymmetry { lesser, greater } => {
                write!(f, "asymmetry: {lesser} < {greater} and {greater} < {lesser}")
            }
            Violation::Transitivity { a, b, c } => {
                write!(f, "transitivity: {a} < {b} and {b} < {c} but not {a} < {c}")
            }
            Violation::Totality { a, b } => write!(f, "totality: {a} and {b} are incomparable"),
        }
    }
}

impl<V> Violation<V> {
    pub fn law(&self) -> &'static str {
        match self {
            Violation::Irreflexivity { .. } => "irreflexivity",
            Violation::Asymmetry { .. } => "asymmetry",
            Violation::Transitivity { .. } => "transitivity",
            Violation::Totality { .. } => "totality",
        }
    }
}

/// Outcome of checking the order laws on a finite sample. Holds at most one
/// witness per violated law.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ValidationReport<V> {
    pub violations: Vec<Violation<V>>,
    pub sample_size: usize,
}

impl<V> ValidationReport<V> {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

fn check_laws<V: Clone + Eq>(
    precedes: impl Fn(&V, &V) -> bool,
    sample: &[V],
    require_total: bool,
) -> ValidationReport<V> {
    let mut violations = Vec::new();

    if let Some(v) = sample.iter().find(|v| precedes(v, v)) {
        violations.push(Violation::Irreflexivity { value: v.clone() });
    }

    'asym: for (i, a) in sample.iter().enumerate() {
        for b in &sample[i + 1..] {
            if a != b && precedes(a, b) && precedes(b, a) {
                violations.push(Violation::Asymmetry {
                    lesser: a.clone(),
                    greater: b.clone(),
                });
                break 'asym;
            }
        }
    }

    'trans: for a in sample {
        for b in sample {
            if !precedes(a, b) {
                continue;
            }
            for c in sample {
                if precedes(b, c) && !precedes(a, c) {
                    violations.push(Violation::Transitivity {
                        a: a.clone(),
                        b: b.clone(),
                        c: c.clone(),
                    });
                    break 'trans;
                }
            }
        }
    }

    if require_total {
        'total: for (i, a) in sample.iter().enumerate() {
            for b in &sample[i + 1..] {
                if a != b && !precedes(a, b) && !precedes(b, a) {
                    violations.push(Violation::Totality {
                        a: a.clone(),
                        b: b.clone(),
                    });
                    break 'total;
                }
            }
        }
    }

    ValidationReport {
        violations,
        sample_size: sample.len(),
    }
}

/// Checks irreflexivity, asymmetry and transitivity on every pair and
/// triple of `sample` (and totality, for total kinds). An empty sample
/// falls back to the domain of an explicit relation.
pub fn validate_order<V: Ord + Clone>(order: &ValueOrder<V>, sample: &[V]) -> ValidationReport<V> {
    let sample = match (sample.is_empty(), order.domain()) {
        (true, Some(domain)) => domain,
        _ => sample,
    };
    check_laws(|a, b| order.precedes(a, b), sample, order.kind().is_total())
}

/// Ready-made orders from a bug tracker.
pub mod bug_tracker {
    use super::*;

    pub const OPEN: &str = "open";
    pub const ASSIGNED: &str = "assigned";
    pub const CLOSED_FIXED: &str = "closed-fixed";
    pub const CLOSED_IRREPRODUCIBLE: &str = "closed-irreproducible";

    pub const STATUSES: [&str; 4] = [OPEN, ASSIGNED, CLOSED_FIXED, CLOSED_IRREPRODUCIBLE];
    pub const PRIORITIES: [&str; 3] = ["low", "medium", "high"];

    /// Cover edges: `assigned` dominates `open`; both closed variants
    /// dominate `assigned` and are incomparable with each other.
    pub fn status_relation() -> ExplicitRelation<String> {
        ExplicitRelation::new(
            STATUSES.iter().map(|s| s.to_string()).collect(),
            [
                (OPEN, ASSIGNED),
                (ASSIGNED, CLOSED_FIXED),
                (ASSIGNED, CLOSED_IRREPRODUCIBLE),
            ]
            .map(|(a, b)| (a.to_string(), b.to_string())),
        )
        .expect("status relation is well formed")
    }

    pub fn status_order() -> ValueOrder<String> {
        explicit_relation_order(&status_relation()).expect("status relation is acyclic")
    }

    pub fn priority_order() -> ValueOrder<String> {
        ranked_order(PRIORITIES.iter().map(|s| s.to_string()).collect())
    }
}
