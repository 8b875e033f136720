//! Deterministic multi-replica simulation.
//!
//! A [`Schedule`] is a totally ordered list of writes, state transfers and
//! reads. [`run_schedule`] plays it against four models side by side: the
//! eager register, the lazy register, the classic per-value-vector
//! register and the event-graph oracle. Every read records all four
//! answers so they can be compared.

mod generate;
pub mod scenario;
mod witness;

use std::collections::BTreeSet;
use std::fmt;
use std::hash::Hash;

use thiserror::Error;

use crate::classic::ClassicMvrState;
use crate::clock::ReplicaId;
use crate::oracle::{f_mvrr, observed_subgraph, EventGraph, EventId, WriteEvent};
use crate::order::{LwwValue, OrderKind, ValueOrder};
use crate::register::{MergeError, RegisterState};

pub use generate::{corpus_case, random_schedule, replica_ids, CorpusCase, CorpusRun};
pub use witness::{
    divergence, exhaustive_search, find_divergence_witness, shrink, SearchBounds, SearchOutcome, Witness,
};

/// Values the simulator can write. `stamped` lets a value record who wrote
/// it; only timestamped LWW values use this.
pub trait SimValue: Clone + Ord + Hash + fmt::Debug + fmt::Display + Send + Sync + 'static {
    fn stamped(&self, _writer: &ReplicaId, _sequence: u64) -> Self {
        self.clone()
    }

    /// Rendering for reports. Unlike `Display`, which is the scenario
    /// token, it tells apart equal tokens written by different replicas.
    fn describe(&self) -> String {
        self.to_string()
    }
}

impl SimValue for String {}
impl SimValue for u64 {}
impl SimValue for i64 {}

impl<P: SimValue> SimValue for LwwValue<P> {
    fn stamped(&self, writer: &ReplicaId, sequence: u64) -> Self {
        LwwValue {
            payload: self.payload.clone(),
            timestamp: self.timestamp,
            writer: writer.clone(),
            sequence,
        }
    }

    fn describe(&self) -> String {
        if self.writer.as_str().is_empty() {
            self.to_string()
        } else {
            format!("{}({}{})", self, self.writer, self.sequence)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Step<V> {
    Write {
        replica: ReplicaId,
        value: V,
    },
    /// `to` merges a snapshot of `from`'s current state.
    Send {
        from: ReplicaId,
        to: ReplicaId,
    },
    /// Expected values are compared by their rendered form.
    Read {
        replica: ReplicaId,
        expected: Option<BTreeSet<String>>,
    },
}

impl<V> Step<V> {
    pub fn replicas(&self) -> Vec<&ReplicaId> {
        match self {
            Step::Write { replica, .. } | Step::Read { replica, .. } => vec![replica],
            Step::Send { from, to } => vec![from, to],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Schedule<V> {
    pub replicas: Vec<ReplicaId>,
    pub steps: Vec<Step<V>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScheduleError {
    #[error("schedule declares no replicas")]
    NoReplicas,
    #[error("replica {0} is declared twice")]
    DuplicateReplica(ReplicaId),
    #[error("step {step} references undeclared replica {replica}")]
    UnknownReplica { step: usize, replica: ReplicaId },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Merge(#[from] MergeError),
}

impl<V> Schedule<V> {
    pub fn validate(&self) -> Result<(), ScheduleError> {
        if self.replicas.is_empty() {
            return Err(ScheduleError::NoReplicas);
        }
        let mut seen = BTreeSet::new();
        for r in &self.replicas {
            if !seen.insert(r) {
                return Err(ScheduleError::DuplicateReplica(r.clone()));
            }
        }
        for (step, s) in self.steps.iter().enumerate() {
            for r in s.replicas() {
                if !seen.contains(r) {
                    return Err(ScheduleError::UnknownReplica {
                        step,
                        replica: r.clone(),
                    });
                }
            }
        }
        Ok(())
    }
}

/// The implementations compared against the oracle.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Variant {
    Eager,
    Lazy,
    Classic,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Eager, Variant::Lazy, Variant::Classic];
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Eager => "eager",
            Variant::Lazy => "lazy",
            Variant::Classic => "classic",
        })
    }
}

/// One read, answered by every model.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Answers<V> {
    pub eager: BTreeSet<V>,
    pub lazy: BTreeSet<V>,
    pub classic: BTreeSet<V>,
    pub oracle: BTreeSet<V>,
}

impl<V: Ord> Answers<V> {
    pub fn of(&self, variant: Variant) -> &BTreeSet<V> {
        match variant {
            Variant::Eager => &self.eager,
            Variant::Lazy => &self.lazy,
            Variant::Classic => &self.classic,
        }
    }

    pub fn conforms(&self, variant: Variant) -> bool {
        *self.of(variant) == self.oracle
    }

    pub fn all(&self) -> [(&'static str, &BTreeSet<V>); 4] {
        [
            ("eager", &self.eager),
            ("lazy", &self.lazy),
            ("classic", &self.classic),
            ("oracle", &self.oracle),
        ]
    }
}

/// Replica states of all models plus the ground-truth event graph.
pub struct Simulation<V> {
    order: ValueOrder<V>,
    replicas: Vec<ReplicaId>,
    eager: Vec<RegisterState<V>>,
    lazy: Vec<RegisterState<V>>,
    classic: Vec<ClassicMvrState<V>>,
    observed: Vec<BTreeSet<EventId>>,
    events: Vec<WriteEvent<V>>,
    edges: Vec<(EventId, EventId)>,
    /// Rebuilt from `events` and `edges` after every write.
    graph: EventGraph<V>,
}

impl<V: Clone> Clone for Simulation<V> {
    fn clone(&self) -> Self {
        Self {
            order: self.order.clone(),
            replicas: self.replicas.clone(),
            eager: self.eager.clone(),
            lazy: self.lazy.clone(),
            classic: self.classic.clone(),
            observed: self.observed.clone(),
            events: self.events.clone(),
            edges: self.edges.clone(),
            graph: self.graph.clone(),
        }
    }
}

impl<V: SimValue> Simulation<V> {
    pub fn new(replicas: Vec<ReplicaId>, order: ValueOrder<V>) -> Self {
        let n = replicas.len();
        Self {
            eager: vec![RegisterState::initial(order.clone()); n],
            lazy: vec![RegisterState::initial(order.clone()); n],
            classic: vec![ClassicMvrState::initial(order.clone()); n],
            observed: vec![BTreeSet::new(); n],
            events: Vec::new(),
            edges: Vec::new(),
            graph: EventGraph::empty(),
            replicas,
            order,
        }
    }

    pub fn replicas(&self) -> &[ReplicaId] {
        &self.replicas
    }

    pub fn order(&self) -> &ValueOrder<V> {
        &self.order
    }

    pub fn eager(&self, replica: usize) -> &RegisterState<V> {
        &self.eager[replica]
    }

    pub fn lazy(&self, replica: usize) -> &RegisterState<V> {
        &self.lazy[replica]
    }

    pub fn classic(&self, replica: usize) -> &ClassicMvrState<V> {
        &self.classic[replica]
    }

    pub fn observed(&self, replica: usize) -> &BTreeSet<EventId> {
        &self.observed[replica]
    }

    pub fn event_count(&self) -> usize {
        self.events.len()
    }

    /// Writes `value`, stamped with the writer and the new dot's counter.
    /// Every event the writer has observed happens before the new one.
    pub fn write(&mut self, replica: usize, value: &V) {
        let id = &self.replicas[replica];
        let sequence = self.eager[replica].context().get(id) + 1;
        let value = value.stamped(id, sequence);

        self.eager[replica] = self.eager[replica].write(id, value.clone());
        self.lazy[replica] = self.lazy[replica].write(id, value.clone());
        self.classic[replica] = self.classic[replica].write(id, value.clone());

        let event = EventId(self.events.len() as u64);
        self.edges.extend(self.observed[replica].iter().map(|&e| (e, event)));
        self.events.push(WriteEvent {
            id: event,
            replica: id.clone(),
            value,
        });
        self.observed[replica].insert(event);
        self.graph = EventGraph::new(self.events.iter().cloned(), self.edges.iter().copied())
            .expect("simulation only records causally consistent events");
    }

    /// `to` merges a snapshot of `from`; `from` is untouched.
    pub fn send(&mut self, from: usize, to: usize) -> Result<(), MergeError> {
        let eager = self.eager[to].merge(&self.eager[from])?;
        let lazy = self.lazy[to].lazy_merge(&self.lazy[from])?;
        let classic = self.classic[to].merge(&self.classic[from])?;
        self.eager[to] = eager;
        self.lazy[to] = lazy;
        self.classic[to] = classic;
        let snapshot = self.observed[from].clone();
        self.observed[to].extend(snapshot);
        Ok(())
    }

    pub fn graph(&self) -> &EventGraph<V> {
        &self.graph
    }

    /// f_mvrr over the events `replica` has observed.
    pub fn oracle_read(&self, replica: usize) -> BTreeSet<V> {
        let sub = observed_subgraph(&self.graph, &self.observed[replica]).expect("observed sets stay causally closed");
        f_mvrr(&sub, &self.order)
    }

    pub fn read(&self, replica: usize, variant: Variant) -> BTreeSet<V> {
        match variant {
            Variant::Eager => self.eager[replica].read(),
            Variant::Lazy => self.lazy[replica].lazy_read(),
            Variant::Classic => self.classic[replica].read(),
        }
    }

    pub fn answers(&self, replica: usize) -> Answers<V> {
        Answers {
            eager: self.read(replica, Variant::Eager),
            lazy: self.read(replica, Variant::Lazy),
            classic: self.read(replica, Variant::Classic),
            oracle: self.oracle_read(replica),
        }
    }

    pub fn index_of(&self, id: &ReplicaId) -> usize {
        self.replicas.iter().position(|r| r == id).expect("validated schedule")
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReadRecord<V> {
    pub step: usize,
    pub replica: ReplicaId,
    pub answers: Answers<V>,
    pub expected: Option<BTreeSet<String>>,
}

impl<V: SimValue> ReadRecord<V> {
    /// Models whose answer differs from the `expect` clause.
    pub fn expectation_failures(&self) -> Vec<&'static str> {
        let Some(expected) = &self.expected else {
            return Vec::new();
        };
        self.answers
            .all()
            .into_iter()
            .filter(|(_, got)| render_set(got) != *expected)
            .map(|(name, _)| name)
            .collect()
    }
}

pub struct FinalReplica<V> {
    pub replica: ReplicaId,
    pub answers: Answers<V>,
    pub eager: RegisterState<V>,
    pub lazy: RegisterState<V>,
    pub classic: ClassicMvrState<V>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvergenceVerdict {
    /// Every replica observed every write.
    pub fully_exchanged: bool,
    pub eager: bool,
    pub lazy: bool,
    pub classic: bool,
    pub oracle: bool,
}

impl ConvergenceVerdict {
    pub fn variant(&self, variant: Variant) -> bool {
        match variant {
            Variant::Eager => self.eager,
            Variant::Lazy => self.lazy,
            Variant::Classic => self.classic,
        }
    }

    pub fn all_converged(&self) -> bool {
        self.fully_exchanged && self.eager && self.lazy && self.classic && self.oracle
    }
}

/// A read (or final read) where an implementation disagreed with the oracle.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mismatch {
    pub step: usize,
    pub replica: ReplicaId,
    pub variant: Variant,
}

pub struct RunReport<V> {
    pub order_kind: OrderKind,
    pub step_count: usize,
    pub reads: Vec<ReadRecord<V>>,
    /// Final reads use `step == step_count`.
    pub finals: Vec<FinalReplica<V>>,
    pub mismatches: Vec<Mismatch>,
    pub convergence: ConvergenceVerdict,
    pub first_divergence: Option<usize>,
    fully_exchanged: bool,
}

impl<V: SimValue> RunReport<V> {
    pub fn first_mismatch(&self, variant: Variant) -> Option<&Mismatch> {
        self.mismatches.iter().find(|m| m.variant == variant)
    }

    pub fn conforms(&self, variant: Variant) -> bool {
        self.first_mismatch(variant).is_none()
    }

    /// Every answer given during the run, final reads included.
    pub fn all_answers(&self) -> impl Iterator<Item = &Answers<V>> + '_ {
        self.reads
            .iter()
            .map(|r| &r.answers)
            .chain(self.finals.iter().map(|f| &f.answers))
    }

    /// Violations of properties that must hold on every schedule:
    /// lazy and classic agree with the oracle, the eager register agrees
    /// with it under the empty order, total orders never show more than
    /// one value, and every `expect` clause holds.
    pub fn property_failures(&self) -> Vec<String> {
        let mut out = Vec::new();
        for variant in [Variant::Lazy, Variant::Classic] {
            if let Some(m) = self.first_mismatch(variant) {
                out.push(format!(
                    "{variant} disagrees with the oracle at step {} on {}",
                    m.step, m.replica
                ));
            }
        }
        if self.order_kind == OrderKind::Empty {
            if let Some(m) = self.first_mismatch(Variant::Eager) {
                out.push(format!(
                    "eager disagrees with the oracle at step {} on {}",
                    m.step, m.replica
                ));
            }
        }
        if self.order_kind.is_total() {
            if let Some(a) = self.all_answers().find(|a| a.all().iter().any(|(_, s)| s.len() > 1)) {
                out.push(format!(
                    "total order produced {} values in one read",
                    a.all().iter().map(|(_, s)| s.len()).max().unwrap_or(0)
                ));
            }
        }
        for read in &self.reads {
            let failed = read.expectation_failures();
            if !failed.is_empty() {
                out.push(format!(
                    "expectation failed at step {} on {} ({})",
                    read.step,
                    read.replica,
                    failed.join(",")
                ));
            }
        }
        out
    }
}

pub fn render_set<V: fmt::Display>(values: &BTreeSet<V>) -> BTreeSet<String> {
    values.iter().map(|v| v.to_string()).collect()
}

/// Executes `schedule` against all models.
pub fn run_schedule<V: SimValue>(schedule: &Schedule<V>, order: &ValueOrder<V>) -> Result<RunReport<V>, SimError> {
    schedule.validate()?;
    let mut sim = Simulation::new(schedule.replicas.clone(), order.clone());
    let mut reads = Vec::new();
    for (step, s) in schedule.steps.iter().enumerate() {
        match s {
            Step::Write { replica, value } => {
                let i = sim.index_of(replica);
                sim.write(i, value);
            }
            Step::Send { from, to } => {
                let (f, t) = (sim.index_of(from), sim.index_of(to));
                sim.send(f, t)?;
            }
            Step::Read { replica, expected } => {
                let i = sim.index_of(replica);
                reads.push(ReadRecord {
                    step,
                    replica: replica.clone(),
                    answers: sim.answers(i),
                    expected: expected.clone(),
                });
            }
        }
    }

    let step_count = schedule.steps.len();
    let finals: Vec<FinalReplica<V>> = (0..sim.replicas.len())
        .map(|i| FinalReplica {
            replica: sim.replicas[i].clone(),
            answers: sim.answers(i),
            eager: sim.eager[i].clone(),
            lazy: sim.lazy[i].clone(),
            classic: sim.classic[i].clone(),
        })
        .collect();

    let mut mismatches = Vec::new();
    let points = reads
        .iter()
        .map(|r| (r.step, &r.replica, &r.answers))
        .chain(finals.iter().map(|f| (step_count, &f.replica, &f.answers)));
    for (step, replica, answers) in points {
        for variant in Variant::ALL {
            if !answers.conforms(variant) {
                mismatches.push(Mismatch {
                    step,
                    replica: replica.clone(),
                    variant,
                });
            }
        }
    }
    let first_divergence = mismatches.iter().map(|m| m.step).min();
    let all_events = sim.event_count();
    let fully_exchanged = sim.observed.iter().all(|o| o.len() == all_events);

    let mut report = RunReport {
        order_kind: order.kind(),
        step_count,
        reads,
        finals,
        mismatches,
        convergence: ConvergenceVerdict {
            fully_exchanged,
            eager: false,
            lazy: false,
            classic: false,
            oracle: false,
        },
        first_divergence,
        fully_exchanged,
    };
    report.convergence = check_convergence(&report);
    Ok(report)
}

/// Per model: do all replicas end with the same read?
pub fn check_convergence<V: SimValue>(report: &RunReport<V>) -> ConvergenceVerdict {
    fn agree<V: Ord>(sets: Vec<&BTreeSet<V>>) -> bool {
        sets.windows(2).all(|w| w[0] == w[1])
    }
    let of = |pick: fn(&Answers<V>) -> &BTreeSet<V>| agree(report.finals.iter().map(|f| pick(&f.answers)).collect());
    ConvergenceVerdict {
        fully_exchanged: report.fully_exchanged,
        eager: of(|a| &a.eager),
        lazy: of(|a| &a.lazy),
        classic: of(|a| &a.classic),
        oracle: of(|a| &a.oracle),
    }
}
