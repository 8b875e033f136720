//! Search for schedules on which an implementation's read differs from the
//! oracle's.
//!
//! The exhaustive search enumerates every write/send sequence up to a
//! length bound and compares the touched replica's read with the oracle
//! after each step, which subsumes placing a read anywhere: a schedule of
//! `n` steps that observes a divergence has at most `n - 1` writes and
//! sends. Three reductions keep it tractable without losing any reachable
//! state:
//!
//! * replicas are introduced in index order (relabelling symmetry);
//! * two adjacent steps that touch disjoint replicas are only tried in
//!   one order;
//! * a send that leaves the receiver unchanged in every model is skipped.

use std::collections::BTreeSet;
use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::generate::{random_steps, replica_ids};
use super::{run_schedule, Schedule, SimValue, Simulation, Step, Variant};
use crate::clock::ReplicaId;
use crate::order::ValueOrder;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SearchBounds {
    pub max_replicas: usize,
    /// Schedule length, the final diverging read included.
    pub max_steps: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Witness<V> {
    /// Ends with the diverging read.
    pub schedule: Schedule<V>,
    pub step: usize,
    pub replica: ReplicaId,
    pub variant: Variant,
    pub oracle: BTreeSet<V>,
    pub actual: BTreeSet<V>,
}

#[derive(Clone, Debug)]
pub struct SearchOutcome<V> {
    /// Sequences whose end state was checked.
    pub explored: u64,
    pub witness: Option<Witness<V>>,
}

/// First explicit read at which `variant` differs from the oracle.
pub fn divergence<V: SimValue>(schedule: &Schedule<V>, order: &ValueOrder<V>, variant: Variant) -> Option<Witness<V>> {
    let report = run_schedule(schedule, order).ok()?;
    let read = report.reads.iter().find(|r| !r.answers.conforms(variant))?;
    Some(Witness {
        schedule: schedule.clone(),
        step: read.step,
        replica: read.replica.clone(),
        variant,
        oracle: read.answers.oracle.clone(),
        actual: read.answers.of(variant).clone(),
    })
}

/// Greedy step deletion while the divergence persists. Steps after the
/// diverging read are dropped first.
pub fn shrink<V: SimValue>(witness: Witness<V>, order: &ValueOrder<V>) -> Witness<V> {
    let variant = witness.variant;
    let mut best = witness;
    best.schedule.steps.truncate(best.step + 1);
    loop {
        let mut improved = false;
        for i in 0..best.schedule.steps.len() {
            let mut candidate = best.schedule.clone();
            candidate.steps.remove(i);
            if let Some(mut w) = divergence(&candidate, order, variant) {
                w.schedule.steps.truncate(w.step + 1);
                best = w;
                improved = true;
                break;
            }
        }
        if !improved {
            break;
        }
    }
    let used: BTreeSet<&ReplicaId> = best.schedule.steps.iter().flat_map(|s| s.replicas()).collect();
    best.schedule.replicas.retain(|r| used.contains(r));
    best
}

/// Inserts a read of the touched replica after every write and send.
fn with_reads<V: Clone>(steps: Vec<Step<V>>) -> Vec<Step<V>> {
    let mut out = Vec::with_capacity(steps.len() * 2);
    for step in steps {
        let touched = match &step {
            Step::Write { replica, .. } => Some(replica.clone()),
            Step::Send { to, .. } => Some(to.clone()),
            Step::Read { .. } => None,
        };
        out.push(step);
        if let Some(replica) = touched {
            out.push(Step::Read {
                replica,
                expected: None,
            });
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Move {
    Write { replica: usize, value: usize },
    Send { from: usize, to: usize },
}

impl Move {
    fn target(self) -> usize {
        match self {
            Move::Write { replica, .. } => replica,
            Move::Send { to, .. } => to,
        }
    }

    fn touches(self, replica: usize) -> bool {
        match self {
            Move::Write { replica: r, .. } => r == replica,
            Move::Send { from, to } => from == replica || to == replica,
        }
    }

    /// Neither step modifies a replica the other reads or modifies.
    fn independent(self, other: Move) -> bool {
        !self.touches(other.target()) && !other.touches(self.target())
    }

    /// Replicas in order of appearance.
    fn replicas(self) -> Vec<usize> {
        match self {
            Move::Write { replica, .. } => vec![replica],
            Move::Send { from, to } => vec![from, to],
        }
    }
}

struct Explorer<'a, V> {
    domain: &'a [V],
    variant: Variant,
    replicas: usize,
    moves: Vec<Move>,
    best: Option<Vec<Move>>,
    explored: u64,
}

impl<V: SimValue> Explorer<'_, V> {
    fn best_len(&self, cap: usize) -> usize {
        self.best.as_ref().map_or(cap + 1, Vec::len)
    }

    fn dfs(&mut self, sim: &Simulation<V>, path: &mut Vec<Move>, used: usize, cap: usize) {
        if path.len() + 1 >= self.best_len(cap) {
            return;
        }
        for mi in 0..self.moves.len() {
            let m = self.moves[mi];
            let mut introduced = used;
            let canonical = m.replicas().into_iter().all(|r| {
                if r < introduced {
                    true
                } else if r == introduced {
                    introduced += 1;
                    true
                } else {
                    false
                }
            });
            if !canonical {
                continue;
            }
            if let Some(&last) = path.last() {
                if m.independent(last) && m < last {
                    continue;
                }
            }
            let mut next = sim.clone();
            match m {
                Move::Write { replica, value } => next.write(replica, &self.domain[value]),
                Move::Send { from, to } => {
                    next.send(from, to).expect("one shared order");
                    let unchanged = next.eager(to) == sim.eager(to)
                        && next.lazy(to) == sim.lazy(to)
                        && next.classic(to) == sim.classic(to)
                        && next.observed(to) == sim.observed(to);
                    if unchanged {
                        continue;
                    }
                }
            }
            self.explored += 1;
            path.push(m);
            let target = m.target();
            if next.read(target, self.variant) != next.oracle_read(target) {
                self.best = Some(path.clone());
            } else {
                self.dfs(&next, path, introduced, cap);
            }
            path.pop();
            if path.len() + 1 >= self.best_len(cap) {
                return;
            }
        }
    }
}

/// Enumerates every schedule within `bounds` (up to replica relabelling and
/// reordering of independent steps) and returns the shortest one on which
/// `variant` diverges from the oracle, if any.
pub fn exhaustive_search<V: SimValue>(
    bounds: SearchBounds,
    order: &ValueOrder<V>,
    domain: &[V],
    variant: Variant,
) -> SearchOutcome<V> {
    let n = bounds.max_replicas;
    let mut moves = Vec::new();
    for replica in 0..n {
        for value in 0..domain.len() {
            moves.push(Move::Write { replica, value });
        }
    }
    for from in 0..n {
        for to in 0..n {
            if from != to {
                moves.push(Move::Send { from, to });
            }
        }
    }
    moves.sort();

    let replicas = replica_ids(n);
    let mut explorer = Explorer {
        domain,
        variant,
        replicas: n,
        moves,
        best: None,
        explored: 0,
    };
    let root = Simulation::new(replicas.clone(), order.clone());
    if n > 0 {
        // iterative deepening: the first witness found is a shortest one
        for cap in 1..bounds.max_steps {
            explorer.dfs(&root, &mut Vec::new(), 0, cap);
            if explorer.best.is_some() {
                break;
            }
        }
    }
    debug_assert_eq!(explorer.replicas, n);

    let witness = explorer.best.map(|path| {
        let mut steps: Vec<Step<V>> = path
            .iter()
            .map(|m| match *m {
                Move::Write { replica, value } => Step::Write {
                    replica: replicas[replica].clone(),
                    value: domain[value].clone(),
                },
                Move::Send { from, to } => Step::Send {
                    from: replicas[from].clone(),
                    to: replicas[to].clone(),
                },
            })
            .collect();
        steps.push(Step::Read {
            replica: replicas[path.last().unwrap().target()].clone(),
            expected: None,
        });
        let schedule = Schedule {
            replicas: replicas.clone(),
            steps,
        };
        let w = divergence(&schedule, order, variant).expect("explored divergence replays");
        shrink(w, order)
    });
    SearchOutcome {
        explored: explorer.explored,
        witness,
    }
}

/// Random schedules from `seeds`, then the exhaustive enumeration; returns
/// the smallest shrunk witness found.
pub fn find_divergence_witness<V: SimValue>(
    seeds: Range<u64>,
    bounds: SearchBounds,
    order: &ValueOrder<V>,
    domain: &[V],
    variant: Variant,
) -> Option<Witness<V>> {
    let mut best: Option<Witness<V>> = None;
    let mut consider = |w: Witness<V>| {
        if best
            .as_ref()
            .is_none_or(|b| w.schedule.steps.len() < b.schedule.steps.len())
        {
            best = Some(w);
        }
    };
    if bounds.max_replicas > 0 {
        for seed in seeds {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let replicas = replica_ids(rng.gen_range(1..=bounds.max_replicas));
            let len = rng.gen_range(0..=bounds.max_steps);
            let steps = with_reads(random_steps(&mut rng, &replicas, len, domain, false));
            let schedule = Schedule { replicas, steps };
            if let Some(w) = divergence(&schedule, order, variant) {
                consider(shrink(w, order));
            }
        }
    }
    if let Some(w) = exhaustive_search(bounds, order, domain, variant).witness {
        consider(w);
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::order::bug_tracker;

    fn statuses() -> Vec<String> {
        bug_tracker::STATUSES.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn empty_order_has_no_witness() {
        let domain = ["x", "y"].map(String::from);
        let bounds = SearchBounds {
            max_replicas: 3,
            max_steps: 5,
        };
        let outcome = exhaustive_search(bounds, &ValueOrder::empty(), &domain, Variant::Eager);
        assert!(outcome.witness.is_none());
        assert!(outcome.explored > 0);
    }

    #[test]
    fn lazy_has_no_short_witness() {
        let bounds = SearchBounds {
            max_replicas: 3,
            max_steps: 4,
        };
        let out = exhaustive_search(bounds, &bug_tracker::status_order(), &statuses(), Variant::Lazy);
        assert!(out.witness.is_none());
    }

    #[test]
    fn eager_witness_replays_and_is_minimal_under_deletion() {
        let order = bug_tracker::status_order();
        let bounds = SearchBounds {
            max_replicas: 3,
            max_steps: 6,
        };
        let w = exhaustive_search(bounds, &order, &statuses(), Variant::Eager)
            .witness
            .expect("eager resolution loses a concurrent value");
        assert_eq!(divergence(&w.schedule, &order, Variant::Eager).unwrap().step, w.step);
        for i in 0..w.schedule.steps.len() {
            let mut s = w.schedule.clone();
            s.steps.remove(i);
            assert!(divergence(&s, &order, Variant::Eager).is_none());
        }
    }

    #[test]
    fn combined_search_is_no_longer_than_exhaustive() {
        let order = bug_tracker::status_order();
        let bounds = SearchBounds {
            max_replicas: 3,
            max_steps: 6,
        };
        let exhaustive = exhaustive_search(bounds, &order, &statuses(), Variant::Eager)
            .witness
            .unwrap();
        let w = find_divergence_witness(0..300, bounds, &order, &statuses(), Variant::Eager).unwrap();
        assert!(w.schedule.steps.len() <= exhaustive.schedule.steps.len());
        assert!(matches!(w.schedule.steps.last(), Some(Step::Read { .. })));
        assert_ne!(w.oracle, w.actual);
    }

    #[test]
    fn too_short_for_a_witness() {
        let bounds = SearchBounds {
            max_replicas: 3,
            max_steps: 4,
        };
        let order = bug_tracker::status_order();
        assert!(exhaustive_search(bounds, &order, &statuses(), Variant::Eager)
            .witness
            .is_none());
    }
}
