//! A deliberately naive reference model shared by the integration tests.
//! It tracks, per event, the events its writer had seen, and answers
//! reads by brute force. Nothing here reuses the library's oracle.

#![allow(dead_code)]

use std::collections::BTreeSet;

use mvrr_core::sim::{Schedule, SimValue, Simulation, Step};
use mvrr_core::ValueOrder;

pub struct RefModel<V> {
    /// (value, events seen by its writer when it was written)
    events: Vec<(V, BTreeSet<usize>)>,
    observed: Vec<BTreeSet<usize>>,
    writes: Vec<u64>,
}

impl<V: SimValue> RefModel<V> {
    pub fn new(replicas: usize) -> Self {
        RefModel {
            events: Vec::new(),
            observed: vec![BTreeSet::new(); replicas],
            writes: vec![0; replicas],
        }
    }

    pub fn write(&mut self, replica: usize, stamped: V) {
        self.writes[replica] += 1;
        let id = self.events.len();
        self.events.push((stamped, self.observed[replica].clone()));
        self.observed[replica].insert(id);
    }

    pub fn send(&mut self, from: usize, to: usize) {
        let seen = self.observed[from].clone();
        self.observed[to].extend(seen);
    }

    /// Sequence number the next write at `replica` gets.
    pub fn next_sequence(&self, replica: usize) -> u64 {
        self.writes[replica] + 1
    }

    /// Values of observed events that no other observed event has seen.
    pub fn concurrent_values(&self, replica: usize) -> BTreeSet<V> {
        let obs = &self.observed[replica];
        obs.iter()
            .filter(|&&e| !obs.iter().any(|&later| self.events[later].1.contains(&e)))
            .map(|&e| self.events[e].0.clone())
            .collect()
    }

    pub fn read(&self, replica: usize, order: &ValueOrder<V>) -> BTreeSet<V> {
        let all = self.concurrent_values(replica);
        all.iter()
            .filter(|v| !all.iter().any(|w| order.precedes(v, w)))
            .cloned()
            .collect()
    }

    pub fn observed_count(&self, replica: usize) -> usize {
        self.observed[replica].len()
    }
}

/// Steps a simulation and the reference model through `schedule` together,
/// calling `visit` after every step with the index of the step and the
/// replica it touched.
pub fn replay<V: SimValue>(
    schedule: &Schedule<V>,
    order: &ValueOrder<V>,
    mut visit: impl FnMut(usize, usize, &Simulation<V>, &RefModel<V>),
) {
    let mut sim = Simulation::new(schedule.replicas.clone(), order.clone());
    let mut model = RefModel::new(schedule.replicas.len());
    for (i, step) in schedule.steps.iter().enumerate() {
        let touched = match step {
            Step::Write { replica, value } => {
                let r = sim.index_of(replica);
                model.write(r, value.stamped(replica, model.next_sequence(r)));
                sim.write(r, value);
                r
            }
            Step::Send { from, to } => {
                let (f, t) = (sim.index_of(from), sim.index_of(to));
                sim.send(f, t).expect("shared order");
                model.send(f, t);
                t
            }
            Step::Read { replica, .. } => sim.index_of(replica),
        };
        visit(i, touched, &sim, &model);
    }
}
