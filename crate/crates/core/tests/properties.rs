mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;

use common::replay;
use mvrr_core::codec::{decode_state, encode_state};
use mvrr_core::order::bug_tracker;
use mvrr_core::sim::{check_convergence, random_schedule, replica_ids, run_schedule, Simulation, Step, Variant};
use mvrr_core::{
    explicit_relation_order, lww_order, ranked_order, validate_order, ExplicitRelation, LwwValue, RegisterState,
    ValueOrder,
};

const VALUES: [&str; 6] = ["v0", "v1", "v2", "v3", "v4", "v5"];

fn values(n: usize) -> Vec<String> {
    VALUES[..n].iter().map(|s| s.to_string()).collect()
}

/// A strict partial order: edges only go up a random ranking, so the
/// relation is acyclic by construction.
fn arb_dag() -> impl Strategy<Value = ExplicitRelation<String>> {
    (2usize..=6)
        .prop_flat_map(|n| {
            (
                Just(n),
                Just(values(n)).prop_shuffle(),
                prop::collection::vec(any::<bool>(), n * n),
            )
        })
        .prop_map(|(n, ranked, picks)| {
            let mut edges = Vec::new();
            for i in 0..n {
                for j in i + 1..n {
                    if picks[i * n + j] {
                        edges.push((ranked[i].clone(), ranked[j].clone()));
                    }
                }
            }
            ExplicitRelation::new(values(n), edges).unwrap()
        })
}

/// Brute-force closure of the edge list.
fn reachable(rel: &ExplicitRelation<String>, a: &str, b: &str) -> bool {
    let mut frontier = vec![a.to_string()];
    let mut seen = BTreeSet::new();
    while let Some(x) = frontier.pop() {
        for (l, g) in rel.edges() {
            if *l == x {
                if g == b {
                    return true;
                }
                if seen.insert(g.clone()) {
                    frontier.push(g.clone());
                }
            }
        }
    }
    false
}

fn subset_of(domain: &[String], mask: u64) -> BTreeSet<String> {
    domain
        .iter()
        .enumerate()
        .filter(|(i, _)| mask & (1 << i) != 0)
        .map(|(_, v)| v.clone())
        .collect()
}

proptest! {
    #[test]
    fn explicit_order_is_the_transitive_closure(rel in arb_dag()) {
        let order = explicit_relation_order(&rel).unwrap();
        for a in rel.domain() {
            for b in rel.domain() {
                prop_assert_eq!(order.precedes(a, b), reachable(&rel, a, b), "{} vs {}", a, b);
            }
        }
        prop_assert!(validate_order(&order, rel.domain()).is_valid());
    }

    #[test]
    fn resolve_keeps_exactly_the_maximal_values(rel in arb_dag(), mask in any::<u64>()) {
        let order = explicit_relation_order(&rel).unwrap();
        let input = subset_of(rel.domain(), mask);
        let out = order.resolve(&input);
        let expected: BTreeSet<String> = input
            .iter()
            .filter(|v| !input.iter().any(|w| reachable(&rel, v, w)))
            .cloned()
            .collect();
        prop_assert_eq!(&out, &expected);
        prop_assert!(out.is_subset(&input));
        prop_assert_eq!(order.resolve(&out), out.clone());
        prop_assert_eq!(input.is_empty(), out.is_empty());
        for dropped in input.difference(&out) {
            prop_assert!(out.iter().any(|kept| order.precedes(dropped, kept)));
        }
    }

    #[test]
    fn empty_order_resolves_to_identity(mask in any::<u64>()) {
        let input = subset_of(&values(6), mask);
        prop_assert_eq!(ValueOrder::empty().resolve(&input), input);
    }

    #[test]
    fn total_orders_keep_the_maximum(ranking in Just(values(6)).prop_shuffle(), mask in any::<u64>()) {
        let input = subset_of(&values(6), mask);
        let order = ranked_order(ranking.clone());
        prop_assert!(validate_order(&order, &values(6)).is_valid());
        let out = order.resolve(&input);
        let top = ranking.iter().rev().find(|v| input.contains(*v)).cloned();
        prop_assert_eq!(out, top.into_iter().collect::<BTreeSet<_>>());
    }

    #[test]
    fn lww_order_is_total_on_distinct_stamps(stamps in prop::collection::btree_set((0u64..4, 0usize..3, 1u64..4), 1..12)) {
        let ids = replica_ids(3);
        let sample: Vec<LwwValue<String>> = stamps
            .iter()
            .map(|&(ts, w, seq)| LwwValue::new(format!("p{ts}{w}{seq}"), ts, ids[w].clone(), seq))
            .collect();
        let order = lww_order();
        prop_assert!(validate_order(&order, &sample).is_valid());
        let all: BTreeSet<_> = sample.iter().cloned().collect();
        let winner = order.resolve(&all);
        prop_assert_eq!(winner.len(), 1);
        let best = sample.iter().map(|v| (v.timestamp, v.writer.clone(), v.sequence)).max().unwrap();
        let w = winner.into_iter().next().unwrap();
        prop_assert_eq!((w.timestamp, w.writer, w.sequence), best);
    }

    #[test]
    fn a_back_edge_is_rejected(rel in arb_dag()) {
        if let Some((a, b)) = rel.edges().iter().next().cloned() {
            let mut edges: Vec<_> = rel.edges().iter().cloned().collect();
            edges.push((b, a));
            let cyclic = ExplicitRelation::from_edges(edges);
            prop_assert!(explicit_relation_order(&cyclic).is_err());
            prop_assert!(!cyclic.validate().is_valid());
        }
    }

    #[test]
    fn write_then_read_sees_only_the_write(ops in prop::collection::vec((0usize..3, 0usize..4, any::<bool>()), 0..30), last in 0usize..4) {
        let ids = replica_ids(3);
        let statuses: Vec<String> = bug_tracker::STATUSES.iter().map(|s| s.to_string()).collect();
        let order = bug_tracker::status_order();
        let mut states = vec![RegisterState::initial(order.clone()); 3];
        for (r, v, merge) in ops {
            if merge {
                let from = (r + 1) % 3;
                states[r] = states[r].merge(&states[from]).unwrap();
            } else {
                states[r] = states[r].write(&ids[r], statuses[v].clone());
            }
            prop_assert!(states[r].check_invariants(true).is_ok());
        }
        let s = states[0].write(&ids[0], statuses[last].clone());
        prop_assert_eq!(s.read(), BTreeSet::from([statuses[last].clone()]));
        prop_assert_eq!(s.lazy_read(), BTreeSet::from([statuses[last].clone()]));
        prop_assert_eq!(s.entries().len(), 1);
    }

    #[test]
    fn codec_round_trips_reachable_states(seed in any::<u64>(), steps in 0usize..25) {
        let order = bug_tracker::status_order();
        let mut schedule = random_schedule(seed, 3, steps, &bug_tracker::STATUSES.map(String::from));
        // keep the replicas apart: drop the closing exchange
        schedule.steps.truncate(schedule.steps.len() - 12);
        let mut checked = 0;
        replay(&schedule, &order, |_, r, sim, _| {
            for s in [sim.eager(r), sim.lazy(r)] {
                let bytes = encode_state(s);
                let back = decode_state(&bytes, order.clone()).unwrap();
                assert_eq!(&back, s);
                assert_eq!(encode_state(&back), bytes);
                checked += 1;
            }
        });
        prop_assert_eq!(checked, 2 * schedule.steps.len());
    }

    #[test]
    fn runs_are_deterministic_and_converge(seed in any::<u64>(), n in 1usize..5, steps in 0usize..25) {
        let schedule = random_schedule(seed, n, steps, &bug_tracker::STATUSES.map(String::from));
        let order = bug_tracker::status_order();
        let a = run_schedule(&schedule, &order).unwrap();
        let b = run_schedule(&schedule, &order).unwrap();
        prop_assert_eq!(&a.reads, &b.reads);
        prop_assert_eq!(&a.mismatches, &b.mismatches);
        let verdict = check_convergence(&a);
        prop_assert!(verdict.fully_exchanged);
        prop_assert!(verdict.all_converged(), "{:?}", verdict);
        prop_assert!(a.conforms(Variant::Lazy) && a.conforms(Variant::Classic));
    }

    #[test]
    fn sends_never_touch_the_sender(seed in any::<u64>(), steps in 0usize..25) {
        let schedule = random_schedule(seed, 3, steps, &values(3));
        let mut sim = Simulation::new(schedule.replicas.clone(), ranked_order(values(3)));
        for step in &schedule.steps {
            match step {
                Step::Write { replica, value } => sim.write(sim.index_of(replica), value),
                Step::Send { from, to } => {
                    let (f, t) = (sim.index_of(from), sim.index_of(to));
                    let before = (sim.eager(f).clone(), sim.lazy(f).clone(), sim.classic(f).clone(), sim.observed(f).clone());
                    let receiver: BTreeSet<_> = sim.observed(t).union(sim.observed(f)).copied().collect();
                    sim.send(f, t).unwrap();
                    prop_assert_eq!(sim.eager(f), &before.0);
                    prop_assert_eq!(sim.lazy(f), &before.1);
                    prop_assert_eq!(sim.classic(f), &before.2);
                    prop_assert_eq!(sim.observed(f), &before.3);
                    prop_assert_eq!(sim.observed(t), &receiver);
                }
                Step::Read { .. } => {}
            }
        }
    }
}

#[test]
fn built_in_orders_are_valid_on_small_domains() {
    let statuses: Vec<String> = bug_tracker::STATUSES.iter().map(|s| s.to_string()).collect();
    let priorities: Vec<String> = bug_tracker::PRIORITIES.iter().map(|s| s.to_string()).collect();
    assert!(validate_order(&bug_tracker::status_order(), &statuses).is_valid());
    assert!(validate_order(&bug_tracker::priority_order(), &priorities).is_valid());
    for n in 0..=6 {
        let domain = values(n);
        assert!(validate_order(&mvrr_core::natural_order(), &domain).is_valid());
        assert!(validate_order(&ranked_order(domain.clone()), &domain).is_valid());
        assert!(validate_order(&ValueOrder::<String>::empty(), &domain).is_valid());
    }
    // values outside an explicit relation are incomparable to everything
    let order = bug_tracker::status_order();
    let stranger = "wontfix".to_string();
    for s in &statuses {
        assert!(!order.precedes(s, &stranger) && !order.precedes(&stranger, s));
    }
}
