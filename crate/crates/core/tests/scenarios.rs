mod common;

use std::collections::BTreeSet;
use std::path::PathBuf;

use common::RefModel;
use mvrr_core::order::bug_tracker::{ASSIGNED, CLOSED_FIXED, CLOSED_IRREPRODUCIBLE};
use mvrr_core::sim::scenario::{parse_scenario, render_scenario, OrderSpec, Scenario};
use mvrr_core::sim::{divergence, run_schedule, RunReport, SimValue, Step, Variant};

fn scenario(name: &str) -> Scenario {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name);
    let text = std::fs::read_to_string(path).unwrap();
    parse_scenario(&text).unwrap().into_scenario().unwrap()
}

fn strings<V: ToString>(set: &BTreeSet<V>) -> BTreeSet<String> {
    set.iter().map(|v| v.to_string()).collect()
}

fn set(items: &[&str]) -> BTreeSet<String> {
    items.iter().map(|s| s.to_string()).collect()
}

/// Reads at `replica`, as seen by every model; panics if models disagree.
fn reads_at<V: SimValue>(report: &RunReport<V>, replica: &str) -> Vec<BTreeSet<String>> {
    report
        .reads
        .iter()
        .filter(|r| r.replica.as_str() == replica)
        .map(|r| {
            let oracle = strings(&r.answers.oracle);
            for (model, got) in r.answers.all() {
                assert_eq!(strings(got), oracle, "{model} at step {}", r.step);
            }
            oracle
        })
        .collect()
}

#[test]
fn ticket_closed_twice_then_reassigned() {
    let Scenario::Plain { order, schedule } = scenario("bug_status.scn") else {
        panic!("expected a plain order");
    };
    let report = run_schedule(&schedule, &order).unwrap();
    assert!(
        report.property_failures().is_empty(),
        "{:?}",
        report.property_failures()
    );
    assert_eq!(
        reads_at(&report, "A"),
        vec![
            set(&[CLOSED_IRREPRODUCIBLE]),
            set(&[CLOSED_FIXED, CLOSED_IRREPRODUCIBLE]),
            set(&[ASSIGNED]),
        ]
    );
    assert_eq!(reads_at(&report, "B"), vec![set(&[ASSIGNED])]);
    assert!(report.convergence.all_converged());
}

#[test]
fn ticket_scenario_against_reference_model() {
    let Scenario::Plain { order, schedule } = scenario("bug_status.scn") else {
        panic!("expected a plain order");
    };
    let mut model = RefModel::new(schedule.replicas.len());
    let index = |id: &str| schedule.replicas.iter().position(|r| r.as_str() == id).unwrap();
    let mut reads = Vec::new();
    for step in &schedule.steps {
        match step {
            Step::Write { replica, value } => model.write(index(replica.as_str()), value.clone()),
            Step::Send { from, to } => model.send(index(from.as_str()), index(to.as_str())),
            Step::Read { replica, expected } => {
                let got = model.read(index(replica.as_str()), &order);
                assert_eq!(Some(&got), expected.as_ref());
                reads.push(got);
            }
        }
    }
    assert_eq!(reads.len(), 4);
}

#[test]
fn smaller_timestamp_wins_when_causally_later() {
    let Scenario::Lww { order, schedule } = scenario("lww_overwrite.scn") else {
        panic!("expected order lww");
    };
    let report = run_schedule(&schedule, &order).unwrap();
    assert!(
        report.property_failures().is_empty(),
        "{:?}",
        report.property_failures()
    );
    assert_eq!(reads_at(&report, "A"), vec![set(&["v1@100"]), set(&["v2@50"])]);
    assert_eq!(reads_at(&report, "B"), vec![set(&["v2@50"])]);
}

#[test]
fn larger_timestamp_wins_among_concurrent_writes() {
    let Scenario::Lww { order, schedule } = scenario("lww_concurrent.scn") else {
        panic!("expected order lww");
    };
    let report = run_schedule(&schedule, &order).unwrap();
    assert!(report.property_failures().is_empty());
    assert_eq!(reads_at(&report, "B"), vec![set(&["late@20"])]);
    assert_eq!(reads_at(&report, "A"), vec![set(&["late@20"])]);
}

#[test]
fn lazy_keeps_the_dominated_value_the_eager_register_drops() {
    let text = "\
replicas A B
order partial
edge open assigned
edge assigned closed-fixed
edge assigned closed-irreproducible
write A assigned
write B closed-fixed
send B A
write B open
send A B
read B
";
    let Scenario::Plain { order, schedule } = parse_scenario(text).unwrap().into_scenario().unwrap() else {
        unreachable!()
    };
    let report = run_schedule(&schedule, &order).unwrap();
    let read = &report.reads[0];
    assert_eq!(strings(&read.answers.oracle), set(&[ASSIGNED]));
    assert_eq!(strings(&read.answers.lazy), set(&[ASSIGNED]));
    assert_eq!(strings(&read.answers.classic), set(&[ASSIGNED]));
    assert_eq!(strings(&read.answers.eager), set(&["open"]));
    let w = divergence(&schedule, &order, Variant::Eager).unwrap();
    assert_eq!(w.step, 5);
    assert!(divergence(&schedule, &order, Variant::Lazy).is_none());
    let rendered = render_scenario(&OrderSpec::bug_status(), &schedule);
    let again = parse_scenario(&rendered).unwrap();
    assert_eq!(again.steps, schedule.steps);
    assert_eq!(
        again.order.relation().unwrap().edges(),
        OrderSpec::bug_status().relation().unwrap().edges()
    );
}

#[test]
fn expect_clause_failure_is_reported() {
    let text = "replicas A\norder empty\nwrite A x\nread A expect y\n";
    let Scenario::Plain { order, schedule } = parse_scenario(text).unwrap().into_scenario().unwrap() else {
        unreachable!()
    };
    let report = run_schedule(&schedule, &order).unwrap();
    let failures = report.property_failures();
    assert_eq!(failures.len(), 1);
    assert!(failures[0].contains("expectation failed at step 1"), "{failures:?}");
}
