use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use thiserror::Error;

use mvrr_core::sim::scenario::{parse_order_spec, parse_scenario, render_scenario, OrderSpec, ParseError, Scenario};
use mvrr_core::sim::{
    corpus_case, find_divergence_witness, run_schedule, CorpusRun, Schedule, SearchBounds, SimValue, Variant,
};
use mvrr_core::{lww_order, ranked_order, validate_order, LwwValue, ValidationReport, ValueOrder};

use crate::emit::{set, values, Emitter, Format};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {source}", path.display())]
    Parse { path: PathBuf, source: ParseError },
    #[error("{0}")]
    Config(String),
}

pub struct Output {
    pub text: String,
    /// No property or expectation failed.
    pub clean: bool,
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn parse_err(path: &Path) -> impl Fn(ParseError) -> CliError + '_ {
    move |source| CliError::Parse {
        path: path.to_path_buf(),
        source,
    }
}

fn order_name(spec: &OrderSpec) -> &'static str {
    match spec {
        OrderSpec::Empty => "empty",
        OrderSpec::Total(_) => "total",
        OrderSpec::Partial(_) => "partial",
        OrderSpec::Lww => "lww",
    }
}

pub fn run(path: &Path, format: Format) -> Result<Output, CliError> {
    let text = read(path)?;
    let file = parse_scenario(&text).map_err(parse_err(path))?;
    let name = order_name(&file.order);
    let mut out = Emitter::new(format);
    let clean = match file.into_scenario().map_err(parse_err(path))? {
        Scenario::Plain { order, schedule } => report_run(&schedule, &order, name, &mut out)?,
        Scenario::Lww { order, schedule } => report_run(&schedule, &order, name, &mut out)?,
    };
    Ok(Output { text: out.text, clean })
}

fn report_run<V: SimValue>(
    schedule: &Schedule<V>,
    order: &ValueOrder<V>,
    order_name: &str,
    out: &mut Emitter,
) -> Result<bool, CliError> {
    let report = run_schedule(schedule, order).map_err(|e| CliError::Config(e.to_string()))?;
    out.line(
        format_args!(
            "{} replicas, {} steps, {order_name} order",
            schedule.replicas.len(),
            schedule.steps.len()
        ),
        "scenario",
        &[
            ("replicas", schedule.replicas.len().to_string()),
            ("steps", schedule.steps.len().to_string()),
            ("order", order_name.to_string()),
        ],
    );

    for read in &report.reads {
        let a = &read.answers;
        let expect = match &read.expected {
            None => "none",
            Some(_) if read.expectation_failures().is_empty() => "ok",
            Some(_) => "failed",
        };
        let mut human = format!(
            "step {:>3} read {}: eager {} lazy {} classic {} oracle {}",
            read.step,
            read.replica,
            values(&a.eager),
            values(&a.lazy),
            values(&a.classic),
            values(&a.oracle)
        );
        if let Some(expected) = &read.expected {
            human.push_str(&format!("  expect {} {expect}", set(expected)));
        }
        out.line(
            human,
            "read",
            &[
                ("step", read.step.to_string()),
                ("replica", read.replica.to_string()),
                ("eager", values(&a.eager)),
                ("lazy", values(&a.lazy)),
                ("classic", values(&a.classic)),
                ("oracle", values(&a.oracle)),
                ("expect", expect.to_string()),
            ],
        );
    }
    for f in &report.finals {
        let a = &f.answers;
        out.line(
            format_args!(
                "final    {}: eager {} lazy {} classic {} oracle {}",
                f.replica,
                values(&a.eager),
                values(&a.lazy),
                values(&a.classic),
                values(&a.oracle)
            ),
            "final",
            &[
                ("replica", f.replica.to_string()),
                ("eager", values(&a.eager)),
                ("lazy", values(&a.lazy)),
                ("classic", values(&a.classic)),
                ("oracle", values(&a.oracle)),
            ],
        );
    }

    for variant in Variant::ALL {
        if let Some(m) = report.first_mismatch(variant) {
            out.line(
                format_args!(
                    "{variant} first differs from the oracle at step {} on {}",
                    m.step, m.replica
                ),
                "divergence",
                &[
                    ("variant", variant.to_string()),
                    ("step", m.step.to_string()),
                    ("replica", m.replica.to_string()),
                ],
            );
        }
    }

    let c = report.convergence;
    out.line(
        format_args!(
            "converged: eager {} lazy {} classic {} oracle {} (fully exchanged: {})",
            c.eager, c.lazy, c.classic, c.oracle, c.fully_exchanged
        ),
        "convergence",
        &[
            ("fully_exchanged", c.fully_exchanged.to_string()),
            ("eager", c.eager.to_string()),
            ("lazy", c.lazy.to_string()),
            ("classic", c.classic.to_string()),
            ("oracle", c.oracle.to_string()),
        ],
    );

    let failures = report.property_failures();
    for f in &failures {
        out.line(format_args!("FAILED: {f}"), "failure", &[("detail", f.clone())]);
    }
    status(out, failures.len());
    Ok(failures.is_empty())
}

fn status(out: &mut Emitter, failures: usize) {
    if failures == 0 {
        out.line("ok", "status", &[("result", "ok".into())]);
    } else {
        out.line(
            format_args!("{failures} failure(s)"),
            "status",
            &[("result", "failed".into()), ("failures", failures.to_string())],
        );
    }
}

#[derive(Default)]
struct FuzzTally {
    schedules: u64,
    reads: u64,
    conformance_failures: u64,
    convergence_failures: u64,
    eager_divergences: u64,
    by_kind: BTreeMap<String, u64>,
}

fn fuzz_one<V: SimValue>(
    seed: u64,
    schedule: &Schedule<V>,
    order: &ValueOrder<V>,
    tally: &mut FuzzTally,
    out: &mut Emitter,
) {
    let report = run_schedule(schedule, order).expect("generated schedules are valid");
    tally.schedules += 1;
    tally.reads += report.all_answers().count() as u64;
    *tally.by_kind.entry(order.kind().to_string()).or_default() += 1;
    if !report.conforms(Variant::Eager) {
        tally.eager_divergences += 1;
    }
    let failures = report.property_failures();
    if !failures.is_empty() {
        tally.conformance_failures += 1;
    }
    for f in failures {
        out.line(
            format_args!("seed {seed} ({} order): {f}", order.kind()),
            "failure",
            &[
                ("seed", seed.to_string()),
                ("order", order.kind().to_string()),
                ("detail", f.clone()),
            ],
        );
    }
    if !report.convergence.all_converged() {
        tally.convergence_failures += 1;
        out.line(
            format_args!(
                "seed {seed} ({} order): replicas did not converge: {:?}",
                order.kind(),
                report.convergence
            ),
            "failure",
            &[
                ("seed", seed.to_string()),
                ("order", order.kind().to_string()),
                ("detail", "not converged".into()),
            ],
        );
    }
}

/// Seeds `seed, seed+1, ...`; each seed's shape follows the randomized
/// corpus, capped by the replica and step bounds.
pub fn fuzz(seed: u64, runs: u64, replicas: usize, steps: usize, format: Format) -> Result<Output, CliError> {
    if replicas == 0 {
        return Err(CliError::Config("--replicas must be at least 1".into()));
    }
    let mut out = Emitter::new(format);
    let mut tally = FuzzTally::default();
    for i in 0..runs {
        let s = seed.wrapping_add(i);
        let mut case = corpus_case(s);
        case.replicas = case.replicas.min(replicas);
        case.steps = case.steps.min(steps);
        match case.build() {
            CorpusRun::Plain { order, schedule, .. } => fuzz_one(s, &schedule, &order, &mut tally, &mut out),
            CorpusRun::Lww { order, schedule, .. } => fuzz_one(s, &schedule, &order, &mut tally, &mut out),
        }
    }
    let kinds: Vec<String> = tally.by_kind.iter().map(|(k, n)| format!("{k}:{n}")).collect();
    out.line(
        format_args!(
            "{} schedules ({}), {} reads\nconformance failures: {}\nconvergence failures: {}\neager differs from the oracle in {} schedules (not a failure)",
            tally.schedules,
            kinds.join(" "),
            tally.reads,
            tally.conformance_failures,
            tally.convergence_failures,
            tally.eager_divergences
        ),
        "summary",
        &[
            ("seed", seed.to_string()),
            ("schedules", tally.schedules.to_string()),
            ("reads", tally.reads.to_string()),
            ("conformance_failures", tally.conformance_failures.to_string()),
            ("convergence_failures", tally.convergence_failures.to_string()),
            ("eager_divergences", tally.eager_divergences.to_string()),
            ("kinds", kinds.join(",")),
        ],
    );
    let failures = tally.conformance_failures + tally.convergence_failures;
    status(&mut out, failures as usize);
    Ok(Output {
        text: out.text,
        clean: failures == 0,
    })
}

/// A handful of timestamped values with distinct stamps, some tied on
/// the timestamp alone.
fn lww_sample() -> Vec<LwwValue<String>> {
    let mut sample = Vec::new();
    for ts in 1..=3 {
        for writer in ["A", "B"] {
            for seq in 1..=2 {
                sample.push(LwwValue::new(format!("v{ts}{writer}{seq}"), ts, writer, seq));
            }
        }
    }
    sample
}

pub fn check_order(path: &Path, from_scenario: bool, format: Format) -> Result<Output, CliError> {
    let text = read(path)?;
    let spec = if from_scenario {
        parse_scenario(&text).map_err(parse_err(path))?.order
    } else {
        parse_order_spec(&text).map_err(parse_err(path))?
    };
    let mut out = Emitter::new(format);
    let (size, violations): (usize, Vec<(String, String)>) = match &spec {
        OrderSpec::Empty => (0, Vec::new()),
        OrderSpec::Total(ranking) => laws(validate_order(&ranked_order(ranking.clone()), ranking)),
        // Checked on the relation as written, so a cycle shows up as a
        // broken law with its witness rather than as a build error.
        OrderSpec::Partial(_) => laws(spec.relation().expect("partial order").validate()),
        OrderSpec::Lww => laws(validate_order(&lww_order(), &lww_sample())),
    };
    out.line(
        format_args!("{} order over {size} values", order_name(&spec)),
        "order",
        &[("kind", order_name(&spec).into()), ("values", size.to_string())],
    );
    for (law, detail) in &violations {
        out.line(
            format_args!("violation of {detail}"),
            "violation",
            &[("law", law.clone()), ("detail", detail.clone())],
        );
    }
    status(&mut out, violations.len());
    Ok(Output {
        text: out.text,
        clean: violations.is_empty(),
    })
}

fn laws<V: std::fmt::Display>(report: ValidationReport<V>) -> (usize, Vec<(String, String)>) {
    let violations = report
        .violations
        .iter()
        .map(|v| (v.law().to_string(), v.to_string()))
        .collect();
    (report.sample_size, violations)
}

pub fn witness(
    seed: u64,
    runs: u64,
    replicas: usize,
    steps: usize,
    order_path: Option<&Path>,
    variant: Variant,
    format: Format,
) -> Result<Output, CliError> {
    if replicas == 0 || steps < 2 {
        return Err(CliError::Config(
            "a witness needs at least 1 replica and 2 steps".into(),
        ));
    }
    let spec = match order_path {
        Some(path) => parse_order_spec(&read(path)?).map_err(parse_err(path))?,
        None => OrderSpec::bug_status(),
    };
    let bounds = SearchBounds {
        max_replicas: replicas,
        max_steps: steps,
    };
    let seeds = seed..seed.saturating_add(runs);
    let mut out = Emitter::new(format);
    match spec.build() {
        Some(order) => {
            let order = order.map_err(|e| CliError::Config(format!("invalid order: {e}")))?;
            let mut domain = spec.named_values();
            if domain.is_empty() {
                domain = ["x", "y", "z"].map(String::from).to_vec();
            }
            let found = find_divergence_witness(seeds, bounds, &order, &domain, variant);
            print_witness(&spec, found, bounds, variant, &mut out);
        }
        None => {
            let domain = vec![
                LwwValue::new("a".to_string(), 1, "", 0),
                LwwValue::new("b".to_string(), 1, "", 0),
                LwwValue::new("c".to_string(), 2, "", 0),
            ];
            let found = find_divergence_witness(seeds, bounds, &lww_order(), &domain, variant);
            print_witness(&spec, found, bounds, variant, &mut out);
        }
    }
    Ok(Output {
        text: out.text,
        clean: true,
    })
}

fn print_witness<V: SimValue>(
    spec: &OrderSpec,
    found: Option<mvrr_core::sim::Witness<V>>,
    bounds: SearchBounds,
    variant: Variant,
    out: &mut Emitter,
) {
    // Metadata lines are comments, so the output is itself a scenario file.
    match found {
        Some(w) => {
            out.line(
                format_args!(
                    "# {variant} differs from the oracle at step {} on {}: oracle {}, {variant} {}",
                    w.step,
                    w.replica,
                    values(&w.oracle),
                    values(&w.actual)
                ),
                "# witness",
                &[
                    ("found", "true".into()),
                    ("variant", variant.to_string()),
                    ("step", w.step.to_string()),
                    ("replica", w.replica.to_string()),
                    ("oracle", values(&w.oracle)),
                    ("actual", values(&w.actual)),
                ],
            );
            out.raw(&render_scenario(spec, &w.schedule));
        }
        None => out.line(
            format_args!(
                "# no witness: {variant} agrees with the oracle on every schedule of up to {} replicas and {} steps",
                bounds.max_replicas, bounds.max_steps
            ),
            "# witness",
            &[
                ("found", "false".into()),
                ("variant", variant.to_string()),
                ("max_replicas", bounds.max_replicas.to_string()),
                ("max_steps", bounds.max_steps.to_string()),
            ],
        ),
    }
}
