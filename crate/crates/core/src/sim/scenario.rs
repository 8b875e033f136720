//! Text formats for orders and scenarios.
//!
//! ```text
//! # comment
//! replicas A B
//! order partial            # or: order empty | order total a < b < c | order lww
//! edge open assigned
//! write A assigned         # under `order lww`: write A v1@100
//! send A B
//! read B expect assigned   # `expect` is optional
//! ```

use std::collections::BTreeSet;
use std::fmt::{self, Display, Write as _};

use thiserror::Error;

use super::{Schedule, Step};
use crate::clock::ReplicaId;
use crate::order::{explicit_relation_order, lww_order, ranked_order, ExplicitRelation, LwwValue, ValueOrder};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

fn err<T>(line: usize, message: impl Into<String>) -> Result<T, ParseError> {
    Err(ParseError {
        line,
        message: message.into(),
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum OrderSpec {
    Empty,
    /// Ascending ranking.
    Total(Vec<String>),
    /// Cover edges `(lesser, greater)`.
    Partial(Vec<(String, String)>),
    Lww,
}

impl OrderSpec {
    pub fn bug_status() -> Self {
        let rel = crate::order::bug_tracker::status_relation();
        OrderSpec::Partial(rel.edges().iter().cloned().collect())
    }

    pub fn relation(&self) -> Option<ExplicitRelation<String>> {
        match self {
            OrderSpec::Partial(edges) => Some(ExplicitRelation::from_edges(edges.iter().cloned())),
            _ => None,
        }
    }

    /// The order over plain string values; `None` for `lww`, whose values
    /// carry timestamps.
    pub fn build(&self) -> Option<Result<ValueOrder<String>, crate::order::OrderError>> {
        match self {
            OrderSpec::Empty => Some(Ok(ValueOrder::empty())),
            OrderSpec::Total(ranking) => Some(Ok(ranked_order(ranking.clone()))),
            OrderSpec::Partial(_) => Some(explicit_relation_order(&self.relation().unwrap())),
            OrderSpec::Lww => None,
        }
    }

    /// The values the order mentions.
    pub fn named_values(&self) -> Vec<String> {
        match self {
            OrderSpec::Empty | OrderSpec::Lww => Vec::new(),
            OrderSpec::Total(ranking) => ranking.clone(),
            OrderSpec::Partial(_) => self.relation().unwrap().domain().to_vec(),
        }
    }
}

impl Display for OrderSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OrderSpec::Empty => writeln!(f, "order empty"),
            OrderSpec::Lww => writeln!(f, "order lww"),
            OrderSpec::Total(ranking) => writeln!(f, "order total {}", ranking.join(" < ")),
            OrderSpec::Partial(edges) => {
                writeln!(f, "order partial")?;
                for (a, b) in edges {
                    writeln!(f, "edge {a} {b}")?;
                }
                Ok(())
            }
        }
    }
}

fn meaningful_lines(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> + '_ {
    text.lines().enumerate().filter_map(|(i, raw)| {
        let content = raw.split('#').next().unwrap_or("");
        let words: Vec<&str> = content.split_whitespace().collect();
        (!words.is_empty()).then_some((i + 1, words))
    })
}

struct OrderBuilder {
    spec: Option<(usize, OrderSpec)>,
}

impl OrderBuilder {
    fn declare(&mut self, line: usize, words: &[&str]) -> Result<(), ParseError> {
        if self.spec.is_some() {
            return err(line, "order declared twice");
        }
        let spec = match words {
            ["order", "empty"] => OrderSpec::Empty,
            ["order", "lww"] => OrderSpec::Lww,
            ["order", "partial"] => OrderSpec::Partial(Vec::new()),
            ["order", "total", rest @ ..] => {
                let mut ranking = Vec::new();
                for (i, w) in rest.iter().enumerate() {
                    if i % 2 == 1 {
                        if *w != "<" {
                            return err(line, format!("expected `<`, found `{w}`"));
                        }
                    } else if ranking.contains(&w.to_string()) {
                        return err(line, format!("value `{w}` ranked twice"));
                    } else {
                        ranking.push(w.to_string());
                    }
                }
                if rest.is_empty() || rest.len() % 2 == 0 {
                    return err(line, "total order must be `v1 < v2 < ... < vn`");
                }
                OrderSpec::Total(ranking)
            }
            _ => return err(line, format!("unknown order declaration `{}`", words.join(" "))),
        };
        self.spec = Some((line, spec));
        Ok(())
    }

    fn edge(&mut self, line: usize, words: &[&str]) -> Result<(), ParseError> {
        match (&mut self.spec, words) {
            (Some((_, OrderSpec::Partial(edges))), [_, a, b]) => {
                edges.push((a.to_string(), b.to_string()));
                Ok(())
            }
            (Some((_, OrderSpec::Partial(_))), _) => err(line, "expected `edge <lesser> <greater>`"),
            _ => err(line, "`edge` is only allowed after `order partial`"),
        }
    }

    fn finish(self) -> Result<(usize, OrderSpec), ParseError> {
        match self.spec {
            Some(spec) => Ok(spec),
            None => err(0, "missing `order` declaration"),
        }
    }
}

/// Parses a standalone order block.
pub fn parse_order_spec(text: &str) -> Result<OrderSpec, ParseError> {
    let mut builder = OrderBuilder { spec: None };
    for (line, words) in meaningful_lines(text) {
        match words[0] {
            "order" => builder.declare(line, &words)?,
            "edge" => builder.edge(line, &words)?,
            other => return err(line, format!("unexpected `{other}` in order block")),
        }
    }
    builder.finish().map(|(_, spec)| spec)
}

/// A parsed scenario whose values are still raw tokens.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScenarioFile {
    pub replicas: Vec<ReplicaId>,
    pub order: OrderSpec,
    pub order_line: usize,
    pub steps: Vec<Step<String>>,
    /// Source line of each step.
    pub step_lines: Vec<usize>,
}

pub enum Scenario {
    Plain {
        order: ValueOrder<String>,
        schedule: Schedule<String>,
    },
    Lww {
        order: ValueOrder<LwwValue<String>>,
        schedule: Schedule<LwwValue<String>>,
    },
}

pub fn parse_scenario(text: &str) -> Result<ScenarioFile, ParseError> {
    let mut replicas: Option<Vec<ReplicaId>> = None;
    let mut order = OrderBuilder { spec: None };
    let mut steps = Vec::new();
    let mut step_lines = Vec::new();

    let declared = |replicas: &Option<Vec<ReplicaId>>, line: usize, id: &str| -> Result<ReplicaId, ParseError> {
        match replicas {
            None => err(line, "steps must come after `replicas`"),
            Some(rs) if rs.iter().any(|r| r.as_str() == id) => Ok(ReplicaId::from(id)),
            Some(_) => err(line, format!("undeclared replica `{id}`")),
        }
    };

    for (line, words) in meaningful_lines(text) {
        let step = match words.as_slice() {
            ["replicas", ids @ ..] => {
                if replicas.is_some() {
                    return err(line, "replicas declared twice");
                }
                if ids.is_empty() {
                    return err(line, "at least one replica is required");
                }
                let mut seen = BTreeSet::new();
                for id in ids {
                    if !seen.insert(*id) {
                        return err(line, format!("replica `{id}` declared twice"));
                    }
                }
                replicas = Some(ids.iter().map(|&id| ReplicaId::from(id)).collect());
                continue;
            }
            ["order", ..] => {
                order.declare(line, &words)?;
                continue;
            }
            ["edge", ..] => {
                order.edge(line, &words)?;
                continue;
            }
            ["write", replica, value] => Step::Write {
                replica: declared(&replicas, line, replica)?,
                value: value.to_string(),
            },
            ["send", from, to] => Step::Send {
                from: declared(&replicas, line, from)?,
                to: declared(&replicas, line, to)?,
            },
            ["read", replica] => Step::Read {
                replica: declared(&replicas, line, replica)?,
                expected: None,
            },
            ["read", replica, "expect", values @ ..] => Step::Read {
                replica: declared(&replicas, line, replica)?,
                expected: Some(values.iter().map(|v| v.to_string()).collect()),
            },
            [keyword, ..] => {
                return err(
                    line,
                    format!("cannot parse `{}` (unknown or malformed `{keyword}`)", words.join(" ")),
                );
            }
            [] => unreachable!(),
        };
        steps.push(step);
        step_lines.push(line);
    }

    let Some(replicas) = replicas else {
        return err(0, "missing `replicas` declaration");
    };
    let (order_line, order) = order.finish()?;
    Ok(ScenarioFile {
        replicas,
        order,
        order_line,
        steps,
        step_lines,
    })
}

/// Splits `token@timestamp`.
pub fn parse_lww_token(token: &str) -> Option<LwwValue<String>> {
    let (payload, ts) = token.rsplit_once('@')?;
    if payload.is_empty() {
        return None;
    }
    Some(LwwValue::new(payload.to_string(), ts.parse().ok()?, "", 0))
}

impl ScenarioFile {
    /// Builds the order and types the written values.
    pub fn into_scenario(self) -> Result<Scenario, ParseError> {
        let ScenarioFile {
            replicas,
            order,
            order_line,
            steps,
            step_lines,
        } = self;
        match order.build() {
            Some(Ok(order)) => Ok(Scenario::Plain {
                order,
                schedule: Schedule { replicas, steps },
            }),
            Some(Err(e)) => err(order_line, e.to_string()),
            None => {
                let mut typed = Vec::with_capacity(steps.len());
                for (step, line) in steps.into_iter().zip(step_lines) {
                    typed.push(match step {
                        Step::Write { replica, value } => Step::Write {
                            replica,
                            value: match parse_lww_token(&value) {
                                Some(v) => v,
                                None => return err(line, format!("expected `<value>@<timestamp>`, found `{value}`")),
                            },
                        },
                        Step::Send { from, to } => Step::Send { from, to },
                        Step::Read { replica, expected } => Step::Read { replica, expected },
                    });
                }
                Ok(Scenario::Lww {
                    order: lww_order(),
                    schedule: Schedule { replicas, steps: typed },
                })
            }
        }
    }
}

/// Renders a schedule in the scenario format.
pub fn render_scenario<V: Display>(order: &OrderSpec, schedule: &Schedule<V>) -> String {
    let mut out = String::new();
    let ids: Vec<&str> = schedule.replicas.iter().map(|r| r.as_str()).collect();
    writeln!(out, "replicas {}", ids.join(" ")).unwrap();
    write!(out, "{order}").unwrap();
    for step in &schedule.steps {
        match step {
            Step::Write { replica, value } => writeln!(out, "write {replica} {value}"),
            Step::Send { from, to } => writeln!(out, "send {from} {to}"),
            Step::Read {
                replica,
                expected: None,
            } => writeln!(out, "read {replica}"),
            Step::Read {
                replica,
                expected: Some(values),
            } => {
                let mut line = format!("read {replica} expect");
                for v in values {
                    line.push(' ');
                    line.push_str(v);
                }
                writeln!(out, "{line}")
            }
        }
        .unwrap();
    }
    out
}
