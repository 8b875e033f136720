use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Schedule, Step};
use crate::clock::ReplicaId;
use crate::order::{bug_tracker, explicit_relation_order, lww_order, ranked_order, ExplicitRelation};
use crate::order::{LwwValue, OrderKind, ValueOrder};

/// `A`, `B`, ... `Z`, then `R26`, `R27`, ...
pub fn replica_ids(count: usize) -> Vec<ReplicaId> {
    (0..count)
        .map(|i| {
            if i < 26 {
                ReplicaId::new(((b'A' + i as u8) as char).to_string())
            } else {
                ReplicaId::new(format!("R{i}"))
            }
        })
        .collect()
}

pub(crate) fn random_steps<V: Clone>(
    rng: &mut impl Rng,
    replicas: &[ReplicaId],
    count: usize,
    domain: &[V],
    with_reads: bool,
) -> Vec<Step<V>> {
    let n = replicas.len();
    let mut steps = Vec::with_capacity(count);
    for _ in 0..count {
        let roll = rng.gen_range(0..10);
        let at = replicas[rng.gen_range(0..n)].clone();
        let step = if roll < 4 && !domain.is_empty() {
            Step::Write {
                replica: at,
                value: domain[rng.gen_range(0..domain.len())].clone(),
            }
        } else if roll < 8 && n > 1 {
            let from = rng.gen_range(0..n);
            let to = (from + rng.gen_range(1..n)) % n;
            Step::Send {
                from: replicas[from].clone(),
                to: replicas[to].clone(),
            }
        } else if with_reads {
            Step::Read {
                replica: at,
                expected: None,
            }
        } else {
            continue;
        };
        steps.push(step);
    }
    steps
}

/// Every replica sends to every other, in index order, twice over.
pub(crate) fn exchange_rounds<V>(replicas: &[ReplicaId]) -> Vec<Step<V>> {
    let mut steps = Vec::new();
    for _ in 0..2 {
        for from in replicas {
            for to in replicas {
                if from != to {
                    steps.push(Step::Send {
                        from: from.clone(),
                        to: to.clone(),
                    });
                }
            }
        }
    }
    steps
}

/// A seeded mix of writes, sends and reads over `replica_count` replicas,
/// followed by two full exchange rounds.
pub fn random_schedule<V: Clone>(seed: u64, replica_count: usize, step_count: usize, domain: &[V]) -> Schedule<V> {
    assert!(replica_count >= 1, "a schedule needs at least one replica");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let replicas = replica_ids(replica_count);
    let mut steps = random_steps(&mut rng, &replicas, step_count, domain, true);
    steps.extend(exchange_rounds(&replicas));
    Schedule { replicas, steps }
}

/// Shape of one randomized conformance run, derived from its seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CorpusCase {
    pub seed: u64,
    pub replicas: usize,
    pub steps: usize,
    pub domain_size: usize,
    pub kind: OrderKind,
}

pub enum CorpusRun {
    Plain {
        order: ValueOrder<String>,
        schedule: Schedule<String>,
        domain: Vec<String>,
    },
    Lww {
        order: ValueOrder<LwwValue<String>>,
        schedule: Schedule<LwwValue<String>>,
        domain: Vec<LwwValue<String>>,
    },
}

/// 2..=5 replicas, up to 25 random steps, 3..=6 distinct values; the order
/// kind cycles with the seed so consecutive seeds cover all four kinds.
pub fn corpus_case(seed: u64) -> CorpusCase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6d76_7272_636f_7270);
    CorpusCase {
        seed,
        replicas: rng.gen_range(2..=5),
        steps: rng.gen_range(0..=25),
        domain_size: rng.gen_range(3..=6),
        kind: OrderKind::ALL[(seed % 4) as usize],
    }
}

impl CorpusCase {
    pub fn build(&self) -> CorpusRun {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed.rotate_left(17) ^ 0x5eed);
        let tokens: Vec<String> = (0..self.domain_size).map(|i| format!("v{i}")).collect();
        let plain = |order: ValueOrder<String>, domain: Vec<String>| CorpusRun::Plain {
            schedule: random_schedule(self.seed, self.replicas, self.steps, &domain),
            order,
            domain,
        };
        match self.kind {
            OrderKind::Empty => plain(ValueOrder::empty(), tokens),
            OrderKind::ExplicitRelation => {
                if self.domain_size == 4 && rng.gen_bool(0.5) {
                    let domain = bug_tracker::STATUSES.iter().map(|s| s.to_string()).collect();
                    plain(bug_tracker::status_order(), domain)
                } else {
                    let mut ranked = tokens.clone();
                    ranked.shuffle(&mut rng);
                    let mut edges = Vec::new();
                    for i in 0..ranked.len() {
                        for j in i + 1..ranked.len() {
                            if rng.gen_bool(0.35) {
                                edges.push((ranked[i].clone(), ranked[j].clone()));
                            }
                        }
                    }
                    let rel = ExplicitRelation::new(tokens.clone(), edges).expect("edges stay inside the domain");
                    plain(
                        explicit_relation_order(&rel).expect("edges follow a fixed ranking"),
                        tokens,
                    )
                }
            }
            OrderKind::TotalComparator => {
                let mut ranked = tokens.clone();
                ranked.shuffle(&mut rng);
                plain(ranked_order(ranked), tokens)
            }
            OrderKind::LwwTimestamped => {
                // few distinct timestamps so that ties are common
                let domain: Vec<LwwValue<String>> = tokens
                    .into_iter()
                    .map(|t| LwwValue::new(t, rng.gen_range(1..=3), "", 0))
                    .collect();
                CorpusRun::Lww {
                    schedule: random_schedule(self.seed, self.replicas, self.steps, &domain),
                    order: lww_order(),
                    domain,
                }
            }
        }
    }
}
