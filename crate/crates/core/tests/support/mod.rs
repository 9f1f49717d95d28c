//! Shared helpers for the integration suites: deterministic generators for
//! queries and strict update streams, and the exhaustive stream walker that
//! checks an evaluator against the oracle on every reachable prefix.

#![allow(dead_code)]

use std::collections::BTreeSet;

use deltabgp::model::{
    Answer, DataTriple, DeltaAnswer, PartialMapping, Query, Sign, Strictness, Term,
    TriplePattern, UpdateMessage,
};
use deltabgp::oracle::SnapshotOracle;
use deltabgp::session::{open_session, Mode, Session};

pub fn iri(s: &str) -> Term {
    Term::iri(s)
}

pub fn var(s: &str) -> Term {
    Term::variable(s)
}

pub fn dt(s: &str, p: &str, o: &str) -> DataTriple {
    DataTriple::new(iri(s), iri(p), iri(o)).unwrap()
}

pub fn tp(s: Term, p: Term, o: Term) -> TriplePattern {
    TriplePattern::new(s, p, o).unwrap()
}

pub fn query(patterns: Vec<TriplePattern>) -> Query {
    Query::with_inferred_output(patterns).unwrap()
}

/// Deterministic SplitMix64; seeds are fixed per test so failures reproduce.
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }

    pub fn below(&mut self, n: usize) -> usize {
        (self.next_u64() % n as u64) as usize
    }

    pub fn chance(&mut self, numerator: usize, denominator: usize) -> bool {
        self.below(denominator) < numerator
    }

    pub fn choose<'a, T>(&mut self, items: &'a [T]) -> &'a T {
        &items[self.below(items.len())]
    }
}

/// Splits session deltas into positive and negative answer sets, asserting
/// there are no duplicates and all times match the update.
pub fn split_deltas(
    u: &UpdateMessage,
    deltas: &[DeltaAnswer],
) -> (BTreeSet<Answer>, BTreeSet<Answer>) {
    let mut positives = BTreeSet::new();
    let mut negatives = BTreeSet::new();
    for d in deltas {
        assert_eq!(d.time, u.time, "delta time must match the update time");
        let fresh = match d.sign {
            Sign::Positive => positives.insert(d.answer.clone()),
            Sign::Negative => negatives.insert(d.answer.clone()),
        };
        assert!(fresh, "duplicate delta for answer {}", d.answer);
        assert!(
            !(positives.contains(&d.answer) && negatives.contains(&d.answer)),
            "answer {} emitted with both signs",
            d.answer
        );
    }
    (positives, negatives)
}

/// Feeds one update to both engines and asserts exact delta and
/// consolidated-set equality.
pub fn step_and_compare(
    session: &mut Session,
    oracle: &mut SnapshotOracle,
    u: &UpdateMessage,
    context: &str,
) {
    let deltas = session
        .feed(u)
        .unwrap_or_else(|e| panic!("{context}: session failed at t={}: {e}", u.time));
    let (expected_pos, expected_neg) = oracle
        .step(u)
        .unwrap_or_else(|e| panic!("{context}: oracle failed at t={}: {e}", u.time));
    let (got_pos, got_neg) = split_deltas(u, &deltas);
    assert_eq!(got_pos, expected_pos, "{context}: positives at t={}", u.time);
    assert_eq!(got_neg, expected_neg, "{context}: negatives at t={}", u.time);
    assert_eq!(
        session.consolidated(),
        oracle.current_answers(),
        "{context}: consolidated set at t={}",
        u.time
    );
}

/// Walks every strict stream over the edge alphabet up to the given length
/// (at each point exactly one of ins/del is legal per edge), comparing the
/// session's deltas at every prefix against the two-sided snapshot diff
/// `Q(G_k) - Q(G_{k-1})` / `Q(G_{k-1}) - Q(G_k)`. The walker keeps a single
/// graph and undoes updates on backtrack; the session is cloned per node.
/// Returns the number of stream prefixes checked.
pub fn exhaustive_stream_check(
    q: &Query,
    alphabet: &[DataTriple],
    max_len: usize,
    mode: Mode,
) -> u64 {
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        q: &Query,
        alphabet: &[DataTriple],
        present: &mut Vec<bool>,
        graph: &mut deltabgp::Graph,
        answers: &BTreeSet<Answer>,
        remaining: usize,
        time: u64,
        session: &Session,
        context: &str,
        count: &mut u64,
    ) {
        if remaining == 0 {
            return;
        }
        for (i, edge) in alphabet.iter().enumerate() {
            let u = if present[i] {
                UpdateMessage::del(time, edge.clone())
            } else {
                UpdateMessage::ins(time, edge.clone())
            };
            let mut session = session.clone();
            let deltas = session
                .feed(&u)
                .unwrap_or_else(|e| panic!("{context}: session failed at t={time}: {e}"));
            deltabgp::model::apply_update(graph, &u, Strictness::Strict).unwrap();
            let after = deltabgp::oracle::evaluate(q, graph);
            let expected_pos: BTreeSet<Answer> = after.difference(answers).cloned().collect();
            let expected_neg: BTreeSet<Answer> = answers.difference(&after).cloned().collect();
            let (got_pos, got_neg) = split_deltas(&u, &deltas);
            assert_eq!(got_pos, expected_pos, "{context}: positives at t={time}");
            assert_eq!(got_neg, expected_neg, "{context}: negatives at t={time}");
            assert_eq!(
                session.consolidated(),
                &after,
                "{context}: consolidated set at t={time}"
            );
            *count += 1;
            present[i] = !present[i];
            recurse(
                q,
                alphabet,
                present,
                graph,
                &after,
                remaining - 1,
                time + 1,
                &session,
                context,
                count,
            );
            present[i] = !present[i];
            deltabgp::model::apply_update(graph, &u.inverse(), Strictness::Strict).unwrap();
        }
    }

    let session = open_session(q.clone(), mode, Strictness::Strict).unwrap();
    let mut present = vec![false; alphabet.len()];
    let mut graph = deltabgp::Graph::new();
    let mut count = 0;
    let context = format!("query {q}");
    recurse(
        q,
        alphabet,
        &mut present,
        &mut graph,
        &BTreeSet::new(),
        max_len,
        1,
        &session,
        &context,
        &mut count,
    );
    count
}

/// Instantiates a pattern's variables with constants from the pool; the same
/// variable gets the same constant at both ends.
pub fn instantiate(
    pattern: &TriplePattern,
    rng: &mut SplitMix64,
    constants: &[&str],
) -> DataTriple {
    let mut binding = PartialMapping::new();
    let mut pairs = Vec::new();
    for v in pattern.variables() {
        if binding.get(v).is_none() {
            pairs.push((v.clone(), iri(constants[rng.below(constants.len())])));
            binding = PartialMapping::from_bindings(pairs.clone()).unwrap();
        }
    }
    binding
        .apply(pattern)
        .as_data_triple()
        .expect("all variables instantiated")
}

/// A pool of edges relevant to the query (pattern instantiations) plus noise.
pub fn edge_pool(
    q: &Query,
    rng: &mut SplitMix64,
    constants: &[&str],
    noise: usize,
) -> Vec<DataTriple> {
    let mut pool: Vec<DataTriple> = Vec::new();
    for pattern in q.patterns() {
        for _ in 0..6 {
            let t = instantiate(pattern, rng, constants);
            if !pool.contains(&t) {
                pool.push(t);
            }
        }
    }
    let mut predicates: Vec<String> = q
        .patterns()
        .iter()
        .map(|p| p.predicate().lexical().to_string())
        .collect();
    predicates.push("px".to_string());
    predicates.dedup();
    for _ in 0..noise {
        let t = dt(
            constants[rng.below(constants.len())],
            &predicates[rng.below(predicates.len())],
            constants[rng.below(constants.len())],
        );
        if !pool.contains(&t) {
            pool.push(t);
        }
    }
    pool
}

/// A strict stream over the pool: each step inserts an absent edge or
/// deletes a present one, insert-biased so answers actually materialize.
pub fn random_stream(
    rng: &mut SplitMix64,
    pool: &[DataTriple],
    len: usize,
) -> Vec<UpdateMessage> {
    let mut present = vec![false; pool.len()];
    let mut updates = Vec::new();
    for time in 1..=len as u64 {
        let live: Vec<usize> = (0..pool.len()).filter(|&i| present[i]).collect();
        let absent: Vec<usize> = (0..pool.len()).filter(|&i| !present[i]).collect();
        let delete = if live.is_empty() {
            false
        } else if absent.is_empty() {
            true
        } else {
            rng.chance(2, 5)
        };
        let i = if delete {
            *rng.choose(&live)
        } else {
            *rng.choose(&absent)
        };
        present[i] = !present[i];
        updates.push(if delete {
            UpdateMessage::del(time, pool[i].clone())
        } else {
            UpdateMessage::ins(time, pool[i].clone())
        });
    }
    updates
}

/// An insert-everything phase followed by a delete-everything phase, both in
/// random order.
pub fn insert_then_delete_all(rng: &mut SplitMix64, pool: &[DataTriple]) -> Vec<UpdateMessage> {
    let mut order: Vec<usize> = (0..pool.len()).collect();
    shuffle(rng, &mut order);
    let mut updates: Vec<UpdateMessage> = order
        .iter()
        .enumerate()
        .map(|(k, &i)| UpdateMessage::ins(k as u64 + 1, pool[i].clone()))
        .collect();
    shuffle(rng, &mut order);
    let offset = updates.len() as u64;
    updates.extend(
        order
            .iter()
            .enumerate()
            .map(|(k, &i)| UpdateMessage::del(offset + k as u64 + 1, pool[i].clone())),
    );
    updates
}

fn shuffle(rng: &mut SplitMix64, items: &mut [usize]) {
    for i in (1..items.len()).rev() {
        items.swap(i, rng.below(i + 1));
    }
}

pub const QUERY_CONSTANTS: [&str; 5] = ["c0", "c1", "c2", "c3", "c4"];
pub const STREAM_CONSTANTS: [&str; 8] = ["c0", "c1", "c2", "c3", "c4", "c5", "c6", "c7"];
pub const PREDICATES: [&str; 3] = ["p0", "p1", "p2"];

/// A random loosely-connected query: 1..=3 single-variable star blocks with
/// constant satellites, plus an optional ground residue.
pub fn random_loosely_query(rng: &mut SplitMix64) -> Query {
    loop {
        let stars = 1 + rng.below(3);
        let mut patterns: Vec<TriplePattern> = Vec::new();
        for s in 0..stars {
            let v = var(&format!("V{s}"));
            for _ in 0..1 + rng.below(2) {
                let c = iri(rng.choose(&QUERY_CONSTANTS));
                let p = iri(rng.choose(&PREDICATES));
                let pattern = if rng.chance(1, 2) {
                    tp(v.clone(), p, c)
                } else {
                    tp(c, p, v.clone())
                };
                if patterns.len() < 6 && !patterns.contains(&pattern) {
                    patterns.push(pattern);
                }
            }
        }
        for _ in 0..rng.below(3) {
            let pattern = tp(
                iri(rng.choose(&QUERY_CONSTANTS)),
                iri(rng.choose(&PREDICATES)),
                iri(rng.choose(&QUERY_CONSTANTS)),
            );
            if patterns.len() < 6 && !patterns.contains(&pattern) {
                patterns.push(pattern);
            }
        }
        let q = query(patterns);
        if matches!(
            deltabgp::classify(&q),
            deltabgp::QueryClass::LooselyConnected
        ) {
            return q;
        }
    }
}

/// A random connected-variable query: a spanning tree over 2..=4 variables,
/// extra variable-variable edges, and optional variable-constant edges.
pub fn random_connected_variable_query(rng: &mut SplitMix64) -> Query {
    loop {
        let n_vars = 2 + rng.below(3);
        let vars: Vec<Term> = (0..n_vars).map(|i| var(&format!("V{i}"))).collect();
        let mut patterns: Vec<TriplePattern> = Vec::new();
        let push = |patterns: &mut Vec<TriplePattern>, pattern: TriplePattern| {
            if patterns.len() < 6 && !patterns.contains(&pattern) {
                patterns.push(pattern);
            }
        };
        for i in 1..n_vars {
            let other = vars[rng.below(i)].clone();
            let p = iri(rng.choose(&PREDICATES));
            let pattern = if rng.chance(1, 2) {
                tp(vars[i].clone(), p, other)
            } else {
                tp(other, p, vars[i].clone())
            };
            push(&mut patterns, pattern);
        }
        for _ in 0..rng.below(3) {
            let a = vars[rng.below(n_vars)].clone();
            let b = vars[rng.below(n_vars)].clone();
            push(
                &mut patterns,
                tp(a, iri(rng.choose(&PREDICATES)), b),
            );
        }
        for _ in 0..rng.below(3) {
            let v = vars[rng.below(n_vars)].clone();
            let c = iri(rng.choose(&QUERY_CONSTANTS));
            let p = iri(rng.choose(&PREDICATES));
            let pattern = if rng.chance(1, 2) {
                tp(v, p, c)
            } else {
                tp(c, p, v)
            };
            push(&mut patterns, pattern);
        }
        let q = query(patterns);
        if matches!(
            deltabgp::classify(&q),
            deltabgp::QueryClass::ConnectedVariable
        ) {
            return q;
        }
    }
}

/// A random simple var-centric star query.
pub fn random_star_query(rng: &mut SplitMix64) -> Query {
    loop {
        let v = var("X");
        let mut patterns: Vec<TriplePattern> = Vec::new();
        for _ in 0..1 + rng.below(3) {
            let c = iri(rng.choose(&QUERY_CONSTANTS));
            let p = iri(rng.choose(&PREDICATES));
            let pattern = if rng.chance(1, 2) {
                tp(v.clone(), p, c)
            } else {
                tp(c, p, v.clone())
            };
            if !patterns.contains(&pattern) {
                patterns.push(pattern);
            }
        }
        let q = query(patterns);
        if matches!(
            deltabgp::classify(&q),
            deltabgp::QueryClass::SimpleVarCentricStar { .. }
        ) {
            return q;
        }
    }
}

/// A random query of any shape with at least one variable.
pub fn random_bgp_query(rng: &mut SplitMix64) -> Query {
    let var_names = ["V0", "V1", "V2", "V3"];
    loop {
        let n = 1 + rng.below(5);
        let mut patterns: Vec<TriplePattern> = Vec::new();
        for _ in 0..n {
            let node = |rng: &mut SplitMix64| {
                if rng.chance(1, 2) {
                    var(rng.choose(&var_names))
                } else {
                    iri(rng.choose(&QUERY_CONSTANTS))
                }
            };
            let pattern = tp(node(rng), iri(rng.choose(&PREDICATES)), node(rng));
            if !patterns.contains(&pattern) {
                patterns.push(pattern);
            }
        }
        let q = query(patterns);
        if !q.output().is_empty() {
            return q;
        }
    }
}
