//! Instantiation engine for connected-variable and arbitrary queries.
//!
//! Every inserted edge that unifies with a query pattern pins that pattern's
//! variables to constants and spawns an instance record: the binding, the
//! seeding edge, and a child evaluator over the residual query (the full
//! query under the binding, with the seed pattern taken as satisfied while
//! the seed edge lives). Residuals classify into the cheaper classes where
//! possible and recurse here otherwise; each level drops one pattern, so the
//! recursion depth is bounded by the query size.
//!
//! The engine keeps its own snapshot of the graph. A freshly seeded child
//! is brought up to date by replaying the snapshot into it, which also
//! covers residual patterns that the seed edge itself satisfies. Deleting a
//! record's seed edge tears the record down and retracts whatever it still
//! contributes.
//!
//! The same answer is typically derived once per live record matching it, so
//! raw child deltas pass through a global answer counter and only the 0-to-1
//! and 1-to-0 transitions are emitted.

use std::collections::HashMap;

use indexmap::IndexSet;
use thiserror::Error;

use crate::eval::Evaluator;
use crate::model::{
    apply_update, unify, Answer, AssumptionViolation, DataTriple, DeltaAnswer, PartialMapping,
    Query, Sign, Strictness, Term, UpdateMessage, UpdateOp, UpdateOutcome,
};

/// Multiplicities of currently derived answers. An answer is externally
/// visible iff its count is at least one; deltas fire only on visibility
/// transitions.
#[derive(Clone, Debug, Default)]
pub struct AnswerCounter {
    counts: HashMap<Answer, usize>,
}

impl AnswerCounter {
    pub fn new() -> Self {
        AnswerCounter::default()
    }

    /// True iff the answer just became visible.
    fn increment(&mut self, a: &Answer) -> bool {
        let count = self.counts.entry(a.clone()).or_insert(0);
        *count += 1;
        *count == 1
    }

    /// True iff the answer just became hidden.
    fn decrement(&mut self, a: &Answer) -> bool {
        let count = self
            .counts
            .get_mut(a)
            .expect("decrement only runs for counted answers");
        *count -= 1;
        if *count == 0 {
            self.counts.remove(a);
            true
        } else {
            false
        }
    }

    pub fn count(&self, a: &Answer) -> usize {
        self.counts.get(a).copied().unwrap_or(0)
    }

    /// Number of visible answers.
    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("binding domain does not match the seed pattern's variables")]
pub struct BindingMismatch;

/// One instantiation of the query by a seeding edge.
#[derive(Clone, Debug)]
pub struct InstanceRecord {
    seed_edge: DataTriple,
    seed_pattern_index: usize,
    binding: PartialMapping,
    /// Evaluator over the residual query; `None` when the residual is empty
    /// (single-pattern queries), in which case the record contributes its
    /// binding's answer for as long as the seed edge lives.
    child: Option<Box<Evaluator>>,
    /// Output positions filled by the binding.
    bound_values: Vec<(usize, Term)>,
    /// Full-output position of each child output variable.
    child_positions: Vec<usize>,
    /// Answers this record currently derives, in insertion order.
    contributed: IndexSet<Answer>,
}

impl InstanceRecord {
    pub fn seed_edge(&self) -> &DataTriple {
        &self.seed_edge
    }

    pub fn seed_pattern_index(&self) -> usize {
        self.seed_pattern_index
    }

    pub fn binding(&self) -> &PartialMapping {
        &self.binding
    }

    pub fn residual(&self) -> Option<&Query> {
        self.child.as_deref().map(Evaluator::query)
    }

    /// Extends a residual answer with the seed binding into a full answer.
    fn full_answer(&self, child_answer: &Answer) -> Answer {
        let width = self.bound_values.len() + self.child_positions.len();
        let mut values: Vec<Option<Term>> = vec![None; width];
        for (pos, value) in &self.bound_values {
            values[*pos] = Some(value.clone());
        }
        for (child_pos, full_pos) in self.child_positions.iter().enumerate() {
            values[*full_pos] = Some(child_answer.values()[child_pos].clone());
        }
        Answer::new(
            values
                .into_iter()
                .map(|v| v.expect("binding and residual cover the output"))
                .collect(),
        )
    }

    fn state_size(&self) -> usize {
        let child = self.child.as_ref().map_or(0, |c| {
            c.dynamic_state_size() + c.fixed_state_size()
        });
        1 + self.contributed.len() + child
    }
}

/// Builds the record for instantiating pattern `t_index` of `query` with
/// `theta`, whose domain must be exactly the pattern's variables. The child
/// starts empty; the caller replays the current snapshot into it.
pub fn seed_instance(
    query: &Query,
    t_index: usize,
    theta: PartialMapping,
    strictness: Strictness,
) -> Result<InstanceRecord, BindingMismatch> {
    let pattern = &query.patterns()[t_index];
    let mut pattern_vars: Vec<&Term> = pattern.variables().collect();
    pattern_vars.dedup();
    if theta.len() != pattern_vars.len() || !pattern_vars.iter().all(|v| theta.get(v).is_some()) {
        return Err(BindingMismatch);
    }
    let seed_edge = theta
        .apply(pattern)
        .as_data_triple()
        .expect("theta instantiates every variable of the seed pattern");

    // The residual: every other pattern under theta. Substitution can make
    // patterns collide; set semantics keeps one copy.
    let mut residual = Vec::new();
    for (j, p) in query.patterns().iter().enumerate() {
        if j == t_index {
            continue;
        }
        let instantiated = theta.apply(p);
        if !residual.contains(&instantiated) {
            residual.push(instantiated);
        }
    }

    let bound_values = query
        .output()
        .iter()
        .enumerate()
        .filter_map(|(i, v)| theta.get(v).map(|c| (i, c.clone())))
        .collect();

    let (child, child_positions) = if residual.is_empty() {
        (None, Vec::new())
    } else {
        let output: Vec<Term> = query
            .output()
            .iter()
            .filter(|v| theta.get(v).is_none())
            .cloned()
            .collect();
        let child_query =
            Query::new(residual, output).expect("residual patterns are distinct and non-empty");
        debug_assert!(child_query.len() < query.len());
        let child_positions = child_query
            .output()
            .iter()
            .map(|v| query.var_position(v).expect("child variables come from the query"))
            .collect();
        (
            Some(Box::new(Evaluator::for_query(&child_query, strictness))),
            child_positions,
        )
    };

    Ok(InstanceRecord {
        seed_edge,
        seed_pattern_index: t_index,
        binding: theta,
        child,
        bound_values,
        child_positions,
        contributed: IndexSet::new(),
    })
}

/// Evaluator for arbitrary queries; the intended audience is the
/// connected-variable and general classes that no specialized evaluator
/// covers.
#[derive(Clone, Debug)]
pub struct GeneralEvaluator {
    query: Query,
    strictness: Strictness,
    graph: crate::model::Graph,
    records: Vec<InstanceRecord>,
    counter: AnswerCounter,
}

impl GeneralEvaluator {
    pub fn new(query: Query, strictness: Strictness) -> Self {
        GeneralEvaluator {
            query,
            strictness,
            graph: crate::model::Graph::new(),
            records: Vec::new(),
            counter: AnswerCounter::new(),
        }
    }

    pub fn query(&self) -> &Query {
        &self.query
    }

    pub fn record_count(&self) -> usize {
        self.records.len()
    }

    pub fn counter(&self) -> &AnswerCounter {
        &self.counter
    }

    /// Snapshot triples, records with their children, and counted answers.
    pub fn dynamic_state_size(&self) -> usize {
        self.graph.len()
            + self
                .records
                .iter()
                .map(InstanceRecord::state_size)
                .sum::<usize>()
            + self.counter.len()
    }

    pub fn process_update(
        &mut self,
        u: &UpdateMessage,
    ) -> Result<Vec<DeltaAnswer>, AssumptionViolation> {
        if apply_update(&mut self.graph, u, self.strictness)? == UpdateOutcome::NoOp {
            return Ok(Vec::new());
        }
        let mut deltas = Vec::new();
        // Live children see every change, including edges about to tear
        // their record down below.
        for record in &mut self.records {
            route_child_update(record, &mut self.counter, u, &mut deltas)?;
        }
        match u.op {
            UpdateOp::Ins => {
                for t_index in 0..self.query.len() {
                    let Some(theta) = unify(&self.query.patterns()[t_index], &u.triple) else {
                        continue;
                    };
                    let exists = self
                        .records
                        .iter()
                        .any(|r| r.seed_pattern_index == t_index && r.binding == theta);
                    if exists {
                        continue;
                    }
                    let mut record = seed_instance(&self.query, t_index, theta, self.strictness)
                        .expect("unification binds exactly the pattern's variables");
                    match record.child {
                        None => {
                            let answer = record.full_answer(&Answer::empty());
                            record.contributed.insert(answer.clone());
                            if self.counter.increment(&answer) {
                                deltas.push(DeltaAnswer::new(u.time, Sign::Positive, answer));
                            }
                        }
                        Some(_) => {
                            // Bring the child up to date with the snapshot,
                            // seed edge included: other patterns may match it.
                            for triple in self.graph.iter() {
                                let replay = UpdateMessage::ins(u.time, triple.clone());
                                route_child_update(
                                    &mut record,
                                    &mut self.counter,
                                    &replay,
                                    &mut deltas,
                                )?;
                            }
                        }
                    }
                    self.records.push(record);
                }
            }
            UpdateOp::Del => {
                let mut kept = Vec::with_capacity(self.records.len());
                for record in std::mem::take(&mut self.records) {
                    if record.seed_edge == u.triple {
                        for answer in &record.contributed {
                            if self.counter.decrement(answer) {
                                deltas.push(DeltaAnswer::new(
                                    u.time,
                                    Sign::Negative,
                                    answer.clone(),
                                ));
                            }
                        }
                    } else {
                        kept.push(record);
                    }
                }
                self.records = kept;
            }
        }
        Ok(deltas)
    }
}

/// Feeds one update to a record's child and folds the child's deltas into
/// the record's contribution and the global counter, emitting visibility
/// transitions.
fn route_child_update(
    record: &mut InstanceRecord,
    counter: &mut AnswerCounter,
    u: &UpdateMessage,
    deltas: &mut Vec<DeltaAnswer>,
) -> Result<(), AssumptionViolation> {
    let Some(child) = record.child.as_mut() else {
        return Ok(());
    };
    for child_delta in child.process_update(u)? {
        let answer = record.full_answer(&child_delta.answer);
        match child_delta.sign {
            Sign::Positive => {
                let inserted = record.contributed.insert(answer.clone());
                debug_assert!(inserted, "child emitted a duplicate positive");
                if counter.increment(&answer) {
                    deltas.push(DeltaAnswer::new(u.time, Sign::Positive, answer));
                }
            }
            Sign::Negative => {
                let removed = record.contributed.shift_remove(&answer);
                debug_assert!(removed, "child retracted an answer it never derived");
                if counter.decrement(&answer) {
                    deltas.push(DeltaAnswer::new(u.time, Sign::Negative, answer));
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{classify, QueryClass};
    use crate::test_util::*;

    fn path_query() -> Query {
        query(vec![
            tp(var("X"), iri("p"), var("Y")),
            tp(var("Y"), iri("q"), var("Z")),
        ])
    }

    fn deltas_of(
        eval: &mut GeneralEvaluator,
        u: UpdateMessage,
    ) -> Vec<(Sign, Answer)> {
        eval.process_update(&u)
            .unwrap()
            .into_iter()
            .map(|d| (d.sign, d.answer))
            .collect()
    }

    #[test]
    fn two_hop_path_with_shared_tail() {
        let mut eval = GeneralEvaluator::new(path_query(), Strictness::Strict);
        assert!(deltas_of(&mut eval, UpdateMessage::ins(1, dt("a", "p", "b"))).is_empty());
        assert_eq!(
            deltas_of(&mut eval, UpdateMessage::ins(2, dt("b", "q", "c"))),
            vec![(Sign::Positive, answer(&[iri("a"), iri("b"), iri("c")]))]
        );
        assert_eq!(
            deltas_of(&mut eval, UpdateMessage::ins(3, dt("a2", "p", "b"))),
            vec![(Sign::Positive, answer(&[iri("a2"), iri("b"), iri("c")]))]
        );
        // Both answers die with the shared tail edge, emitted once each
        // despite the two derivation routes per answer.
        assert_eq!(
            deltas_of(&mut eval, UpdateMessage::del(4, dt("b", "q", "c"))),
            vec![
                (Sign::Negative, answer(&[iri("a"), iri("b"), iri("c")])),
                (Sign::Negative, answer(&[iri("a2"), iri("b"), iri("c")])),
            ]
        );
        assert!(eval.counter().is_empty());
    }

    #[test]
    fn seed_instance_builds_ground_residual() {
        let q = query(vec![
            tp(var("X"), iri("p"), var("Y")),
            tp(var("Y"), iri("q"), iri("c")),
        ]);
        let theta = mapping(&[("X", iri("a")), ("Y", iri("b"))]);
        let record = seed_instance(&q, 0, theta, Strictness::Strict).unwrap();
        let residual = record.residual().unwrap();
        assert_eq!(residual.patterns(), &[tp(iri("b"), iri("q"), iri("c"))]);
        assert_eq!(classify(residual), QueryClass::Ground);
        assert_eq!(record.seed_edge(), &dt("a", "p", "b"));
    }

    #[test]
    fn seed_instance_empty_residual_is_immediate() {
        let q = query(vec![tp(var("X"), iri("p"), var("X"))]);
        let theta = mapping(&[("X", iri("a"))]);
        let record = seed_instance(&q, 0, theta, Strictness::Strict).unwrap();
        assert!(record.residual().is_none());
        assert_eq!(record.full_answer(&Answer::empty()), answer(&[iri("a")]));
    }

    #[test]
    fn seed_instance_rejects_wrong_domain() {
        let q = path_query();
        let partial = mapping(&[("X", iri("a"))]);
        assert_eq!(
            seed_instance(&q, 0, partial, Strictness::Strict).unwrap_err(),
            BindingMismatch
        );
        let extra = mapping(&[("X", iri("a")), ("Y", iri("b")), ("Z", iri("c"))]);
        assert_eq!(
            seed_instance(&q, 0, extra, Strictness::Strict).unwrap_err(),
            BindingMismatch
        );
    }

    #[test]
    fn self_loop_single_pattern_query() {
        let q = query(vec![tp(var("X"), iri("p"), var("X"))]);
        let mut eval = GeneralEvaluator::new(q, Strictness::Strict);
        assert!(deltas_of(&mut eval, UpdateMessage::ins(1, dt("a", "p", "b"))).is_empty());
        assert_eq!(
            deltas_of(&mut eval, UpdateMessage::ins(2, dt("c", "p", "c"))),
            vec![(Sign::Positive, answer(&[iri("c")]))]
        );
        assert_eq!(
            deltas_of(&mut eval, UpdateMessage::del(3, dt("c", "p", "c"))),
            vec![(Sign::Negative, answer(&[iri("c")]))]
        );
    }

    #[test]
    fn same_edge_fills_two_patterns() {
        // Both patterns map onto (a,p,a) under X=Y=a.
        let q = query(vec![
            tp(var("X"), iri("p"), var("Y")),
            tp(var("Y"), iri("p"), var("X")),
        ]);
        let mut eval = GeneralEvaluator::new(q, Strictness::Strict);
        assert_eq!(
            deltas_of(&mut eval, UpdateMessage::ins(1, dt("a", "p", "a"))),
            vec![(Sign::Positive, answer(&[iri("a"), iri("a")]))]
        );
        assert_eq!(eval.record_count(), 2);
        assert_eq!(
            deltas_of(&mut eval, UpdateMessage::del(2, dt("a", "p", "a"))),
            vec![(Sign::Negative, answer(&[iri("a"), iri("a")]))]
        );
        assert_eq!(eval.record_count(), 0);
        assert_eq!(eval.dynamic_state_size(), 0);
    }

    #[test]
    fn mixed_query_with_ground_pattern() {
        let q = query(vec![
            tp(var("X"), iri("p"), var("Y")),
            tp(iri("a"), iri("q"), iri("b")),
        ]);
        assert_eq!(classify(&q), QueryClass::GeneralBgp);
        let mut eval = GeneralEvaluator::new(q, Strictness::Strict);
        assert!(deltas_of(&mut eval, UpdateMessage::ins(1, dt("x", "p", "y"))).is_empty());
        assert_eq!(
            deltas_of(&mut eval, UpdateMessage::ins(2, dt("a", "q", "b"))),
            vec![(Sign::Positive, answer(&[iri("x"), iri("y")]))]
        );
        assert_eq!(
            deltas_of(&mut eval, UpdateMessage::ins(3, dt("x2", "p", "y"))),
            vec![(Sign::Positive, answer(&[iri("x2"), iri("y")]))]
        );
        assert_eq!(
            deltas_of(&mut eval, UpdateMessage::del(4, dt("a", "q", "b"))),
            vec![
                (Sign::Negative, answer(&[iri("x"), iri("y")])),
                (Sign::Negative, answer(&[iri("x2"), iri("y")])),
            ]
        );
    }

    #[test]
    fn retract_and_reinsert_round_trips() {
        let mut eval = GeneralEvaluator::new(path_query(), Strictness::Strict);
        deltas_of(&mut eval, UpdateMessage::ins(1, dt("a", "p", "b")));
        deltas_of(&mut eval, UpdateMessage::ins(2, dt("b", "q", "c")));
        assert_eq!(
            deltas_of(&mut eval, UpdateMessage::del(3, dt("a", "p", "b"))),
            vec![(Sign::Negative, answer(&[iri("a"), iri("b"), iri("c")]))]
        );
        assert_eq!(
            deltas_of(&mut eval, UpdateMessage::ins(4, dt("a", "p", "b"))),
            vec![(Sign::Positive, answer(&[iri("a"), iri("b"), iri("c")]))]
        );
    }

    #[test]
    fn delete_everything_returns_to_zero_state() {
        let q = query(vec![
            tp(var("X"), iri("p"), var("Y")),
            tp(var("Y"), iri("q"), var("Z")),
            tp(var("Z"), iri("p"), var("X")),
        ]);
        let mut eval = GeneralEvaluator::new(q, Strictness::Strict);
        let edges = [
            dt("a", "p", "b"),
            dt("b", "q", "c"),
            dt("c", "p", "a"),
            dt("b", "q", "a"),
        ];
        let mut t = 0;
        for e in &edges {
            t += 1;
            eval.process_update(&UpdateMessage::ins(t, e.clone())).unwrap();
        }
        for e in &edges {
            t += 1;
            eval.process_update(&UpdateMessage::del(t, e.clone())).unwrap();
        }
        assert_eq!(eval.record_count(), 0);
        assert!(eval.counter().is_empty());
        assert_eq!(eval.dynamic_state_size(), 0);
    }

    #[test]
    fn lenient_mode_skips_duplicate_edges() {
        let mut eval = GeneralEvaluator::new(path_query(), Strictness::Lenient);
        deltas_of(&mut eval, UpdateMessage::ins(1, dt("a", "p", "b")));
        assert!(deltas_of(&mut eval, UpdateMessage::ins(2, dt("a", "p", "b"))).is_empty());
        assert_eq!(eval.record_count(), 1);
        assert!(deltas_of(&mut eval, UpdateMessage::del(3, dt("b", "q", "c"))).is_empty());
    }
}
