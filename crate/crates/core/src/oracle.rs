//! Reference evaluator: full snapshot evaluation by backtracking join, plus a
//! per-update stepper that reports the two-sided set difference against the
//! previous snapshot's answers.
//!
//! This is the referee for every property test and the fallback evaluator for
//! oracle-mode sessions. Patterns are processed in query order with no
//! reordering, so the search is trivially auditable rather than fast.

use std::collections::BTreeSet;

use crate::model::{
    apply_update, join_mappings, unify, Answer, AssumptionViolation, Graph, PartialMapping, Query,
    Strictness, UpdateMessage, UpdateOutcome,
};

/// All answers of the query over the graph: the output tuples of every total
/// embedding, found pattern-at-a-time with backtracking.
pub fn evaluate(q: &Query, g: &Graph) -> BTreeSet<Answer> {
    let mut answers = BTreeSet::new();
    search(q, 0, g, &PartialMapping::new(), &mut answers);
    answers
}

fn search(q: &Query, idx: usize, g: &Graph, binding: &PartialMapping, out: &mut BTreeSet<Answer>) {
    if idx == q.len() {
        let values = q
            .output()
            .iter()
            .map(|v| binding.get(v).expect("total embedding binds every variable").clone())
            .collect();
        out.insert(Answer::new(values));
        return;
    }
    let pattern = binding.apply(&q.patterns()[idx]);
    if let Some(triple) = pattern.as_data_triple() {
        if g.contains(&triple) {
            search(q, idx + 1, g, binding, out);
        }
        return;
    }
    for triple in g.iter() {
        if let Some(extension) = unify(&pattern, triple) {
            let merged = join_mappings(binding, &extension)
                .expect("extension binds only variables left open by the binding");
            search(q, idx + 1, g, &merged, out);
        }
    }
}

/// Snapshot state for per-update differencing: the current graph and the
/// answers it yielded.
#[derive(Clone, Debug)]
pub struct SnapshotOracle {
    query: Query,
    strictness: Strictness,
    graph: Graph,
    previous_answers: BTreeSet<Answer>,
}

impl SnapshotOracle {
    pub fn new(query: Query, strictness: Strictness) -> Self {
        SnapshotOracle {
            query,
            strictness,
            graph: Graph::new(),
            previous_answers: BTreeSet::new(),
        }
    }

    /// Starts from an existing snapshot instead of the empty graph.
    pub fn with_graph(query: Query, strictness: Strictness, graph: Graph) -> Self {
        let previous_answers = evaluate(&query, &graph);
        SnapshotOracle {
            query,
            strictness,
            graph,
            previous_answers,
        }
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn current_answers(&self) -> &BTreeSet<Answer> {
        &self.previous_answers
    }

    /// Applies the update, re-evaluates, and returns the answers that
    /// entered and left the result set.
    pub fn step(
        &mut self,
        u: &UpdateMessage,
    ) -> Result<(BTreeSet<Answer>, BTreeSet<Answer>), AssumptionViolation> {
        if apply_update(&mut self.graph, u, self.strictness)? == UpdateOutcome::NoOp {
            return Ok((BTreeSet::new(), BTreeSet::new()));
        }
        let answers = evaluate(&self.query, &self.graph);
        let positives: BTreeSet<Answer> =
            answers.difference(&self.previous_answers).cloned().collect();
        let negatives: BTreeSet<Answer> =
            self.previous_answers.difference(&answers).cloned().collect();
        self.previous_answers = answers;
        Ok((positives, negatives))
    }

    /// Cached elements: graph triples plus remembered answers.
    pub fn state_size(&self) -> usize {
        self.graph.len() + self.previous_answers.len()
    }
}
