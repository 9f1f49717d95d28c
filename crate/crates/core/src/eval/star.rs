//! Continuous evaluation of simple var-centric star queries.
//!
//! Every pattern of such a query touches the central variable exactly once
//! and a constant on the other side, so any data edge that unifies with a
//! pattern pins the central to a constant value. The evaluator keeps one
//! ground instance per central value: its match state, index-aligned with
//! the star's pattern enumeration. The instance's ground query is never
//! stored, it is derivable by substituting the value into the star.
//!
//! One edge may unify with several patterns, possibly pinning different
//! central values or the same value twice (e.g. patterns (?X,p,a) and
//! (a,p,?X) against edge (a,p,a)), so all unifying (pattern, value) pairs
//! are processed in pattern order against the mutating instance list.

use indexmap::IndexMap;

use crate::analysis::{classify, QueryClass};
use crate::eval::ground::TripleMatchState;
use crate::eval::ClassMismatch;
use crate::model::{
    unify, AssumptionViolation, Query, Sign, Strictness, Term, UpdateMessage, UpdateOp,
};

/// A signed central-node value: the single-variable answer entering or
/// leaving the star's result set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StarResult {
    pub sign: Sign,
    pub value: Term,
}

/// Evaluator for a simple var-centric star query. Instances live in
/// insertion order and are pruned as soon as their state is all-zero.
#[derive(Clone, Debug)]
pub struct StarEvaluator {
    query: Query,
    central: Term,
    instances: IndexMap<Term, TripleMatchState>,
    strictness: Strictness,
}

impl StarEvaluator {
    pub fn new(query: Query, strictness: Strictness) -> Result<Self, ClassMismatch> {
        match classify(&query) {
            QueryClass::SimpleVarCentricStar { central } => Ok(StarEvaluator {
                query,
                central,
                instances: IndexMap::new(),
                strictness,
            }),
            class => Err(ClassMismatch {
                expected: "simple var-centric star",
                found: class,
            }),
        }
    }

    pub fn query(&self) -> &Query {
        &self.query
    }

    pub fn central(&self) -> &Term {
        &self.central
    }

    pub fn instance_count(&self) -> usize {
        self.instances.len()
    }

    pub fn instance_state(&self, value: &Term) -> Option<&TripleMatchState> {
        self.instances.get(value)
    }

    /// Central values whose instance is currently all-true, in instance
    /// insertion order.
    pub fn satisfied_values(&self) -> impl Iterator<Item = &Term> {
        self.instances
            .iter()
            .filter(|(_, state)| state.all_true())
            .map(|(value, _)| value)
    }

    /// All (pattern index, central value) pairs the edge unifies with.
    fn unifications(&self, u: &UpdateMessage) -> Vec<(usize, Term)> {
        self.query
            .patterns()
            .iter()
            .enumerate()
            .filter_map(|(j, pattern)| {
                unify(pattern, &u.triple).map(|m| {
                    let value = m
                        .get(&self.central)
                        .expect("every star pattern binds the central variable")
                        .clone();
                    (j, value)
                })
            })
            .collect()
    }

    pub fn process_update(
        &mut self,
        u: &UpdateMessage,
    ) -> Result<Vec<StarResult>, AssumptionViolation> {
        let mut results = Vec::new();
        for (j, value) in self.unifications(u) {
            match u.op {
                UpdateOp::Ins => match self.instances.get_mut(&value) {
                    Some(state) => {
                        if state.get(j) {
                            // This exact edge is already tracked by the
                            // instance: a duplicate insert.
                            match self.strictness {
                                Strictness::Strict => return Err(violation(u)),
                                Strictness::Lenient => continue,
                            }
                        }
                        state.set(j);
                        if state.all_true() {
                            results.push(StarResult {
                                sign: Sign::Positive,
                                value,
                            });
                        }
                    }
                    None => {
                        let mut state = TripleMatchState::new(self.query.len());
                        state.set(j);
                        let complete = state.all_true();
                        self.instances.insert(value.clone(), state);
                        if complete {
                            results.push(StarResult {
                                sign: Sign::Positive,
                                value,
                            });
                        }
                    }
                },
                UpdateOp::Del => {
                    let Some(state) = self.instances.get_mut(&value) else {
                        match self.strictness {
                            Strictness::Strict => return Err(violation(u)),
                            Strictness::Lenient => continue,
                        }
                    };
                    if !state.get(j) {
                        match self.strictness {
                            Strictness::Strict => return Err(violation(u)),
                            Strictness::Lenient => continue,
                        }
                    }
                    let was_satisfied = state.all_true();
                    state.clear(j);
                    let now_empty = state.all_zero();
                    if was_satisfied {
                        results.push(StarResult {
                            sign: Sign::Negative,
                            value: value.clone(),
                        });
                    }
                    if now_empty {
                        self.instances.shift_remove(&value);
                    }
                }
            }
        }
        Ok(results)
    }
}

fn violation(u: &UpdateMessage) -> AssumptionViolation {
    AssumptionViolation {
        time: u.time,
        op: u.op,
        triple: u.triple.clone(),
    }
}
