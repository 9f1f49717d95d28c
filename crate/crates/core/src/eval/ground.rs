//! Continuous evaluation of ground queries.
//!
//! The cached state is one boolean per query triple, index-aligned with the
//! query's pattern enumeration: bit i is set iff triple e_i is in the current
//! snapshot. The query holds as soon as all bits are set, so a completing
//! insert emits a positive and a breaking delete emits a negative.

use crate::analysis::{classify, QueryClass};
use crate::eval::ClassMismatch;
use crate::model::{AssumptionViolation, Query, Strictness, UpdateMessage, UpdateOp};

/// Fixed-length boolean array tracking which query triples are present.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TripleMatchState {
    bits: Vec<bool>,
}

impl TripleMatchState {
    pub fn new(len: usize) -> Self {
        TripleMatchState {
            bits: vec![false; len],
        }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn get(&self, i: usize) -> bool {
        self.bits[i]
    }

    pub fn set(&mut self, i: usize) {
        self.bits[i] = true;
    }

    pub fn clear(&mut self, i: usize) {
        self.bits[i] = false;
    }

    /// True iff every bit is set (the tracked query currently holds).
    pub fn all_true(&self) -> bool {
        self.bits.iter().all(|b| *b)
    }

    /// True iff no bit is set.
    pub fn all_zero(&self) -> bool {
        self.bits.iter().all(|b| !*b)
    }
}

/// Outcome of routing one update through a ground evaluator. Positive and
/// negative results carry the empty output tuple.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GroundResult {
    Positive,
    Negative,
    NoNewEmbedding,
}

/// Evaluator for a ground query over an update stream.
#[derive(Clone, Debug)]
pub struct GroundEvaluator {
    query: Query,
    state: TripleMatchState,
    strictness: Strictness,
}

impl GroundEvaluator {
    pub fn new(query: Query, strictness: Strictness) -> Result<Self, ClassMismatch> {
        let class = classify(&query);
        if class != QueryClass::Ground {
            return Err(ClassMismatch {
                expected: "ground",
                found: class,
            });
        }
        let state = TripleMatchState::new(query.len());
        Ok(GroundEvaluator {
            query,
            state,
            strictness,
        })
    }

    pub fn query(&self) -> &Query {
        &self.query
    }

    pub fn state(&self) -> &TripleMatchState {
        &self.state
    }

    /// True iff the query holds on the current snapshot.
    pub fn satisfied(&self) -> bool {
        self.state.all_true()
    }

    pub fn process_update(
        &mut self,
        u: &UpdateMessage,
    ) -> Result<GroundResult, AssumptionViolation> {
        // Patterns are distinct, so the update matches at most one of them.
        let matched = self
            .query
            .patterns()
            .iter()
            .position(|p| p.as_data_triple().as_ref() == Some(&u.triple));
        let Some(i) = matched else {
            return Ok(GroundResult::NoNewEmbedding);
        };
        match u.op {
            UpdateOp::Ins => {
                if self.state.get(i) {
                    // The tracked triple is already present: the snapshot did
                    // not change, so no delta either way.
                    return match self.strictness {
                        Strictness::Strict => Err(violation(u)),
                        Strictness::Lenient => Ok(GroundResult::NoNewEmbedding),
                    };
                }
                self.state.set(i);
                if self.state.all_true() {
                    Ok(GroundResult::Positive)
                } else {
                    Ok(GroundResult::NoNewEmbedding)
                }
            }
            UpdateOp::Del => {
                if !self.state.get(i) {
                    return match self.strictness {
                        Strictness::Strict => Err(violation(u)),
                        Strictness::Lenient => Ok(GroundResult::NoNewEmbedding),
                    };
                }
                let was_satisfied = self.state.all_true();
                self.state.clear(i);
                if was_satisfied {
                    Ok(GroundResult::Negative)
                } else {
                    Ok(GroundResult::NoNewEmbedding)
                }
            }
        }
    }
}

fn violation(u: &UpdateMessage) -> AssumptionViolation {
    AssumptionViolation {
        time: u.time,
        op: u.op,
        triple: u.triple.clone(),
    }
}
