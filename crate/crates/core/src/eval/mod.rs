//! Incremental evaluators, one per query class, behind a common dispatch
//! enum. All of them consume one update at a time and emit signed delta
//! answers aligned with the query's output pattern; consolidating the
//! emitted history always reproduces the full answer set of the current
//! snapshot.

pub mod general;
pub mod ground;
pub mod loosely;
pub mod star;

pub use general::{seed_instance, AnswerCounter, BindingMismatch, GeneralEvaluator, InstanceRecord};
pub use ground::{GroundEvaluator, GroundResult, TripleMatchState};
pub use loosely::LooselyEvaluator;
pub use star::{StarEvaluator, StarResult};

use thiserror::Error;

use crate::analysis::{classify, QueryClass};
use crate::model::{
    Answer, AssumptionViolation, DeltaAnswer, Query, Sign, Strictness, UpdateMessage,
};

/// A query was handed to an evaluator for a different class.
#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("expected a {expected} query, found a {found} query")]
pub struct ClassMismatch {
    pub expected: &'static str,
    pub found: QueryClass,
}

/// Class-dispatched incremental evaluator.
#[derive(Clone, Debug)]
pub enum Evaluator {
    Ground(GroundEvaluator),
    Star(StarEvaluator),
    Loosely(LooselyEvaluator),
    General(Box<GeneralEvaluator>),
}

impl Evaluator {
    /// Picks the evaluator for the query's class; the instantiation engine
    /// is the catch-all.
    pub fn for_query(query: &Query, strictness: Strictness) -> Evaluator {
        match classify(query) {
            QueryClass::Ground => Evaluator::Ground(
                GroundEvaluator::new(query.clone(), strictness).expect("classified ground"),
            ),
            QueryClass::SimpleVarCentricStar { .. } => Evaluator::Star(
                StarEvaluator::new(query.clone(), strictness).expect("classified star"),
            ),
            QueryClass::LooselyConnected => Evaluator::Loosely(
                LooselyEvaluator::new(query.clone(), strictness)
                    .expect("classified loosely-connected"),
            ),
            QueryClass::ConnectedVariable | QueryClass::GeneralBgp => {
                Evaluator::General(Box::new(GeneralEvaluator::new(query.clone(), strictness)))
            }
        }
    }

    pub fn query(&self) -> &Query {
        match self {
            Evaluator::Ground(e) => e.query(),
            Evaluator::Star(e) => e.query(),
            Evaluator::Loosely(e) => e.query(),
            Evaluator::General(e) => e.query(),
        }
    }

    pub fn process_update(
        &mut self,
        u: &UpdateMessage,
    ) -> Result<Vec<DeltaAnswer>, AssumptionViolation> {
        match self {
            Evaluator::Ground(e) => Ok(match e.process_update(u)? {
                GroundResult::Positive => {
                    vec![DeltaAnswer::new(u.time, Sign::Positive, Answer::empty())]
                }
                GroundResult::Negative => {
                    vec![DeltaAnswer::new(u.time, Sign::Negative, Answer::empty())]
                }
                GroundResult::NoNewEmbedding => Vec::new(),
            }),
            Evaluator::Star(e) => Ok(e
                .process_update(u)?
                .into_iter()
                .map(|r| DeltaAnswer::new(u.time, r.sign, Answer::new(vec![r.value])))
                .collect()),
            Evaluator::Loosely(e) => e.process_update(u),
            Evaluator::General(e) => e.process_update(u),
        }
    }

    /// Cached elements that grow and shrink with the stream.
    pub fn dynamic_state_size(&self) -> usize {
        match self {
            Evaluator::Ground(_) => 0,
            Evaluator::Star(e) => e.instance_count(),
            Evaluator::Loosely(e) => e.dynamic_state_size(),
            Evaluator::General(e) => e.dynamic_state_size(),
        }
    }

    /// Match-state bits whose count is fixed by the query alone.
    pub fn fixed_state_size(&self) -> usize {
        match self {
            Evaluator::Ground(e) => e.query().len(),
            Evaluator::Star(_) => 0,
            Evaluator::Loosely(e) => e.fixed_state_size(),
            Evaluator::General(_) => 0,
        }
    }
}
