//! Per-query sessions: stream validation, evaluator dispatch, and
//! consolidation of the emitted delta history into the current answer set.
//!
//! A session is single-writer. Timestamps must strictly increase; equal
//! timestamps are rejected. The consolidated set after every update equals
//! the full evaluation of the query on the current snapshot.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::analysis::{classify, QueryClass};
use crate::eval::{
    ClassMismatch, Evaluator, GeneralEvaluator, GroundEvaluator, LooselyEvaluator, StarEvaluator,
};
use crate::model::{
    Answer, AssumptionViolation, DeltaAnswer, Query, Sign, Strictness, UpdateMessage,
};
use crate::oracle::SnapshotOracle;

/// Which evaluator backs the session. `Auto` routes by classification; the
/// named modes force one evaluator and fail on class mismatch; `Oracle`
/// re-evaluates the full snapshot per update.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Mode {
    #[default]
    Auto,
    Ground,
    Star,
    Loosely,
    General,
    Oracle,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Mode::Auto => "auto",
            Mode::Ground => "ground",
            Mode::Star => "star",
            Mode::Loosely => "loosely",
            Mode::General => "general",
            Mode::Oracle => "oracle",
        };
        f.write_str(name)
    }
}

#[derive(Clone, Debug, Error)]
pub enum SessionError {
    #[error(transparent)]
    ClassMismatch(#[from] ClassMismatch),
    #[error("update at t={time} is not newer than the previous update at t={last}")]
    OutOfOrderTimestamp { time: u64, last: u64 },
    #[error(transparent)]
    Assumption(#[from] AssumptionViolation),
    #[error("illegal delta history: {0}")]
    IllegalHistory(String),
}

#[derive(Clone, Debug)]
enum Backend {
    Eval(Evaluator),
    Oracle(SnapshotOracle),
}

/// Counters exposed by a session.
#[derive(Clone, Copy, Debug, Default)]
pub struct SessionStats {
    pub updates: u64,
    pub deltas_emitted: u64,
    pub peak_dynamic_state: usize,
}

/// A continuously evaluated query over one update stream.
#[derive(Clone, Debug)]
pub struct Session {
    query: Query,
    class: QueryClass,
    mode: Mode,
    strictness: Strictness,
    backend: Backend,
    last_time: Option<u64>,
    consolidated: BTreeSet<Answer>,
    stats: SessionStats,
}

/// Opens a session with an empty initial snapshot.
pub fn open_session(
    query: Query,
    mode: Mode,
    strictness: Strictness,
) -> Result<Session, SessionError> {
    let class = classify(&query);
    let backend = match mode {
        Mode::Auto => Backend::Eval(Evaluator::for_query(&query, strictness)),
        Mode::Ground => Backend::Eval(Evaluator::Ground(GroundEvaluator::new(
            query.clone(),
            strictness,
        )?)),
        Mode::Star => Backend::Eval(Evaluator::Star(StarEvaluator::new(
            query.clone(),
            strictness,
        )?)),
        Mode::Loosely => Backend::Eval(Evaluator::Loosely(LooselyEvaluator::new(
            query.clone(),
            strictness,
        )?)),
        Mode::General => Backend::Eval(Evaluator::General(Box::new(GeneralEvaluator::new(
            query.clone(),
            strictness,
        )))),
        Mode::Oracle => Backend::Oracle(SnapshotOracle::new(query.clone(), strictness)),
    };
    Ok(Session {
        query,
        class,
        mode,
        strictness,
        backend,
        last_time: None,
        consolidated: BTreeSet::new(),
        stats: SessionStats::default(),
    })
}

impl Session {
    pub fn query(&self) -> &Query {
        &self.query
    }

    pub fn class(&self) -> &QueryClass {
        &self.class
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn strictness(&self) -> Strictness {
        self.strictness
    }

    pub fn stats(&self) -> &SessionStats {
        &self.stats
    }

    /// The fold of all emitted deltas; equals the query's answer set on the
    /// current snapshot.
    pub fn consolidated(&self) -> &BTreeSet<Answer> {
        &self.consolidated
    }

    pub fn dynamic_state_size(&self) -> usize {
        match &self.backend {
            Backend::Eval(e) => e.dynamic_state_size(),
            Backend::Oracle(o) => o.state_size(),
        }
    }

    pub fn fixed_state_size(&self) -> usize {
        match &self.backend {
            Backend::Eval(e) => e.fixed_state_size(),
            Backend::Oracle(_) => 0,
        }
    }

    /// Validates and routes one update, returning the delta answers in
    /// deterministic order and folding them into the consolidated set.
    pub fn feed(&mut self, u: &UpdateMessage) -> Result<Vec<DeltaAnswer>, SessionError> {
        if let Some(last) = self.last_time {
            if u.time <= last {
                return Err(SessionError::OutOfOrderTimestamp { time: u.time, last });
            }
        }
        self.last_time = Some(u.time);
        let deltas = match &mut self.backend {
            Backend::Eval(e) => e.process_update(u)?,
            Backend::Oracle(o) => {
                let (positives, negatives) = o.step(u)?;
                positives
                    .into_iter()
                    .map(|a| DeltaAnswer::new(u.time, Sign::Positive, a))
                    .chain(
                        negatives
                            .into_iter()
                            .map(|a| DeltaAnswer::new(u.time, Sign::Negative, a)),
                    )
                    .collect()
            }
        };
        debug_assert!(
            {
                let distinct: BTreeSet<&Answer> = deltas.iter().map(|d| &d.answer).collect();
                distinct.len() == deltas.len()
            },
            "one update must not emit the same answer twice"
        );
        for d in &deltas {
            match d.sign {
                Sign::Positive => {
                    if !self.consolidated.insert(d.answer.clone()) {
                        return Err(SessionError::IllegalHistory(format!(
                            "positive {} at t={} is already in the answer set",
                            d.answer, d.time
                        )));
                    }
                }
                Sign::Negative => {
                    if !self.consolidated.remove(&d.answer) {
                        return Err(SessionError::IllegalHistory(format!(
                            "negative {} at t={} has no live positive",
                            d.answer, d.time
                        )));
                    }
                }
            }
        }
        self.stats.updates += 1;
        self.stats.deltas_emitted += deltas.len() as u64;
        self.stats.peak_dynamic_state = self.stats.peak_dynamic_state.max(self.dynamic_state_size());
        Ok(deltas)
    }
}

/// Folds a delta history: positives insert, negatives delete. Fails on a
/// duplicate positive or on a negative without a live positive.
pub fn consolidate<'a>(
    deltas: impl IntoIterator<Item = &'a DeltaAnswer>,
) -> Result<BTreeSet<Answer>, SessionError> {
    let mut answers = BTreeSet::new();
    for d in deltas {
        match d.sign {
            Sign::Positive => {
                if !answers.insert(d.answer.clone()) {
                    return Err(SessionError::IllegalHistory(format!(
                        "positive {} at t={} is already in the answer set",
                        d.answer, d.time
                    )));
                }
            }
            Sign::Negative => {
                if !answers.remove(&d.answer) {
                    return Err(SessionError::IllegalHistory(format!(
                        "negative {} at t={} has no live positive",
                        d.answer, d.time
                    )));
                }
            }
        }
    }
    Ok(answers)
}
