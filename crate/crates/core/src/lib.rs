//! In-memory engine for continuously answering basic graph pattern queries
//! over a dynamic linked-data graph.
//!
//! The graph is updated through a stream of timestamped triple insertions
//! and deletions. A [`session::Session`] routes each update to an evaluator
//! chosen by query classification and emits signed delta answers: answers
//! entering or leaving the result set at that update. Consolidating the
//! whole delta history always reproduces the answer set of the current
//! snapshot, which the [`oracle`] module recomputes from scratch as the
//! reference.
//!
//! Evaluators cache as little as the class allows:
//!
//! - ground queries keep one boolean per query triple;
//! - simple var-centric star queries keep a match state per value of the
//!   central variable;
//! - loosely-connected queries decompose into star subqueries plus a ground
//!   residue and emit cartesian-product deltas;
//! - everything else runs on the instantiation engine, which seeds residual
//!   evaluators from the edges unifying with query patterns.

pub mod analysis;
pub mod cli;
pub mod eval;
pub mod io;
pub mod model;
pub mod oracle;
pub mod session;

pub use analysis::{classify, QueryClass};
pub use model::{
    Answer, DataTriple, DeltaAnswer, Graph, PartialMapping, Query, Sign, Strictness, Term,
    TriplePattern, UpdateMessage, UpdateOp,
};
pub use session::{consolidate, open_session, Mode, Session, SessionError};
