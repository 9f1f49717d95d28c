//! Terms, triples, patterns, queries, update messages and answers, plus the
//! unification and mapping-join primitives shared by every evaluator.
//!
//! All types are immutable values; the operations are pure functions. Data
//! graphs use set semantics, so inserting and then deleting the same triple
//! restores the previous snapshot.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

/// A node of a data or query graph: an IRI, a plain literal, or a variable.
///
/// Variables are distinguished by kind, never by inspecting the lexical form,
/// and two terms are equal iff both kind and lexical form are equal. The
/// lexical form is shared, so cloning a term never copies text.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Iri(Arc<str>),
    Literal(Arc<str>),
    Variable(Arc<str>),
}

impl Term {
    pub fn iri(s: impl Into<Arc<str>>) -> Self {
        Term::Iri(s.into())
    }

    pub fn literal(s: impl Into<Arc<str>>) -> Self {
        Term::Literal(s.into())
    }

    /// Variable from its name without the leading `?`.
    pub fn variable(s: impl Into<Arc<str>>) -> Self {
        Term::Variable(s.into())
    }

    pub fn is_variable(&self) -> bool {
        matches!(self, Term::Variable(_))
    }

    pub fn is_iri(&self) -> bool {
        matches!(self, Term::Iri(_))
    }

    pub fn is_literal(&self) -> bool {
        matches!(self, Term::Literal(_))
    }

    /// IRIs and literals are constants; variables are not.
    pub fn is_constant(&self) -> bool {
        !self.is_variable()
    }

    pub fn lexical(&self) -> &str {
        match self {
            Term::Iri(s) | Term::Literal(s) | Term::Variable(s) => s.as_ref(),
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Iri(s) => write!(f, "<{s}>"),
            Term::Literal(s) => {
                write!(f, "\"")?;
                for c in s.chars() {
                    match c {
                        '"' => write!(f, "\\\"")?,
                        '\\' => write!(f, "\\\\")?,
                        c => write!(f, "{c}")?,
                    }
                }
                write!(f, "\"")
            }
            Term::Variable(s) => write!(f, "?{s}"),
        }
    }
}

/// Errors from constructing model values with invalid shapes.
#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("data triple subject must be an IRI, got {0}")]
    BadDataSubject(Term),
    #[error("predicate must be an IRI, got {0}")]
    BadPredicate(Term),
    #[error("data triple object must be an IRI or literal, got {0}")]
    BadDataObject(Term),
    #[error("pattern subject must be an IRI or variable, got {0}")]
    BadPatternSubject(Term),
    #[error("query must contain at least one pattern")]
    EmptyQuery,
    #[error("duplicate pattern {0} in query")]
    DuplicatePattern(TriplePattern),
    #[error("output pattern mismatch: {0}")]
    OutputMismatch(String),
    #[error("invalid binding: {0}")]
    BadBinding(String),
}

/// A ground (s, p, o) edge of the data graph. Subject and predicate are IRIs;
/// the object is an IRI or a literal.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DataTriple {
    s: Term,
    p: Term,
    o: Term,
}

impl DataTriple {
    pub fn new(s: Term, p: Term, o: Term) -> Result<Self, ModelError> {
        if !s.is_iri() {
            return Err(ModelError::BadDataSubject(s));
        }
        if !p.is_iri() {
            return Err(ModelError::BadPredicate(p));
        }
        if o.is_variable() {
            return Err(ModelError::BadDataObject(o));
        }
        Ok(DataTriple { s, p, o })
    }

    pub fn subject(&self) -> &Term {
        &self.s
    }

    pub fn predicate(&self) -> &Term {
        &self.p
    }

    pub fn object(&self) -> &Term {
        &self.o
    }
}

impl fmt::Display for DataTriple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.s, self.p, self.o)
    }
}

/// A query triple pattern: subject may be an IRI or variable, predicate is
/// always an IRI, object may be an IRI, literal or variable.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TriplePattern {
    s: Term,
    p: Term,
    o: Term,
}

impl TriplePattern {
    pub fn new(s: Term, p: Term, o: Term) -> Result<Self, ModelError> {
        if s.is_literal() {
            return Err(ModelError::BadPatternSubject(s));
        }
        if !p.is_iri() {
            return Err(ModelError::BadPredicate(p));
        }
        Ok(TriplePattern { s, p, o })
    }

    pub fn subject(&self) -> &Term {
        &self.s
    }

    pub fn predicate(&self) -> &Term {
        &self.p
    }

    pub fn object(&self) -> &Term {
        &self.o
    }

    /// Variables of the pattern, subject first, without deduplication.
    pub fn variables(&self) -> impl Iterator<Item = &Term> {
        [&self.s, &self.o].into_iter().filter(|t| t.is_variable())
    }

    pub fn is_ground(&self) -> bool {
        self.s.is_constant() && self.o.is_constant()
    }

    /// The pattern as a data triple, when it has no variables.
    pub fn as_data_triple(&self) -> Option<DataTriple> {
        if self.is_ground() {
            Some(DataTriple {
                s: self.s.clone(),
                p: self.p.clone(),
                o: self.o.clone(),
            })
        } else {
            None
        }
    }
}

impl From<DataTriple> for TriplePattern {
    fn from(t: DataTriple) -> Self {
        TriplePattern {
            s: t.s,
            p: t.p,
            o: t.o,
        }
    }
}

impl fmt::Display for TriplePattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.s, self.p, self.o)
    }
}

/// A basic graph pattern: a non-empty sequence of distinct triple patterns
/// plus an ordered output pattern listing every variable exactly once.
///
/// The sequence order is the canonical enumeration used by the evaluators'
/// match-state arrays, so two queries with the same patterns in a different
/// order are distinct values.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Query {
    patterns: Vec<TriplePattern>,
    output: Vec<Term>,
}

impl Query {
    /// Build a query with an explicit output order. The output must list
    /// exactly the variables occurring in the patterns, each once.
    pub fn new(patterns: Vec<TriplePattern>, output: Vec<Term>) -> Result<Self, ModelError> {
        let q = Self::with_inferred_output(patterns)?;
        let expected: BTreeSet<&Term> = q.output.iter().collect();
        let mut seen = BTreeSet::new();
        for v in &output {
            if !v.is_variable() {
                return Err(ModelError::OutputMismatch(format!(
                    "{v} is not a variable"
                )));
            }
            if !seen.insert(v) {
                return Err(ModelError::OutputMismatch(format!("{v} listed twice")));
            }
            if !expected.contains(v) {
                return Err(ModelError::OutputMismatch(format!(
                    "{v} does not occur in the query"
                )));
            }
        }
        if seen.len() != expected.len() {
            return Err(ModelError::OutputMismatch(format!(
                "output lists {} of {} query variables",
                seen.len(),
                expected.len()
            )));
        }
        Ok(Query {
            patterns: q.patterns,
            output,
        })
    }

    /// Build a query whose output order is the first-occurrence order of the
    /// variables (subject before object within a pattern).
    pub fn with_inferred_output(patterns: Vec<TriplePattern>) -> Result<Self, ModelError> {
        if patterns.is_empty() {
            return Err(ModelError::EmptyQuery);
        }
        let mut distinct = BTreeSet::new();
        for p in &patterns {
            if !distinct.insert(p.clone()) {
                return Err(ModelError::DuplicatePattern(p.clone()));
            }
        }
        let mut output = Vec::new();
        for p in &patterns {
            for v in p.variables() {
                if !output.contains(v) {
                    output.push(v.clone());
                }
            }
        }
        Ok(Query { patterns, output })
    }

    pub fn patterns(&self) -> &[TriplePattern] {
        &self.patterns
    }

    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }

    /// The ordered output pattern; empty iff the query is ground.
    pub fn output(&self) -> &[Term] {
        &self.output
    }

    pub fn is_ground(&self) -> bool {
        self.output.is_empty()
    }

    pub fn var_position(&self, v: &Term) -> Option<usize> {
        self.output.iter().position(|x| x == v)
    }
}

impl fmt::Display for Query {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, p) in self.patterns.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{p}")?;
        }
        write!(f, "}}")
    }
}

/// Insertion or deletion of one data triple.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum UpdateOp {
    Ins,
    Del,
}

impl fmt::Display for UpdateOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            UpdateOp::Ins => write!(f, "ins"),
            UpdateOp::Del => write!(f, "del"),
        }
    }
}

/// One element of an update stream: a timestamped insert or delete of a
/// data triple. Times strictly increase along a stream.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct UpdateMessage {
    pub time: u64,
    pub op: UpdateOp,
    pub triple: DataTriple,
}

impl UpdateMessage {
    pub fn ins(time: u64, triple: DataTriple) -> Self {
        UpdateMessage {
            time,
            op: UpdateOp::Ins,
            triple,
        }
    }

    pub fn del(time: u64, triple: DataTriple) -> Self {
        UpdateMessage {
            time,
            op: UpdateOp::Del,
            triple,
        }
    }

    /// The update that undoes this one.
    pub fn inverse(&self) -> Self {
        UpdateMessage {
            time: self.time,
            op: match self.op {
                UpdateOp::Ins => UpdateOp::Del,
                UpdateOp::Del => UpdateOp::Ins,
            },
            triple: self.triple.clone(),
        }
    }
}

/// How stream assumption violations (inserting a present triple, deleting an
/// absent one) are handled: `Strict` raises an error, `Lenient` turns the
/// update into a no-op.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Strictness {
    #[default]
    Strict,
    Lenient,
}

/// Raised in strict mode when an update violates the stream assumptions.
#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub struct AssumptionViolation {
    pub time: u64,
    pub op: UpdateOp,
    pub triple: DataTriple,
}

impl fmt::Display for AssumptionViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.op {
            UpdateOp::Ins => write!(
                f,
                "update at t={}: ins of triple {} already in the graph",
                self.time, self.triple
            ),
            UpdateOp::Del => write!(
                f,
                "update at t={}: del of triple {} not in the graph",
                self.time, self.triple
            ),
        }
    }
}

/// Whether an update changed the graph or was a lenient no-op.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UpdateOutcome {
    Applied,
    NoOp,
}

/// A finite set of data triples. Iteration order is the triples' value order,
/// so replays and serializations are deterministic.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Graph {
    triples: BTreeSet<DataTriple>,
}

impl Graph {
    pub fn new() -> Self {
        Graph::default()
    }

    pub fn from_triples(triples: impl IntoIterator<Item = DataTriple>) -> Self {
        Graph {
            triples: triples.into_iter().collect(),
        }
    }

    pub fn contains(&self, t: &DataTriple) -> bool {
        self.triples.contains(t)
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &DataTriple> {
        self.triples.iter()
    }

    /// Constant nodes of the graph (all subjects and objects).
    pub fn nodes(&self) -> BTreeSet<&Term> {
        self.triples
            .iter()
            .flat_map(|t| [t.subject(), t.object()])
            .collect()
    }
}

/// Applies one update to the graph. Strict mode requires that inserts add a
/// new triple and deletes remove a present one; lenient mode leaves the graph
/// unchanged and reports the update as a no-op.
pub fn apply_update(
    g: &mut Graph,
    u: &UpdateMessage,
    strictness: Strictness,
) -> Result<UpdateOutcome, AssumptionViolation> {
    let changed = match u.op {
        UpdateOp::Ins => g.triples.insert(u.triple.clone()),
        UpdateOp::Del => g.triples.remove(&u.triple),
    };
    if changed {
        Ok(UpdateOutcome::Applied)
    } else {
        match strictness {
            Strictness::Strict => Err(AssumptionViolation {
                time: u.time,
                op: u.op,
                triple: u.triple.clone(),
            }),
            Strictness::Lenient => Ok(UpdateOutcome::NoOp),
        }
    }
}

/// A partial embedding restricted to its variable bindings: a map from
/// variable terms to constant terms. Constants implicitly map to themselves.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PartialMapping {
    bindings: BTreeMap<Term, Term>,
}

impl PartialMapping {
    pub fn new() -> Self {
        PartialMapping::default()
    }

    pub fn from_bindings(
        pairs: impl IntoIterator<Item = (Term, Term)>,
    ) -> Result<Self, ModelError> {
        let mut m = PartialMapping::new();
        for (v, c) in pairs {
            if !v.is_variable() {
                return Err(ModelError::BadBinding(format!("{v} is not a variable")));
            }
            if c.is_variable() {
                return Err(ModelError::BadBinding(format!("{c} is not a constant")));
            }
            m.bindings.insert(v, c);
        }
        Ok(m)
    }

    pub fn get(&self, v: &Term) -> Option<&Term> {
        self.bindings.get(v)
    }

    pub fn is_empty(&self) -> bool {
        self.bindings.is_empty()
    }

    pub fn len(&self) -> usize {
        self.bindings.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Term, &Term)> {
        self.bindings.iter()
    }

    pub fn domain(&self) -> impl Iterator<Item = &Term> {
        self.bindings.keys()
    }

    /// Binds `v` to `c`, failing on a conflicting existing binding.
    fn bind(&mut self, v: Term, c: Term) -> bool {
        match self.bindings.get(&v) {
            Some(existing) => *existing == c,
            None => {
                self.bindings.insert(v, c);
                true
            }
        }
    }

    /// True iff the two mappings agree on every shared variable.
    pub fn compatible_with(&self, other: &PartialMapping) -> bool {
        self.bindings
            .iter()
            .all(|(v, c)| other.bindings.get(v).is_none_or(|d| c == d))
    }

    /// Substitutes bound variables into a pattern.
    pub fn apply(&self, p: &TriplePattern) -> TriplePattern {
        let subst = |t: &Term| self.bindings.get(t).cloned().unwrap_or_else(|| t.clone());
        TriplePattern {
            s: subst(&p.s),
            p: p.p.clone(),
            o: subst(&p.o),
        }
    }
}

/// The join of two partial mappings: the union of their bindings, with the
/// first taking precedence, or `None` when the mappings are incompatible.
pub fn join_mappings(e1: &PartialMapping, e2: &PartialMapping) -> Option<PartialMapping> {
    if !e1.compatible_with(e2) {
        return None;
    }
    let mut joined = e1.clone();
    for (v, c) in &e2.bindings {
        joined.bindings.entry(v.clone()).or_insert_with(|| c.clone());
    }
    Some(joined)
}

/// Returns the unique variable binding that makes `pattern` equal `triple`,
/// or `None` when a constant or the predicate mismatches, or when the same
/// variable would need two different values.
pub fn unify(pattern: &TriplePattern, triple: &DataTriple) -> Option<PartialMapping> {
    if pattern.p != triple.p {
        return None;
    }
    let mut m = PartialMapping::new();
    for (pat, val) in [(&pattern.s, &triple.s), (&pattern.o, &triple.o)] {
        if pat.is_variable() {
            if !m.bind(pat.clone(), val.clone()) {
                return None;
            }
        } else if pat != val {
            return None;
        }
    }
    Some(m)
}

/// An output tuple: constants aligned positionally with the query's output
/// pattern. Ground queries have the empty tuple as their only answer.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Answer {
    values: Vec<Term>,
}

impl Answer {
    pub fn new(values: Vec<Term>) -> Self {
        debug_assert!(values.iter().all(Term::is_constant));
        Answer { values }
    }

    pub fn empty() -> Self {
        Answer::default()
    }

    pub fn values(&self) -> &[Term] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

impl fmt::Display for Answer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, v) in self.values.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, ")")
    }
}

/// Positive answers enter the result set, negative answers leave it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Sign {
    Positive,
    Negative,
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sign::Positive => write!(f, "+"),
            Sign::Negative => write!(f, "-"),
        }
    }
}

/// A signed answer tagged with the update time that produced it.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DeltaAnswer {
    pub time: u64,
    pub sign: Sign,
    pub answer: Answer,
}

impl DeltaAnswer {
    pub fn new(time: u64, sign: Sign, answer: Answer) -> Self {
        DeltaAnswer { time, sign, answer }
    }
}
