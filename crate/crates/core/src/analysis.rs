//! Query classification and connected-variable decomposition.
//!
//! Two distinct reachability relations are in play. Generalized distance
//! walks the undirected view of the query through any nodes, constants
//! included. Variable blocks use variable-only adjacency: two variables are
//! adjacent iff a single triple has one as subject and the other as object.
//! Each block of the resulting partition induces a subquery; the triples
//! touching no variable form the ground residue.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use thiserror::Error;

use crate::model::{Query, Term};

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum AnalysisError {
    #[error("query has no variables")]
    NoVariables,
    #[error("node {0} does not occur in the query")]
    UnknownNode(Term),
}

/// The evaluation class of a query, in dispatch precedence order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum QueryClass {
    /// No variables at all.
    Ground,
    /// Every triple touches one central variable and all its neighbours are
    /// constants.
    SimpleVarCentricStar { central: Term },
    /// Every variable sits alone in its block: any two variables are only
    /// connected through constants.
    LooselyConnected,
    /// At least two variables, all in a single block, and every triple has a
    /// variable endpoint.
    ConnectedVariable,
    /// Anything else.
    GeneralBgp,
}

impl QueryClass {
    pub fn name(&self) -> &'static str {
        match self {
            QueryClass::Ground => "ground",
            QueryClass::SimpleVarCentricStar { .. } => "simple var-centric star",
            QueryClass::LooselyConnected => "loosely-connected",
            QueryClass::ConnectedVariable => "connected-variable",
            QueryClass::GeneralBgp => "general",
        }
    }
}

impl std::fmt::Display for QueryClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Undirected adjacency between the variables of a query. A triple whose
/// subject and object are the same variable contributes a self-loop.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct VariableAdjacency {
    /// All variables, in first-occurrence order.
    nodes: Vec<Term>,
    edges: BTreeMap<Term, BTreeSet<Term>>,
    self_loops: BTreeSet<Term>,
}

impl VariableAdjacency {
    pub fn nodes(&self) -> &[Term] {
        &self.nodes
    }

    pub fn neighbours(&self, v: &Term) -> impl Iterator<Item = &Term> {
        self.edges.get(v).into_iter().flatten()
    }

    pub fn has_edge(&self, u: &Term, v: &Term) -> bool {
        if u == v {
            return self.self_loops.contains(u);
        }
        self.edges.get(u).is_some_and(|n| n.contains(v))
    }

    pub fn has_self_loops(&self) -> bool {
        !self.self_loops.is_empty()
    }

    /// Connected components, ordered by the first occurrence of a member
    /// variable; self-loops do not merge components.
    pub fn components(&self) -> Vec<BTreeSet<Term>> {
        let mut seen: BTreeSet<&Term> = BTreeSet::new();
        let mut components = Vec::new();
        for start in &self.nodes {
            if seen.contains(start) {
                continue;
            }
            let mut component = BTreeSet::new();
            let mut queue = VecDeque::from([start]);
            seen.insert(start);
            while let Some(v) = queue.pop_front() {
                component.insert(v.clone());
                for n in self.neighbours(v) {
                    if seen.insert(n) {
                        queue.push_back(n);
                    }
                }
            }
            components.push(component);
        }
        components
    }
}

/// Builds the variable-only adjacency of a query: variables u, v are adjacent
/// iff some triple has one as subject and the other as object, ignoring
/// direction. Isolated variables are kept as nodes.
pub fn variable_adjacency(q: &Query) -> VariableAdjacency {
    let mut adj = VariableAdjacency {
        nodes: q.output().to_vec(),
        ..VariableAdjacency::default()
    };
    for p in q.patterns() {
        let (s, o) = (p.subject(), p.object());
        if s.is_variable() && o.is_variable() {
            if s == o {
                adj.self_loops.insert(s.clone());
            } else {
                adj.edges.entry(s.clone()).or_default().insert(o.clone());
                adj.edges.entry(o.clone()).or_default().insert(s.clone());
            }
        }
    }
    adj
}

/// Shortest generalized-path length between two nodes of the query: a
/// breadth-first search over the undirected view of the triples, constants
/// allowed as intermediate nodes. `None` when the nodes are disconnected.
pub fn generalized_distance(
    q: &Query,
    v1: &Term,
    v2: &Term,
) -> Result<Option<usize>, AnalysisError> {
    let mut adjacency: BTreeMap<&Term, BTreeSet<&Term>> = BTreeMap::new();
    for p in q.patterns() {
        adjacency.entry(p.subject()).or_default().insert(p.object());
        adjacency.entry(p.object()).or_default().insert(p.subject());
    }
    for v in [v1, v2] {
        if !adjacency.contains_key(v) {
            return Err(AnalysisError::UnknownNode(v.clone()));
        }
    }
    let mut dist: BTreeMap<&Term, usize> = BTreeMap::from([(v1, 0)]);
    let mut queue = VecDeque::from([v1]);
    while let Some(v) = queue.pop_front() {
        if v == v2 {
            return Ok(Some(dist[v]));
        }
        let d = dist[v];
        for n in adjacency.get(v).into_iter().flatten() {
            if *n != v && !dist.contains_key(n) {
                dist.insert(n, d + 1);
                queue.push_back(n);
            }
        }
    }
    Ok(None)
}

/// The connected-variable partition: the components of the variable-only
/// adjacency, in first-occurrence order.
pub fn connected_variable_partition(q: &Query) -> Result<Vec<BTreeSet<Term>>, AnalysisError> {
    if q.is_ground() {
        return Err(AnalysisError::NoVariables);
    }
    Ok(variable_adjacency(q).components())
}

/// A non-redundant split of a query into per-block subqueries plus an
/// optional ground residue. Subqueries keep the source query's pattern order
/// and are pairwise triple-disjoint; their union is the source query.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Decomposition {
    pub block_subqueries: Vec<Query>,
    pub ground_residue: Option<Query>,
    pub blocks: Vec<BTreeSet<Term>>,
}

/// Decomposes a query along its connected-variable partition: each block
/// collects the triples with a subject or object variable in the block, and
/// whatever remains (all-constant triples) forms the ground residue.
pub fn connected_variable_decomposition(q: &Query) -> Result<Decomposition, AnalysisError> {
    let blocks = connected_variable_partition(q)?;
    let mut block_subqueries = Vec::with_capacity(blocks.len());
    let mut taken = vec![false; q.len()];
    for block in &blocks {
        let mut patterns = Vec::new();
        for (i, p) in q.patterns().iter().enumerate() {
            if block.contains(p.subject()) || block.contains(p.object()) {
                patterns.push(p.clone());
                taken[i] = true;
            }
        }
        let output: Vec<Term> = q
            .output()
            .iter()
            .filter(|v| block.contains(v))
            .cloned()
            .collect();
        block_subqueries.push(
            Query::new(patterns, output).expect("block subquery inherits validity from the query"),
        );
    }
    let residue: Vec<_> = q
        .patterns()
        .iter()
        .zip(&taken)
        .filter(|(_, taken)| !**taken)
        .map(|(p, _)| p.clone())
        .collect();
    let ground_residue = if residue.is_empty() {
        None
    } else {
        Some(Query::with_inferred_output(residue).expect("residue patterns are distinct"))
    };
    Ok(Decomposition {
        block_subqueries,
        ground_residue,
        blocks,
    })
}

/// A variable central node whose neighbours are all constants, if the query
/// has one. A triple with the candidate at both ends disqualifies it, since
/// the candidate would then neighbour a variable (itself).
pub fn simple_star_central(q: &Query) -> Option<Term> {
    let first = &q.patterns()[0];
    let candidates = [first.subject().clone(), first.object().clone()];
    'candidate: for c in candidates {
        if !c.is_variable() {
            continue;
        }
        for p in q.patterns() {
            let satellite = if *p.subject() == c {
                p.object()
            } else if *p.object() == c {
                p.subject()
            } else {
                continue 'candidate;
            };
            if !satellite.is_constant() {
                continue 'candidate;
            }
        }
        return Some(c);
    }
    None
}

/// Classifies a query, in precedence order: ground, simple var-centric star,
/// loosely-connected, connected-variable, general.
pub fn classify(q: &Query) -> QueryClass {
    if q.is_ground() {
        return QueryClass::Ground;
    }
    if let Some(central) = simple_star_central(q) {
        return QueryClass::SimpleVarCentricStar { central };
    }
    let adjacency = variable_adjacency(q);
    let blocks = adjacency.components();
    if blocks.iter().all(|b| b.len() == 1) && !adjacency.has_self_loops() {
        return QueryClass::LooselyConnected;
    }
    let vars = q.output().len();
    if vars >= 2
        && blocks.len() == 1
        && blocks[0].len() == vars
        && q.patterns().iter().all(|p| !p.is_ground())
    {
        return QueryClass::ConnectedVariable;
    }
    QueryClass::GeneralBgp
}

/// True iff every non-ground subquery of the decomposition is a simple
/// var-centric star. Holds for every loosely-connected query: each block is
/// a single variable, so its triples pair that variable with constants.
pub fn decomposition_is_simple_stars(q: &Query) -> bool {
    debug_assert_eq!(classify(q), QueryClass::LooselyConnected);
    match connected_variable_decomposition(q) {
        Ok(d) => d
            .block_subqueries
            .iter()
            .all(|sq| matches!(classify(sq), QueryClass::SimpleVarCentricStar { .. })),
        Err(_) => false,
    }
}
