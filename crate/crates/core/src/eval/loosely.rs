//! Continuous evaluation of loosely-connected queries.
//!
//! The query decomposes into simple var-centric star subqueries plus an
//! optional ground residue. Each part runs its own evaluator; the full
//! query's answers are the cartesian product of the parts' answer sets,
//! wired into the output pattern through each star's central variable.
//!
//! Delta emission pins the changing coordinate: when star i gains or loses
//! the value x while every part is satisfied, exactly the product tuples
//! with position i fixed to x are emitted. When the ground residue flips,
//! the whole product is emitted. Parts are processed ground-first, then
//! stars in decomposition order, updating answer sets between emissions, so
//! a single update touching several parts never emits a tuple twice.

use indexmap::IndexSet;

use crate::analysis::{classify, connected_variable_decomposition, QueryClass};
use crate::eval::ground::{GroundEvaluator, GroundResult};
use crate::eval::star::StarEvaluator;
use crate::eval::ClassMismatch;
use crate::model::{
    Answer, AssumptionViolation, DeltaAnswer, Query, Sign, Strictness, Term, UpdateMessage,
};

#[derive(Clone, Debug)]
struct GroundPart {
    evaluator: GroundEvaluator,
    satisfied: bool,
}

#[derive(Clone, Debug)]
struct StarPart {
    evaluator: StarEvaluator,
    /// Central values currently answering this star, in insertion order.
    answers: IndexSet<Term>,
    /// Index of the star's central variable in the full output pattern.
    output_position: usize,
}

/// Evaluator for a loosely-connected query.
#[derive(Clone, Debug)]
pub struct LooselyEvaluator {
    query: Query,
    ground_parts: Vec<GroundPart>,
    star_parts: Vec<StarPart>,
}

impl LooselyEvaluator {
    pub fn new(query: Query, strictness: Strictness) -> Result<Self, ClassMismatch> {
        let class = classify(&query);
        if class != QueryClass::LooselyConnected {
            return Err(ClassMismatch {
                expected: "loosely-connected",
                found: class,
            });
        }
        let decomposition = connected_variable_decomposition(&query)
            .expect("loosely-connected queries have variables");
        let ground_parts = decomposition
            .ground_residue
            .into_iter()
            .map(|sq| GroundPart {
                evaluator: GroundEvaluator::new(sq, strictness)
                    .expect("the residue is a ground query"),
                satisfied: false,
            })
            .collect();
        let star_parts = decomposition
            .block_subqueries
            .into_iter()
            .map(|sq| {
                let evaluator = StarEvaluator::new(sq, strictness)
                    .expect("every block of a loosely-connected query is a simple star");
                let output_position = query
                    .var_position(evaluator.central())
                    .expect("the central variable occurs in the query");
                StarPart {
                    evaluator,
                    answers: IndexSet::new(),
                    output_position,
                }
            })
            .collect();
        Ok(LooselyEvaluator {
            query,
            ground_parts,
            star_parts,
        })
    }

    pub fn query(&self) -> &Query {
        &self.query
    }

    pub fn ground_part_count(&self) -> usize {
        self.ground_parts.len()
    }

    pub fn star_part_count(&self) -> usize {
        self.star_parts.len()
    }

    /// Cached elements that grow and shrink with the stream: star instances
    /// and satisfied central values.
    pub fn dynamic_state_size(&self) -> usize {
        self.star_parts
            .iter()
            .map(|p| p.evaluator.instance_count() + p.answers.len())
            .sum()
    }

    /// Match-state bits of the ground residue.
    pub fn fixed_state_size(&self) -> usize {
        self.ground_parts
            .iter()
            .map(|p| p.evaluator.query().len())
            .sum()
    }

    fn all_parts_satisfied(&self) -> bool {
        self.ground_parts.iter().all(|p| p.satisfied)
            && self.star_parts.iter().all(|p| !p.answers.is_empty())
    }

    /// Emits the cartesian product of the star answer sets, with one
    /// position optionally pinned to a single value.
    fn emit_product(
        &self,
        time: u64,
        sign: Sign,
        pinned: Option<(usize, &Term)>,
        out: &mut Vec<DeltaAnswer>,
    ) {
        let factors: Vec<Vec<&Term>> = self
            .star_parts
            .iter()
            .enumerate()
            .map(|(i, part)| match pinned {
                Some((pin, value)) if pin == i => vec![value],
                _ => part.answers.iter().collect(),
            })
            .collect();
        let mut combo = vec![0usize; factors.len()];
        loop {
            let mut values: Vec<Option<Term>> = vec![None; self.query.output().len()];
            for (i, part) in self.star_parts.iter().enumerate() {
                values[part.output_position] = Some(factors[i][combo[i]].clone());
            }
            let answer = Answer::new(
                values
                    .into_iter()
                    .map(|v| v.expect("stars cover every output variable"))
                    .collect(),
            );
            out.push(DeltaAnswer::new(time, sign, answer));
            // Advance the rightmost coordinate first: tuples come out in
            // lexicographic order of the answer sets' insertion order.
            let mut pos = factors.len();
            loop {
                if pos == 0 {
                    return;
                }
                pos -= 1;
                combo[pos] += 1;
                if combo[pos] < factors[pos].len() {
                    break;
                }
                combo[pos] = 0;
            }
        }
    }

    pub fn process_update(
        &mut self,
        u: &UpdateMessage,
    ) -> Result<Vec<DeltaAnswer>, AssumptionViolation> {
        let mut deltas = Vec::new();
        for i in 0..self.ground_parts.len() {
            match self.ground_parts[i].evaluator.process_update(u)? {
                GroundResult::Positive => {
                    self.ground_parts[i].satisfied = true;
                    if self.all_parts_satisfied() {
                        self.emit_product(u.time, Sign::Positive, None, &mut deltas);
                    }
                }
                GroundResult::Negative => {
                    // The flag still reflects the pre-update state here; the
                    // check runs before the flip.
                    if self.all_parts_satisfied() {
                        self.emit_product(u.time, Sign::Negative, None, &mut deltas);
                    }
                    self.ground_parts[i].satisfied = false;
                }
                GroundResult::NoNewEmbedding => {}
            }
        }
        for i in 0..self.star_parts.len() {
            let results = self.star_parts[i].evaluator.process_update(u)?;
            for result in results {
                match result.sign {
                    Sign::Positive => {
                        self.star_parts[i].answers.insert(result.value.clone());
                        if self.all_parts_satisfied() {
                            self.emit_product(
                                u.time,
                                Sign::Positive,
                                Some((i, &result.value)),
                                &mut deltas,
                            );
                        }
                    }
                    Sign::Negative => {
                        if self.all_parts_satisfied() {
                            self.emit_product(
                                u.time,
                                Sign::Negative,
                                Some((i, &result.value)),
                                &mut deltas,
                            );
                        }
                        self.star_parts[i].answers.shift_remove(&result.value);
                    }
                }
            }
        }
        debug_assert!(self.invariants_hold());
        Ok(deltas)
    }

    /// The satisfaction flags mirror the part evaluators' own state between
    /// updates.
    fn invariants_hold(&self) -> bool {
        self.ground_parts
            .iter()
            .all(|p| p.satisfied == p.evaluator.satisfied())
            && self.star_parts.iter().all(|p| {
                let satisfied: IndexSet<&Term> = p.evaluator.satisfied_values().collect();
                satisfied.len() == p.answers.len()
                    && p.answers.iter().all(|v| satisfied.contains(v))
            })
    }
}
