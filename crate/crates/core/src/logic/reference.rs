//! Independent reference engines used to cross-check `forward_chain`.
//!
//! Both deliberately avoid the worklist engine's indexing: one is a naive
//! repeated-scan fixpoint, the other an exhaustive bounded-depth backward
//! proof search. The verification suite runs all three on random theories
//! and requires agreement on every query.

use std::collections::BTreeSet;

use rand::prelude::IndexedRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::ast::{
    Atom, AttrLit, Question, Rule, Statement, Subject, SubjectPattern, Theory,
};
use super::engine::answer_with;
use crate::error::{Error, Result};
use crate::logic::Label;

/// Quadratic fixpoint: rescan every rule against every entity until a full
/// pass derives nothing new.
pub fn naive_fixpoint(theory: &Theory) -> Result<BTreeSet<Atom>> {
    let mut derived: BTreeSet<Atom> = BTreeSet::new();
    for s in &theory.statements {
        match s {
            Statement::Fact(a) => {
                derived.insert(a.clone());
            }
            Statement::Rule(Rule::Universal { category, predicate }) => {
                derived.insert(Atom::category(
                    category.clone(),
                    predicate.attribute.clone(),
                    predicate.positive,
                ));
            }
            Statement::Rule(Rule::Conditional { .. }) => {}
        }
    }

    loop {
        let mut fresh: Vec<Atom> = Vec::new();
        let entities: BTreeSet<&String> = derived
            .iter()
            .filter_map(|a| match &a.subject {
                Subject::Entity(n) => Some(n),
                Subject::Category(_) => None,
            })
            .collect();

        for rule in theory.rules() {
            match rule {
                Rule::Conditional {
                    subject,
                    antecedents,
                    consequent,
                } => {
                    for &e in &entities {
                        let subject_ok = match subject {
                            SubjectPattern::Anyone => true,
                            SubjectPattern::Entity(n) => n == e,
                        };
                        if subject_ok
                            && antecedents.iter().all(|a| {
                                derived.contains(&Atom::entity(
                                    e.clone(),
                                    a.attribute.clone(),
                                    a.positive,
                                ))
                            })
                        {
                            fresh.push(Atom::entity(
                                e.clone(),
                                consequent.attribute.clone(),
                                consequent.positive,
                            ));
                        }
                    }
                }
                Rule::Universal { category, predicate } => {
                    for &e in &entities {
                        if derived.contains(&Atom::entity(e.clone(), category.clone(), true)) {
                            fresh.push(Atom::entity(
                                e.clone(),
                                predicate.attribute.clone(),
                                predicate.positive,
                            ));
                        }
                    }
                }
            }
        }

        // Category composition by full rescan.
        let cats: Vec<Atom> = derived
            .iter()
            .filter(|a| matches!(a.subject, Subject::Category(_)))
            .cloned()
            .collect();
        for left in &cats {
            if !left.positive {
                continue;
            }
            let Subject::Category(x) = &left.subject else {
                continue;
            };
            for right in &cats {
                let Subject::Category(y) = &right.subject else {
                    continue;
                };
                if *y == left.attribute {
                    fresh.push(Atom::category(
                        x.clone(),
                        right.attribute.clone(),
                        right.positive,
                    ));
                }
            }
        }

        let mut changed = false;
        for a in fresh {
            if derived.contains(&a.negated()) {
                return Err(Error::Contradiction {
                    atom: a.to_string(),
                });
            }
            changed |= derived.insert(a);
        }
        if !changed {
            return Ok(derived);
        }
    }
}

/// Exhaustive backward proof search with a depth bound.
///
/// `depth` must be at least the longest derivation chain; callers use
/// `entities * attributes * 2` which bounds the atom space. Results are
/// memoized (a success holds at any depth; a failure only below the depth it
/// was established at), which keeps the search exhaustive but polynomial.
pub fn provable(theory: &Theory, goal: &Atom, depth: usize) -> bool {
    Search::new(theory).prove(goal, depth)
}

struct Search<'t> {
    theory: &'t Theory,
    attributes: Vec<String>,
    proven: BTreeSet<Atom>,
    failed_at: std::collections::BTreeMap<Atom, usize>,
}

impl<'t> Search<'t> {
    fn new(theory: &'t Theory) -> Self {
        let attributes: BTreeSet<String> = theory
            .statements
            .iter()
            .flat_map(|s| match s {
                Statement::Fact(a) => vec![a.attribute.clone()],
                Statement::Rule(Rule::Conditional {
                    antecedents,
                    consequent,
                    ..
                }) => {
                    let mut v: Vec<String> =
                        antecedents.iter().map(|a| a.attribute.clone()).collect();
                    v.push(consequent.attribute.clone());
                    v
                }
                Statement::Rule(Rule::Universal { category, predicate }) => {
                    vec![category.clone(), predicate.attribute.clone()]
                }
            })
            .collect();
        Self {
            theory,
            attributes: attributes.into_iter().collect(),
            proven: BTreeSet::new(),
            failed_at: std::collections::BTreeMap::new(),
        }
    }

    fn prove(&mut self, goal: &Atom, depth: usize) -> bool {
        if self.proven.contains(goal) {
            return true;
        }
        if let Some(&d) = self.failed_at.get(goal) {
            if depth <= d {
                return false;
            }
        }
        if self.direct_support(goal) || (depth > 0 && self.derived_support(goal, depth)) {
            self.proven.insert(goal.clone());
            return true;
        }
        let entry = self.failed_at.entry(goal.clone()).or_insert(0);
        *entry = (*entry).max(depth);
        false
    }

    fn direct_support(&self, goal: &Atom) -> bool {
        self.theory.statements.iter().any(|s| match s {
            Statement::Fact(a) => a == goal,
            Statement::Rule(Rule::Universal { category, predicate }) => {
                matches!(&goal.subject, Subject::Category(x)
                    if x == category
                        && predicate.attribute == goal.attribute
                        && predicate.positive == goal.positive)
            }
            Statement::Rule(Rule::Conditional { .. }) => false,
        })
    }

    fn derived_support(&mut self, goal: &Atom, depth: usize) -> bool {
        match goal.subject.clone() {
            Subject::Entity(name) => {
                let rules: Vec<Rule> = self.theory.rules().cloned().collect();
                for rule in rules {
                    match rule {
                        Rule::Conditional {
                            subject,
                            antecedents,
                            consequent,
                        } => {
                            let subject_ok = match &subject {
                                SubjectPattern::Anyone => true,
                                SubjectPattern::Entity(n) => *n == name,
                            };
                            if subject_ok
                                && consequent.attribute == goal.attribute
                                && consequent.positive == goal.positive
                                && antecedents.iter().all(|a| {
                                    self.prove(
                                        &Atom::entity(name.clone(), a.attribute.clone(), a.positive),
                                        depth - 1,
                                    )
                                })
                            {
                                return true;
                            }
                        }
                        Rule::Universal { category, predicate } => {
                            if predicate.attribute == goal.attribute
                                && predicate.positive == goal.positive
                                && self.prove(
                                    &Atom::entity(name.clone(), category.clone(), true),
                                    depth - 1,
                                )
                            {
                                return true;
                            }
                        }
                    }
                }
                false
            }
            Subject::Category(x) => {
                // (x, goal.attr, p) via (x, mid, +) and (mid, goal.attr, p).
                let mids = self.attributes.clone();
                for mid in mids {
                    if mid == goal.attribute && goal.positive {
                        continue;
                    }
                    if self.prove(&Atom::category(x.clone(), mid.clone(), true), depth - 1)
                        && self.prove(
                            &Atom::category(mid, goal.attribute.clone(), goal.positive),
                            depth - 1,
                        )
                    {
                        return true;
                    }
                }
                false
            }
        }
    }
}

/// Proof-search analogue of `answer`, for cross-checking.
pub fn answer_by_proof_search(theory: &Theory, question: &Question, depth: usize) -> Label {
    if provable(theory, &question.atom, depth) {
        Label::True
    } else if provable(theory, &question.atom.negated(), depth) {
        Label::False
    } else {
        Label::Unknown
    }
}

/// Every query worth asking about a theory: all entity/attribute pairs (both
/// as stated and chained) plus all category pairs, positive form.
pub fn all_queries(entities: &[String], attributes: &[String]) -> Vec<Question> {
    let mut out = Vec::new();
    for e in entities {
        for a in attributes {
            out.push(Question::new(Atom::entity(e.clone(), a.clone(), true)));
        }
    }
    for x in attributes {
        for y in attributes {
            if x != y {
                out.push(Question::new(Atom::category(x.clone(), y.clone(), true)));
            }
        }
    }
    out
}

/// Uniformly random small theory (facts, conditionals, universals); not
/// guaranteed consistent — callers skip contradictory draws.
pub fn random_theory(
    rng: &mut ChaCha8Rng,
    entities: &[String],
    attributes: &[String],
    max_statements: usize,
) -> Theory {
    let n = rng.random_range(1..=max_statements);
    let mut statements = Vec::with_capacity(n);
    for _ in 0..n {
        let roll: f64 = rng.random();
        if roll < 0.5 {
            statements.push(Statement::Fact(Atom::entity(
                entities.choose(rng).unwrap().clone(),
                attributes.choose(rng).unwrap().clone(),
                rng.random_bool(0.8),
            )));
        } else if roll < 0.8 {
            let n_ante = if rng.random_bool(0.3) { 2 } else { 1 };
            let mut antecedents = Vec::new();
            for _ in 0..n_ante {
                antecedents.push(AttrLit::pos(attributes.choose(rng).unwrap().clone()));
            }
            let subject = if rng.random_bool(0.5) {
                SubjectPattern::Anyone
            } else {
                SubjectPattern::Entity(entities.choose(rng).unwrap().clone())
            };
            statements.push(Statement::Rule(Rule::Conditional {
                subject,
                antecedents,
                consequent: AttrLit {
                    attribute: attributes.choose(rng).unwrap().clone(),
                    positive: rng.random_bool(0.8),
                },
            }));
        } else {
            statements.push(Statement::Rule(Rule::Universal {
                category: attributes.choose(rng).unwrap().clone(),
                predicate: AttrLit {
                    attribute: attributes.choose(rng).unwrap().clone(),
                    positive: rng.random_bool(0.8),
                },
            }));
        }
    }
    Theory::new(statements)
}

/// Helper mirroring `answer` on the naive engine.
pub fn answer_by_naive(theory: &Theory, question: &Question) -> Result<Label> {
    let derived = naive_fixpoint(theory)?;
    answer_with(&derived, question)
}
