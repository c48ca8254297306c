//! Worklist-based forward chaining; the ground-truth label oracle.
//!
//! Entity atoms close under three derivation steps:
//! - facts are derived as stated;
//! - a conditional fires for an entity once all its antecedents hold;
//! - a universal fires for any entity carrying the category attribute.
//!
//! Category atoms (answers to "Are all x things y?") are seeded by universal
//! statements and closed under composition through positive intermediates:
//! `(x,y,+)` and `(y,z,p)` yield `(x,z,p)`.

use std::collections::{BTreeSet, HashMap};

use super::ast::{Atom, Label, Question, Rule, Statement, Subject, SubjectPattern, Theory};
use crate::error::{Error, Result};

/// Least fixpoint of the derivation rules, or a contradiction error if any
/// atom is derived with both polarities.
pub fn forward_chain(theory: &Theory) -> Result<BTreeSet<Atom>> {
    let conditionals: Vec<(&SubjectPattern, &[super::ast::AttrLit], &super::ast::AttrLit)> = theory
        .rules()
        .filter_map(|r| match r {
            Rule::Conditional {
                subject,
                antecedents,
                consequent,
            } => Some((subject, antecedents.as_slice(), consequent)),
            Rule::Universal { .. } => None,
        })
        .collect();
    let universals: Vec<(&str, &super::ast::AttrLit)> = theory
        .rules()
        .filter_map(|r| match r {
            Rule::Universal { category, predicate } => Some((category.as_str(), predicate)),
            Rule::Conditional { .. } => None,
        })
        .collect();

    // Conditionals indexed by each antecedent attribute, universals by category.
    let mut cond_by_attr: HashMap<&str, Vec<usize>> = HashMap::new();
    for (i, (_, antecedents, _)) in conditionals.iter().enumerate() {
        for a in antecedents.iter() {
            cond_by_attr.entry(a.attribute.as_str()).or_default().push(i);
        }
    }
    let mut univ_by_cat: HashMap<&str, Vec<usize>> = HashMap::new();
    for (i, (cat, _)) in universals.iter().enumerate() {
        univ_by_cat.entry(cat).or_default().push(i);
    }

    let mut derived: BTreeSet<Atom> = BTreeSet::new();
    let mut queue: Vec<Atom> = Vec::new();

    let insert = |atom: Atom, derived: &mut BTreeSet<Atom>, queue: &mut Vec<Atom>| -> Result<()> {
        if derived.contains(&atom.negated()) {
            return Err(Error::Contradiction {
                atom: atom.to_string(),
            });
        }
        if derived.insert(atom.clone()) {
            queue.push(atom);
        }
        Ok(())
    };

    for s in &theory.statements {
        match s {
            Statement::Fact(a) => insert(a.clone(), &mut derived, &mut queue)?,
            Statement::Rule(Rule::Universal { category, predicate }) => insert(
                Atom::category(category.clone(), predicate.attribute.clone(), predicate.positive),
                &mut derived,
                &mut queue,
            )?,
            Statement::Rule(Rule::Conditional { .. }) => {}
        }
    }

    while let Some(atom) = queue.pop() {
        match &atom.subject {
            Subject::Entity(name) => {
                // Conditionals fire when this atom completes their antecedents.
                if let Some(rule_ids) = cond_by_attr.get(atom.attribute.as_str()) {
                    for &ri in rule_ids {
                        let (subject, antecedents, consequent) = conditionals[ri];
                        let subject_ok = match subject {
                            SubjectPattern::Anyone => true,
                            SubjectPattern::Entity(n) => n == name,
                        };
                        if !subject_ok {
                            continue;
                        }
                        let all_hold = antecedents.iter().all(|a| {
                            derived.contains(&Atom::entity(
                                name.clone(),
                                a.attribute.clone(),
                                a.positive,
                            ))
                        });
                        if all_hold {
                            insert(
                                Atom::entity(
                                    name.clone(),
                                    consequent.attribute.clone(),
                                    consequent.positive,
                                ),
                                &mut derived,
                                &mut queue,
                            )?;
                        }
                    }
                }
                // Universals fire on positive category membership.
                if atom.positive {
                    if let Some(rule_ids) = univ_by_cat.get(atom.attribute.as_str()) {
                        for &ri in rule_ids {
                            let (_, predicate) = universals[ri];
                            insert(
                                Atom::entity(
                                    name.clone(),
                                    predicate.attribute.clone(),
                                    predicate.positive,
                                ),
                                &mut derived,
                                &mut queue,
                            )?;
                        }
                    }
                }
            }
            Subject::Category(cat) => {
                // Compose category atoms through positive intermediates.
                let mut fresh = Vec::new();
                if atom.positive {
                    // (cat, attr, +) then (attr, z, p) gives (cat, z, p)
                    for other in derived.iter() {
                        if let Subject::Category(mid) = &other.subject {
                            if *mid == atom.attribute {
                                fresh.push(Atom::category(
                                    cat.clone(),
                                    other.attribute.clone(),
                                    other.positive,
                                ));
                            }
                        }
                    }
                }
                // (x, cat, +) then (cat, attr, p) gives (x, attr, p)
                for other in derived.iter() {
                    if let Subject::Category(x) = &other.subject {
                        if other.positive && other.attribute == *cat {
                            fresh.push(Atom::category(
                                x.clone(),
                                atom.attribute.clone(),
                                atom.positive,
                            ));
                        }
                    }
                }
                for a in fresh {
                    insert(a, &mut derived, &mut queue)?;
                }
            }
        }
    }

    Ok(derived)
}

/// Open-world answer: True if the queried atom is derivable, False if its
/// negation is, Unknown otherwise.
pub fn answer(theory: &Theory, question: &Question) -> Result<Label> {
    let derived = forward_chain(theory)?;
    answer_with(&derived, question)
}

/// Label a question against an already-computed derivation set.
pub fn answer_with(derived: &BTreeSet<Atom>, question: &Question) -> Result<Label> {
    if derived.contains(&question.atom) {
        Ok(Label::True)
    } else if derived.contains(&question.atom.negated()) {
        Ok(Label::False)
    } else {
        Ok(Label::Unknown)
    }
}
