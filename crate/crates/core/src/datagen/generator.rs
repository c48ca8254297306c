//! Balanced training-example generation with oracle-computed labels.

use rand::prelude::IndexedRandom;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::prompt::{AnnotatedPrompt, LabeledExample};
use super::tokenizer::{Tokenizer, PUNCTUATION, STRUCTURAL_WORDS};
use crate::error::{Error, Result};
use crate::logic::{
    answer, forward_chain, render_question, render_theory, Atom, AttrLit, Label, Question, Rule,
    Statement, Subject, SubjectPattern, Theory, Vocabulary,
};

const MAX_ATTEMPTS: usize = 200;

/// Everything the generator needs; the seed fully determines all output.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenConfig {
    pub entities: Vec<String>,
    pub attributes: Vec<String>,
    pub train: usize,
    pub val: usize,
    pub test: usize,
    /// Examples per interchange target kind.
    pub interchange_per_kind: usize,
    /// Rules per theory (training split).
    pub rules_per_theory: usize,
    /// Supporting facts per theory (training split).
    pub core_facts: usize,
    /// Distractor range, inclusive.
    pub distractors_min: usize,
    pub distractors_max: usize,
    /// Probability that a rule is a conditional (vs universal).
    pub conditional_mix: f64,
    pub max_seq_len: usize,
    pub seed: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            entities: [
                "Anne", "Bob", "Charlie", "Dave", "Erin", "Fiona", "Gary", "Harry", "Ivy",
                "Jack", "Kate", "Liam",
            ]
            .map(String::from)
            .to_vec(),
            attributes: [
                "blue", "cool", "great", "green", "grey", "happy", "kind", "nice", "purple",
                "quiet", "red", "round", "sad", "smart", "tall", "young",
            ]
            .map(String::from)
            .to_vec(),
            train: 20_000,
            val: 2_000,
            test: 2_000,
            interchange_per_kind: 600,
            rules_per_theory: 2,
            core_facts: 2,
            distractors_min: 2,
            distractors_max: 4,
            conditional_mix: 0.5,
            max_seq_len: 128,
            seed: 0,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        if self.entities.len() < 4 || self.attributes.len() < 6 {
            return Err(Error::Config(
                "need at least 4 entities and 6 attributes".into(),
            ));
        }
        for w in self.entities.iter().chain(self.attributes.iter()) {
            if STRUCTURAL_WORDS.contains(&w.as_str()) || PUNCTUATION.contains(&w.as_str()) {
                return Err(Error::Config(format!(
                    "vocabulary word `{w}` collides with a structural token"
                )));
            }
        }
        if self.entities.iter().any(|e| self.attributes.contains(e)) {
            return Err(Error::Config("entity/attribute pools overlap".into()));
        }
        if self.distractors_min > self.distractors_max {
            return Err(Error::Config("distractors_min > distractors_max".into()));
        }
        if self.rules_per_theory == 0 || self.core_facts == 0 {
            return Err(Error::Config("need at least one rule and one fact".into()));
        }
        Ok(())
    }

    pub fn vocabulary(&self) -> Vocabulary {
        Vocabulary::new(self.entities.clone(), self.attributes.clone())
    }

    pub fn tokenizer(&self) -> Tokenizer {
        Tokenizer::new(&self.entities, &self.attributes)
    }
}

/// Draws theories and questions; one instance per split/subset.
pub struct Generator {
    cfg: GenConfig,
    tokenizer: Tokenizer,
}

impl Generator {
    pub fn new(cfg: GenConfig) -> Result<Self> {
        cfg.validate()?;
        let tokenizer = cfg.tokenizer();
        Ok(Self { cfg, tokenizer })
    }

    pub fn config(&self) -> &GenConfig {
        &self.cfg
    }

    pub fn tokenizer(&self) -> &Tokenizer {
        &self.tokenizer
    }

    /// One labeled split with the three classes balanced by round-robin.
    pub fn generate_split(&self, n: usize, rng: &mut ChaCha8Rng) -> Result<Vec<LabeledExample>> {
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let want = [Label::True, Label::False, Label::Unknown][i % 3];
            let (theory, question, label) = self.generate_theory_with_label(rng, want)?;
            let prompt = AnnotatedPrompt::build(&theory, &question, &self.tokenizer)?;
            if prompt.len() > self.cfg.max_seq_len {
                return Err(Error::GenerationFailed {
                    attempts: 1,
                    reason: format!("prompt of {} tokens exceeds max_seq_len", prompt.len()),
                });
            }
            out.push(LabeledExample {
                theory_text: render_theory(&theory),
                question_text: render_question(&question),
                label,
                prompt,
            });
        }
        Ok(out)
    }

    /// A consistent theory plus a question with an oracle-computed label.
    pub fn generate_theory(&self, rng: &mut ChaCha8Rng) -> Result<(Theory, Question, Label)> {
        let want = [Label::True, Label::False, Label::Unknown]
            .choose(rng)
            .copied()
            .unwrap();
        self.generate_theory_with_label(rng, want)
    }

    /// Retry until a theory supports a question with the requested label.
    pub fn generate_theory_with_label(
        &self,
        rng: &mut ChaCha8Rng,
        want: Label,
    ) -> Result<(Theory, Question, Label)> {
        for _ in 0..MAX_ATTEMPTS {
            let Some(theory) = self.draw_theory(rng, want == Label::False) else {
                continue;
            };
            let Ok(derived) = forward_chain(&theory) else {
                continue; // contradictory draw, resample
            };
            if let Some(question) = self.draw_question(rng, &theory, &derived, want) {
                debug_assert_eq!(answer(&theory, &question).unwrap(), want);
                return Ok((theory, question, want));
            }
        }
        Err(Error::GenerationFailed {
            attempts: MAX_ATTEMPTS,
            reason: format!("no theory admitted a {want} question"),
        })
    }

    /// Sample a candidate theory; `None` when the draw is structurally unusable.
    fn draw_theory(&self, rng: &mut ChaCha8Rng, want_negative: bool) -> Option<Theory> {
        let cfg = &self.cfg;
        let mut entity_pool = cfg.entities.clone();
        entity_pool.shuffle(rng);
        let mut attr_pool = cfg.attributes.clone();
        attr_pool.shuffle(rng);

        let core_entities = &entity_pool[..cfg.core_facts.min(entity_pool.len())];
        let n_attrs = (cfg.rules_per_theory * 2 + 2).min(attr_pool.len());
        let attrs = &attr_pool[..n_attrs];

        let mut statements = Vec::new();

        // Chainable rules: rule k's antecedent is rule k-1's consequent with
        // probability 1/2, giving depth-2 questions.
        let mut prev_consequent: Option<String> = None;
        for k in 0..cfg.rules_per_theory {
            let ante = if k > 0 && rng.random_bool(0.5) {
                prev_consequent.clone().unwrap()
            } else {
                attrs[k * 2].clone()
            };
            let cons = attrs[k * 2 + 1].clone();
            if ante == cons {
                return None;
            }
            let negative_ok = want_negative && k == cfg.rules_per_theory - 1;
            let positive = !(negative_ok && rng.random_bool(0.5));
            prev_consequent = Some(cons.clone());
            if rng.random_bool(cfg.conditional_mix) {
                let subject = if rng.random_bool(0.5) {
                    SubjectPattern::Anyone
                } else {
                    SubjectPattern::Entity(core_entities.choose(rng)?.clone())
                };
                let mut antecedents = vec![AttrLit::pos(ante)];
                if rng.random_bool(0.2) {
                    let extra = attrs.choose(rng)?.clone();
                    if extra != antecedents[0].attribute && extra != cons {
                        antecedents.push(AttrLit::pos(extra));
                    }
                }
                statements.push(Statement::Rule(Rule::Conditional {
                    subject,
                    antecedents,
                    consequent: AttrLit {
                        attribute: cons,
                        positive,
                    },
                }));
            } else {
                statements.push(Statement::Rule(Rule::Universal {
                    category: ante,
                    predicate: AttrLit {
                        attribute: cons,
                        positive,
                    },
                }));
            }
        }

        // Supporting facts: give each core entity the first rule's trigger
        // attribute (or a random one), so chains can fire.
        for (i, e) in core_entities.iter().enumerate() {
            let attr = if i == 0 || rng.random_bool(0.6) {
                self.rule_trigger(&statements, rng)?
            } else {
                attrs.choose(rng)?.clone()
            };
            statements.push(Statement::Fact(Atom::entity(e.clone(), attr, true)));
        }
        // A negative fact gives False questions something to stand on.
        if want_negative && rng.random_bool(0.5) {
            let e = core_entities.choose(rng)?.clone();
            let a = attrs.choose(rng)?.clone();
            statements.push(Statement::Fact(Atom::entity(e, a, false)));
        }

        // Distractors: facts about entities outside the core set.
        let n_distract = rng.random_range(cfg.distractors_min..=cfg.distractors_max);
        let distractor_pool = &entity_pool[cfg.core_facts.min(entity_pool.len())..];
        for _ in 0..n_distract {
            let e = distractor_pool.choose(rng)?.clone();
            let a = cfg.attributes.choose(rng)?.clone();
            statements.push(Statement::Fact(Atom::entity(e, a, rng.random_bool(0.9))));
        }

        statements.shuffle(rng);
        Some(Theory::new(statements))
    }

    /// An antecedent attribute of some rule in the draft.
    fn rule_trigger(&self, statements: &[Statement], rng: &mut ChaCha8Rng) -> Option<String> {
        let triggers: Vec<String> = statements
            .iter()
            .filter_map(|s| match s {
                Statement::Rule(Rule::Conditional { antecedents, .. }) => {
                    Some(antecedents[0].attribute.clone())
                }
                Statement::Rule(Rule::Universal { category, .. }) => Some(category.clone()),
                Statement::Fact(_) => None,
            })
            .collect();
        triggers.choose(rng).cloned()
    }

    /// Pick a question whose oracle label matches `want`, if one exists.
    fn draw_question(
        &self,
        rng: &mut ChaCha8Rng,
        theory: &Theory,
        derived: &std::collections::BTreeSet<Atom>,
        want: Label,
    ) -> Option<Question> {
        let stated: std::collections::BTreeSet<&Atom> = theory
            .statements
            .iter()
            .filter_map(|s| match s {
                Statement::Fact(a) => Some(a),
                Statement::Rule(_) => None,
            })
            .collect();

        match want {
            Label::True => {
                let positives: Vec<&Atom> = derived
                    .iter()
                    .filter(|a| a.positive && matches!(a.subject, Subject::Entity(_)))
                    .collect();
                let chained: Vec<&&Atom> =
                    positives.iter().filter(|a| !stated.contains(**a)).collect();
                let atom = if !chained.is_empty() && rng.random_bool(0.7) {
                    **chained.choose(rng)?
                } else {
                    *positives.choose(rng)?
                };
                Some(Question::new(atom.clone()))
            }
            Label::False => {
                let negatives: Vec<&Atom> = derived
                    .iter()
                    .filter(|a| !a.positive && matches!(a.subject, Subject::Entity(_)))
                    .collect();
                let atom = negatives.choose(rng)?;
                Some(Question::new(atom.negated()))
            }
            Label::Unknown => {
                for _ in 0..20 {
                    let atom = if rng.random_bool(0.15) {
                        // An entity the theory never mentions.
                        let mentioned: std::collections::BTreeSet<&String> = derived
                            .iter()
                            .filter_map(|a| match &a.subject {
                                Subject::Entity(e) => Some(e),
                                Subject::Category(_) => None,
                            })
                            .collect();
                        let unmentioned: Vec<&String> = self
                            .cfg
                            .entities
                            .iter()
                            .filter(|e| !mentioned.contains(e))
                            .collect();
                        Atom::entity(
                            (*unmentioned.choose(rng)?).clone(),
                            self.cfg.attributes.choose(rng)?.clone(),
                            true,
                        )
                    } else {
                        Atom::entity(
                            self.cfg.entities.choose(rng)?.clone(),
                            self.cfg.attributes.choose(rng)?.clone(),
                            true,
                        )
                    };
                    if !derived.contains(&atom) && !derived.contains(&atom.negated()) {
                        return Some(Question::new(atom));
                    }
                }
                None
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn generator() -> Generator {
        Generator::new(GenConfig::default()).unwrap()
    }

    #[test]
    fn same_seed_same_output() {
        let g = generator();
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            g.generate_split(30, &mut rng).unwrap()
        };
        assert_eq!(run(7), run(7));
        assert_ne!(run(7), run(8));
    }

    #[test]
    fn labels_match_the_oracle_and_balance() {
        let g = generator();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let examples = g.generate_split(300, &mut rng).unwrap();
        let vocab = g.config().vocabulary();
        let mut counts = [0usize; 3];
        for ex in &examples {
            let theory = crate::logic::parse_theory(&ex.theory_text, &vocab).unwrap();
            let crate::logic::Parsed::Question(q) =
                crate::logic::parse_statement(&ex.question_text, &vocab).unwrap()
            else {
                panic!("expected question");
            };
            assert_eq!(answer(&theory, &q).unwrap(), ex.label);
            counts[ex.label.class_index()] += 1;
        }
        for c in counts {
            let freq = c as f64 / 300.0;
            assert!((0.23..=0.43).contains(&freq), "class frequency {freq}");
        }
    }

    #[test]
    fn prompts_fit_in_context() {
        let g = generator();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let examples = g.generate_split(100, &mut rng).unwrap();
        for ex in &examples {
            assert!(ex.prompt.len() <= g.config().max_seq_len);
            assert!(ex.prompt.len() >= 10);
        }
    }

    #[test]
    fn invalid_vocab_is_rejected() {
        let mut cfg = GenConfig::default();
        cfg.attributes[0] = "things".into();
        assert!(matches!(Generator::new(cfg), Err(Error::Config(_))));
    }
}
