//! Aligned base/override pair construction for interchange interventions.
//!
//! Base and override are drawn from one shared structural template (same
//! statement shapes in the same order), so token positions line up by
//! construction. Each pair is built in one of two directions:
//!
//! - *removal*: the question is about base content; base answer True, and the
//!   expected post-intervention answer is Unknown;
//! - *introduction*: the question is about content the intervention brings
//!   in; base answer Unknown, expected answer True.
//!
//! The expected post-intervention theory is the base text with the target
//! tokens replaced by the override's tokens. For sentence and period targets
//! that is the whole target sentence (the period is probed as that sentence's
//! summary); for rule targets it is the single rule slot.

use rand::prelude::IndexedRandom;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::generator::Generator;
use super::prompt::{target_positions, AnnotatedPrompt, InterchangeExample, TargetKind};
use crate::error::{Error, Result};
use crate::logic::{
    answer, render_question, render_theory, Atom, AttrLit, Label, Question, Rule, Statement,
    SubjectPattern, Theory,
};

const MAX_ATTEMPTS: usize = 400;

/// Shared scaffold from which base and override theories are instantiated.
struct PairDraw {
    base: Theory,
    overlay: Theory,
    expected: Theory,
    question: Question,
    base_answer: Label,
    override_answer: Label,
}

impl Generator {
    /// A batch of aligned interchange examples for one target kind.
    pub fn generate_interchange_dataset(
        &self,
        kind: TargetKind,
        n: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Vec<InterchangeExample>> {
        let mut out = Vec::with_capacity(n);
        let mut differing = 0usize;
        for _ in 0..n {
            let ex = self.generate_interchange_pair(kind, rng)?;
            if ex.base_answer != ex.override_answer {
                differing += 1;
            }
            out.push(ex);
        }
        if n > 0 && (differing as f64) < 0.8 * n as f64 {
            return Err(Error::GenerationFailed {
                attempts: n,
                reason: format!(
                    "only {differing}/{n} pairs have differing base/override answers"
                ),
            });
        }
        Ok(out)
    }

    /// One aligned pair for the given target kind.
    pub fn generate_interchange_pair(
        &self,
        kind: TargetKind,
        rng: &mut ChaCha8Rng,
    ) -> Result<InterchangeExample> {
        for _ in 0..MAX_ATTEMPTS {
            let Some(draw) = self.draw_pair(kind, rng) else {
                continue;
            };
            // Oracle checks: intended answers must hold exactly.
            let Ok(base_answer) = answer(&draw.base, &draw.question) else {
                continue;
            };
            let Ok(override_answer) = answer(&draw.expected, &draw.question) else {
                continue;
            };
            if base_answer != draw.base_answer || override_answer != draw.override_answer {
                continue;
            }
            // The override prompt must itself be a consistent theory.
            if answer(&draw.overlay, &draw.question).is_err() {
                continue;
            }

            let base = AnnotatedPrompt::build(&draw.base, &draw.question, self.tokenizer())?;
            let override_prompt =
                AnnotatedPrompt::build(&draw.overlay, &draw.question, self.tokenizer())?;
            if base.len() > self.config().max_seq_len {
                continue;
            }
            let ex = InterchangeExample {
                target: kind,
                base_theory: render_theory(&draw.base),
                override_theory: render_theory(&draw.overlay),
                expected_theory: render_theory(&draw.expected),
                question_text: render_question(&draw.question),
                base_answer,
                override_answer,
                base,
                override_prompt,
            };
            ex.check_alignment()?;
            return Ok(ex);
        }
        Err(Error::GenerationFailed {
            attempts: MAX_ATTEMPTS,
            reason: format!("could not align a {kind} pair"),
        })
    }

    fn draw_pair(&self, kind: TargetKind, rng: &mut ChaCha8Rng) -> Option<PairDraw> {
        match kind {
            TargetKind::FirstSentence | TargetKind::FirstPeriod => self.draw_sentence_pair(rng, 0),
            TargetKind::SecondSentence | TargetKind::SecondPeriod => {
                self.draw_sentence_pair(rng, 1)
            }
            TargetKind::Consequent => self.draw_consequent_pair(rng),
            TargetKind::Subject => self.draw_subject_pair(rng),
            TargetKind::Predicate => self.draw_predicate_pair(rng),
            TargetKind::Adjective => self.draw_adjective_pair(rng),
        }
    }

    /// Distinct samples from a pool.
    fn pick<'a>(&self, pool: &'a [String], n: usize, rng: &mut ChaCha8Rng) -> Option<Vec<&'a String>> {
        if pool.len() < n {
            return None;
        }
        let mut idx: Vec<usize> = (0..pool.len()).collect();
        idx.shuffle(rng);
        Some(idx[..n].iter().map(|&i| &pool[i]).collect())
    }

    fn distractor_block(
        &self,
        rng: &mut ChaCha8Rng,
        exclude_entities: &[&String],
        exclude_attrs: &[&String],
    ) -> Option<(Vec<Statement>, Vec<Statement>)> {
        let cfg = self.config();
        let n = rng.random_range(cfg.distractors_min..=cfg.distractors_max);
        let entities: Vec<&String> = cfg
            .entities
            .iter()
            .filter(|e| !exclude_entities.contains(e))
            .collect();
        let attrs: Vec<&String> = cfg
            .attributes
            .iter()
            .filter(|a| !exclude_attrs.contains(a))
            .collect();
        let mut base = Vec::new();
        let mut overlay = Vec::new();
        for _ in 0..n {
            let eb = *entities.choose(rng)?;
            let eo = *entities.choose(rng)?;
            let ab = *attrs.choose(rng)?;
            let ao = *attrs.choose(rng)?;
            base.push(Statement::Fact(Atom::entity(eb.clone(), ab.clone(), true)));
            overlay.push(Statement::Fact(Atom::entity(eo.clone(), ao.clone(), true)));
        }
        Some((base, overlay))
    }

    /// Sentence/period targets: two facts then a rule, plus distractors; base
    /// and override differ everywhere but share the template. The expected
    /// theory swaps sentence `slot`.
    fn draw_sentence_pair(&self, rng: &mut ChaCha8Rng, slot: usize) -> Option<PairDraw> {
        let cfg = self.config();
        let ents = self.pick(&cfg.entities, 4, rng)?;
        let attrs = self.pick(&cfg.attributes, 6, rng)?;
        let (e1, e2, o1, o2) = (ents[0], ents[1], ents[2], ents[3]);
        let (a1, a2, b1, b2, r1, r2) = (attrs[0], attrs[1], attrs[2], attrs[3], attrs[4], attrs[5]);

        let fact = |e: &String, a: &String| Statement::Fact(Atom::entity(e.clone(), a.clone(), true));
        let rule = |x: &String, y: &String| {
            Statement::Rule(Rule::Universal {
                category: x.clone(),
                predicate: AttrLit::pos(y.clone()),
            })
        };

        let base_core = vec![fact(e1, a1), fact(e2, a2), rule(r1, r2)];
        let overlay_core = vec![fact(o1, b1), fact(o2, b2), rule(r2, r1)];
        let (dist_b, dist_o) =
            self.distractor_block(rng, &[e1, e2, o1, o2], &[a1, a2, b1, b2, r1, r2])?;

        let mut base_stmts = base_core;
        base_stmts.extend(dist_b);
        let mut overlay_stmts = overlay_core;
        overlay_stmts.extend(dist_o);

        let mut expected_stmts = base_stmts.clone();
        expected_stmts[slot] = overlay_stmts[slot].clone();

        let removal = rng.random_bool(0.5);
        let (question, base_answer, override_answer) = if removal {
            let (e, a) = if slot == 0 { (e1, a1) } else { (e2, a2) };
            (
                Question::new(Atom::entity(e.clone(), a.clone(), true)),
                Label::True,
                Label::Unknown,
            )
        } else {
            let (o, b) = if slot == 0 { (o1, b1) } else { (o2, b2) };
            (
                Question::new(Atom::entity(o.clone(), b.clone(), true)),
                Label::Unknown,
                Label::True,
            )
        };

        Some(PairDraw {
            base: Theory::new(base_stmts),
            overlay: Theory::new(overlay_stmts),
            expected: Theory::new(expected_stmts),
            question,
            base_answer,
            override_answer,
        })
    }

    /// Conditional rule whose consequent token is swapped.
    fn draw_consequent_pair(&self, rng: &mut ChaCha8Rng) -> Option<PairDraw> {
        let cfg = self.config();
        let ents = self.pick(&cfg.entities, 2, rng)?;
        let attrs = self.pick(&cfg.attributes, 4, rng)?;
        let (e1, o1) = (ents[0], ents[1]);
        let (a, c, a_o, c_o) = (attrs[0], attrs[1], attrs[2], attrs[3]);
        let named = rng.random_bool(0.5);

        let conditional = |subj: &String, ante: &String, cons: &String| {
            Statement::Rule(Rule::Conditional {
                subject: if named {
                    SubjectPattern::Entity(subj.clone())
                } else {
                    SubjectPattern::Anyone
                },
                antecedents: vec![AttrLit::pos(ante.clone())],
                consequent: AttrLit::pos(cons.clone()),
            })
        };
        let fact = |e: &String, x: &String| Statement::Fact(Atom::entity(e.clone(), x.clone(), true));

        let base_core = vec![fact(e1, a), conditional(e1, a, c)];
        let overlay_core = vec![fact(o1, a_o), conditional(o1, a_o, c_o)];
        let (dist_b, dist_o) = self.distractor_block(rng, &[e1, o1], &[a, c, a_o, c_o])?;

        let mut base_stmts = base_core;
        base_stmts.extend(dist_b);
        let mut overlay_stmts = overlay_core;
        overlay_stmts.extend(dist_o);

        // Expected theory: base rule with consequent c -> c_o.
        let mut expected_stmts = base_stmts.clone();
        expected_stmts[1] = conditional(e1, a, c_o);

        let removal = rng.random_bool(0.5);
        let (question, base_answer, override_answer) = if removal {
            (
                Question::new(Atom::entity(e1.clone(), c.clone(), true)),
                Label::True,
                Label::Unknown,
            )
        } else {
            (
                Question::new(Atom::entity(e1.clone(), c_o.clone(), true)),
                Label::Unknown,
                Label::True,
            )
        };

        Some(PairDraw {
            base: Theory::new(base_stmts),
            overlay: Theory::new(overlay_stmts),
            expected: Theory::new(expected_stmts),
            question,
            base_answer,
            override_answer,
        })
    }

    /// Named conditional whose subject tokens are swapped. The override's rule
    /// subject is the base's second entity, so the introduced rule finds
    /// support among the base facts.
    fn draw_subject_pair(&self, rng: &mut ChaCha8Rng) -> Option<PairDraw> {
        let cfg = self.config();
        let ents = self.pick(&cfg.entities, 4, rng)?;
        let attrs = self.pick(&cfg.attributes, 3, rng)?;
        let (e1, e2, o1, o2) = (ents[0], ents[1], ents[2], ents[3]);
        let (a, c, a_o) = (attrs[0], attrs[1], attrs[2]);

        let named_rule = |subj: &String, ante: &String, cons: &String| {
            Statement::Rule(Rule::Conditional {
                subject: SubjectPattern::Entity(subj.clone()),
                antecedents: vec![AttrLit::pos(ante.clone())],
                consequent: AttrLit::pos(cons.clone()),
            })
        };
        let fact = |e: &String, x: &String| Statement::Fact(Atom::entity(e.clone(), x.clone(), true));

        // Both core entities carry the antecedent attribute; the rule names e1.
        let base_core = vec![fact(e1, a), fact(e2, a), named_rule(e1, a, c)];
        // Override rule names e2, giving the introduction direction support.
        let overlay_core = vec![fact(o1, a_o), fact(o2, a_o), named_rule(e2, a_o, c)];
        let (dist_b, dist_o) = self.distractor_block(rng, &[e1, e2, o1, o2], &[a, c, a_o])?;

        let mut base_stmts = base_core;
        base_stmts.extend(dist_b);
        let mut overlay_stmts = overlay_core;
        overlay_stmts.extend(dist_o);

        let mut expected_stmts = base_stmts.clone();
        expected_stmts[2] = named_rule(e2, a, c);

        let removal = rng.random_bool(0.5);
        let (question, base_answer, override_answer) = if removal {
            (
                Question::new(Atom::entity(e1.clone(), c.clone(), true)),
                Label::True,
                Label::Unknown,
            )
        } else {
            (
                Question::new(Atom::entity(e2.clone(), c.clone(), true)),
                Label::Unknown,
                Label::True,
            )
        };

        Some(PairDraw {
            base: Theory::new(base_stmts),
            overlay: Theory::new(overlay_stmts),
            expected: Theory::new(expected_stmts),
            question,
            base_answer,
            override_answer,
        })
    }

    /// Universal rule whose predicate token is swapped.
    fn draw_predicate_pair(&self, rng: &mut ChaCha8Rng) -> Option<PairDraw> {
        let cfg = self.config();
        let ents = self.pick(&cfg.entities, 2, rng)?;
        let attrs = self.pick(&cfg.attributes, 4, rng)?;
        let (e1, o1) = (ents[0], ents[1]);
        let (x, y, x_o, y_o) = (attrs[0], attrs[1], attrs[2], attrs[3]);

        let universal = |cat: &String, pred: &String| {
            Statement::Rule(Rule::Universal {
                category: cat.clone(),
                predicate: AttrLit::pos(pred.clone()),
            })
        };
        let fact = |e: &String, a: &String| Statement::Fact(Atom::entity(e.clone(), a.clone(), true));

        let base_core = vec![fact(e1, x), universal(x, y)];
        let overlay_core = vec![fact(o1, x_o), universal(x_o, y_o)];
        let (dist_b, dist_o) = self.distractor_block(rng, &[e1, o1], &[x, y, x_o, y_o])?;

        let mut base_stmts = base_core;
        base_stmts.extend(dist_b);
        let mut overlay_stmts = overlay_core;
        overlay_stmts.extend(dist_o);

        let mut expected_stmts = base_stmts.clone();
        expected_stmts[1] = universal(x, y_o);

        let removal = rng.random_bool(0.5);
        let category_question = rng.random_bool(0.4);
        let (question, base_answer, override_answer) = if removal {
            let q = if category_question {
                Question::new(Atom::category(x.clone(), y.clone(), true))
            } else {
                Question::new(Atom::entity(e1.clone(), y.clone(), true))
            };
            (q, Label::True, Label::Unknown)
        } else {
            let q = if category_question {
                Question::new(Atom::category(x.clone(), y_o.clone(), true))
            } else {
                Question::new(Atom::entity(e1.clone(), y_o.clone(), true))
            };
            (q, Label::Unknown, Label::True)
        };

        Some(PairDraw {
            base: Theory::new(base_stmts),
            overlay: Theory::new(overlay_stmts),
            expected: Theory::new(expected_stmts),
            question,
            base_answer,
            override_answer,
        })
    }

    /// Universal rule whose category adjective is swapped; the base's second
    /// fact carries the override's adjective for the introduction direction.
    fn draw_adjective_pair(&self, rng: &mut ChaCha8Rng) -> Option<PairDraw> {
        let cfg = self.config();
        let ents = self.pick(&cfg.entities, 4, rng)?;
        let attrs = self.pick(&cfg.attributes, 4, rng)?;
        let (e1, e2, o1, o2) = (ents[0], ents[1], ents[2], ents[3]);
        let (x, y, x_o, y_o) = (attrs[0], attrs[1], attrs[2], attrs[3]);

        let universal = |cat: &String, pred: &String| {
            Statement::Rule(Rule::Universal {
                category: cat.clone(),
                predicate: AttrLit::pos(pred.clone()),
            })
        };
        let fact = |e: &String, a: &String| Statement::Fact(Atom::entity(e.clone(), a.clone(), true));

        let base_core = vec![fact(e1, x), fact(e2, x_o), universal(x, y)];
        let overlay_core = vec![fact(o1, y_o), fact(o2, y_o), universal(x_o, y)];
        let (dist_b, dist_o) = self.distractor_block(rng, &[e1, e2, o1, o2], &[x, y, x_o, y_o])?;

        let mut base_stmts = base_core;
        base_stmts.extend(dist_b);
        let mut overlay_stmts = overlay_core;
        overlay_stmts.extend(dist_o);

        let mut expected_stmts = base_stmts.clone();
        expected_stmts[2] = universal(x_o, y);

        let removal = rng.random_bool(0.5);
        let (question, base_answer, override_answer) = if removal {
            (
                Question::new(Atom::entity(e1.clone(), y.clone(), true)),
                Label::True,
                Label::Unknown,
            )
        } else {
            (
                Question::new(Atom::entity(e2.clone(), y.clone(), true)),
                Label::Unknown,
                Label::True,
            )
        };

        Some(PairDraw {
            base: Theory::new(base_stmts),
            overlay: Theory::new(overlay_stmts),
            expected: Theory::new(expected_stmts),
            question,
            base_answer,
            override_answer,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::GenConfig;
    use rand::SeedableRng;

    fn generator() -> Generator {
        Generator::new(GenConfig::default()).unwrap()
    }

    #[test]
    fn pairs_align_for_every_kind() {
        let g = generator();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for kind in TargetKind::ALL {
            for _ in 0..10 {
                let ex = g.generate_interchange_pair(kind, &mut rng).unwrap();
                ex.check_alignment().unwrap();
                assert_eq!(ex.base.len(), ex.override_prompt.len());
                let positions = target_positions(kind, &ex.base).unwrap();
                assert!(!positions.is_empty());
            }
        }
    }

    #[test]
    fn answers_differ_for_most_pairs() {
        let g = generator();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let ds = g
            .generate_interchange_dataset(TargetKind::Consequent, 50, &mut rng)
            .unwrap();
        let differing = ds
            .iter()
            .filter(|e| e.base_answer != e.override_answer)
            .count();
        assert!(differing as f64 >= 0.8 * ds.len() as f64);
    }

    #[test]
    fn oracle_labels_are_recomputable() {
        let g = generator();
        let vocab = g.config().vocabulary();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for kind in [TargetKind::Predicate, TargetKind::FirstPeriod] {
            let ex = g.generate_interchange_pair(kind, &mut rng).unwrap();
            let base = crate::logic::parse_theory(&ex.base_theory, &vocab).unwrap();
            let expected = crate::logic::parse_theory(&ex.expected_theory, &vocab).unwrap();
            let crate::logic::Parsed::Question(q) =
                crate::logic::parse_statement(&ex.question_text, &vocab).unwrap()
            else {
                panic!()
            };
            assert_eq!(answer(&base, &q).unwrap(), ex.base_answer);
            assert_eq!(answer(&expected, &q).unwrap(), ex.override_answer);
        }
    }

    #[test]
    fn consequent_introduction_matches_paper_shape() {
        // A pair in the introduction direction reproduces the paper's
        // "Is Dave great?" pattern: Unknown on base, True after the swap.
        let g = generator();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..30 {
            let ex = g
                .generate_interchange_pair(TargetKind::Consequent, &mut rng)
                .unwrap();
            if ex.base_answer == Label::Unknown {
                assert_eq!(ex.override_answer, Label::True);
                return;
            }
        }
        panic!("no introduction-direction pair in 30 draws");
    }
}
