//! Property tests for the logic engine and parser.

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use patchlab_core::logic::reference::{all_queries, random_theory};
use patchlab_core::logic::{
    answer, forward_chain, parse_statement, render_question, render_statement, Atom, AttrLit,
    Parsed, Question, Rule, Statement, Subject, SubjectPattern, Theory, Vocabulary,
};

fn entities() -> Vec<String> {
    ["Anne", "Bob", "Cara", "Dave"].map(String::from).to_vec()
}

fn attributes() -> Vec<String> {
    ["blue", "kind", "quiet", "tall"].map(String::from).to_vec()
}

fn vocab() -> Vocabulary {
    Vocabulary::new(entities(), attributes())
}

#[test]
fn monotonicity_under_statement_extension() {
    let ents = entities();
    let attrs = attributes();
    let mut checked = 0;
    let mut seed = 0u64;
    while checked < 300 {
        seed += 1;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let small = random_theory(&mut rng, &ents, &attrs, 4);
        let mut extended = small.clone();
        extended
            .statements
            .extend(random_theory(&mut rng, &ents, &attrs, 2).statements);

        let (Ok(a), Ok(b)) = (forward_chain(&small), forward_chain(&extended)) else {
            continue; // contradictory draw
        };
        assert!(
            a.is_subset(&b),
            "seed {}: derived set shrank when statements were added",
            seed
        );
        checked += 1;
    }
}

#[test]
fn idempotence_of_the_fixpoint() {
    let ents = entities();
    let attrs = attributes();
    let mut checked = 0;
    let mut seed = 1000u64;
    while checked < 300 {
        seed += 1;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let theory = random_theory(&mut rng, &ents, &attrs, 6);
        let Ok(derived) = forward_chain(&theory) else {
            continue;
        };
        // Re-feed every derived entity atom as a fact.
        let mut augmented = theory.clone();
        for atom in &derived {
            if matches!(atom.subject, Subject::Entity(_)) {
                augmented.statements.push(Statement::Fact(atom.clone()));
            }
        }
        let again = forward_chain(&augmented).expect("consistent augmentations stay consistent");
        assert_eq!(derived, again, "seed {}", seed);
        checked += 1;
    }
}

#[test]
fn engines_agree_on_sampled_theories() {
    use patchlab_core::logic::reference::{answer_by_naive, answer_by_proof_search};
    let ents = entities();
    let attrs = attributes();
    let queries = all_queries(&ents, &attrs);
    let depth = ents.len() * attrs.len() * 2;
    let mut checked = 0;
    let mut seed = 5000u64;
    while checked < 200 {
        seed += 1;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let theory = random_theory(&mut rng, &ents, &attrs, 6);
        let Ok(_) = forward_chain(&theory) else {
            continue;
        };
        for q in &queries {
            let a = answer(&theory, q).unwrap();
            let b = answer_by_naive(&theory, q).unwrap();
            let c = answer_by_proof_search(&theory, q, depth);
            assert_eq!(a, b, "seed {} query {:?}", seed, q);
            assert_eq!(a, c, "seed {} query {:?}", seed, q);
        }
        checked += 1;
    }
}

// --- parser round-trips ------------------------------------------------------

fn arb_attr() -> impl Strategy<Value = String> {
    prop::sample::select(attributes())
}

fn arb_entity() -> impl Strategy<Value = String> {
    prop::sample::select(entities())
}

fn arb_statement() -> impl Strategy<Value = Statement> {
    prop_oneof![
        (arb_entity(), arb_attr(), any::<bool>())
            .prop_map(|(e, a, p)| Statement::Fact(Atom::entity(e, a, p))),
        (
            prop_oneof![
                Just(SubjectPattern::Anyone),
                arb_entity().prop_map(SubjectPattern::Entity)
            ],
            prop::collection::vec(arb_attr(), 1..=2),
            arb_attr(),
            any::<bool>()
        )
            .prop_map(|(subject, antes, cons, p)| {
                Statement::Rule(Rule::Conditional {
                    subject,
                    antecedents: antes.into_iter().map(AttrLit::pos).collect(),
                    consequent: AttrLit {
                        attribute: cons,
                        positive: p,
                    },
                })
            }),
        (arb_attr(), arb_attr(), any::<bool>()).prop_map(|(c, a, p)| {
            Statement::Rule(Rule::Universal {
                category: c,
                predicate: AttrLit {
                    attribute: a,
                    positive: p,
                },
            })
        }),
    ]
}

proptest! {
    #[test]
    fn parse_render_is_identity_on_asts(s in arb_statement()) {
        let text = render_statement(&s);
        let parsed = parse_statement(&text, &vocab()).unwrap();
        prop_assert_eq!(parsed, Parsed::Statement(s));
    }

    #[test]
    fn render_parse_normalizes_strings(s in arb_statement(), spaces in 1usize..3) {
        // Sprinkle extra whitespace; the parse must normalize it away.
        let text = render_statement(&s);
        let padded = text.replace(' ', &" ".repeat(spaces));
        let Parsed::Statement(p) = parse_statement(&padded, &vocab()).unwrap() else {
            return Err(TestCaseError::fail("expected statement"));
        };
        prop_assert_eq!(render_statement(&p), text);
    }

    #[test]
    fn question_round_trip(e in arb_entity(), a in arb_attr()) {
        let q = Question::new(Atom::entity(e, a, true));
        let text = render_question(&q);
        let parsed = parse_statement(&text, &vocab()).unwrap();
        prop_assert_eq!(parsed, Parsed::Question(q));
    }
}

#[test]
fn theory_parse_render_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..100 {
        let t = random_theory(&mut rng, &entities(), &attributes(), 6);
        let text = patchlab_core::logic::render_theory(&t);
        let parsed = patchlab_core::logic::parse_theory(&text, &vocab()).unwrap();
        assert_eq!(parsed, t);
    }
}

#[test]
fn forward_chain_terminates_within_bound() {
    // The derived-atom space is bounded by (entities + attrs) x attrs x 2;
    // dense rule sets must still terminate.
    let attrs = attributes();
    let mut statements = Vec::new();
    for x in &attrs {
        for y in &attrs {
            statements.push(Statement::Rule(Rule::Universal {
                category: x.clone(),
                predicate: AttrLit::pos(y.clone()),
            }));
        }
    }
    for e in entities() {
        statements.push(Statement::Fact(Atom::entity(e, "blue", true)));
    }
    let t = Theory::new(statements);
    let derived = forward_chain(&t).unwrap();
    assert!(!derived.is_empty());
}
