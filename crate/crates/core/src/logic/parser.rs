//! Recursive-descent parser for the mini-language.
//!
//! The grammar is a set of fixed templates:
//!
//! ```text
//! fact        := NAME "is" ["not"] ADJ "."
//! conditional := "If" ("someone" | NAME) "is" ADJ ["and" ADJ]
//!                "then" ("they" "are" | NAME "is") ["not"] ADJ "."
//! universal   := "All" ADJ "things" "are" ["not"] ADJ "."
//! question    := "Is" NAME ADJ "?" | "Are" "all" ADJ "things" ADJ "?"
//! ```
//!
//! Every parse is lossless: `parse(render(x)) == x` and `render(parse(s))` is
//! the whitespace-normalized form of `s`.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::ast::{Atom, AttrLit, Question, Rule, Statement, SubjectPattern, Theory};
use crate::error::{Error, Result};

/// Entity and attribute name pools the parser classifies words against.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    pub entities: BTreeSet<String>,
    pub attributes: BTreeSet<String>,
}

impl Vocabulary {
    pub fn new<S: Into<String>>(
        entities: impl IntoIterator<Item = S>,
        attributes: impl IntoIterator<Item = S>,
    ) -> Self {
        Self {
            entities: entities.into_iter().map(Into::into).collect(),
            attributes: attributes.into_iter().map(Into::into).collect(),
        }
    }

    pub fn is_entity(&self, w: &str) -> bool {
        self.entities.contains(w)
    }

    pub fn is_attribute(&self, w: &str) -> bool {
        self.attributes.contains(w)
    }
}

/// Result of parsing a single sentence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Parsed {
    Statement(Statement),
    Question(Question),
}

/// Split text into words, detaching `.`, `?` and `,` as their own tokens.
pub fn split_words(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for chunk in text.split_whitespace() {
        let mut rest = chunk;
        let mut tail = Vec::new();
        while let Some(last) = rest.chars().last() {
            if last == '.' || last == '?' || last == ',' {
                tail.push(last.to_string());
                rest = &rest[..rest.len() - last.len_utf8()];
            } else {
                break;
            }
        }
        if !rest.is_empty() {
            out.push(rest.to_string());
        }
        out.extend(tail.into_iter().rev());
    }
    out
}

struct Cursor<'a> {
    words: &'a [String],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn peek(&self) -> Option<&'a str> {
        self.words.get(self.pos).map(String::as_str)
    }

    fn next(&mut self) -> Option<&'a str> {
        let w = self.peek();
        if w.is_some() {
            self.pos += 1;
        }
        w
    }

    fn expect(&mut self, word: &str) -> Result<()> {
        match self.next() {
            Some(w) if w == word => Ok(()),
            other => Err(self.syntax(&format!("`{word}`"), other)),
        }
    }

    fn syntax(&self, expected: &str, found: Option<&str>) -> Error {
        Error::Syntax {
            position: self.pos.saturating_sub(1),
            expected: expected.to_string(),
            found: found.unwrap_or("<end of input>").to_string(),
        }
    }

    fn entity(&mut self, vocab: &Vocabulary) -> Result<String> {
        match self.next() {
            Some(w) if vocab.is_entity(w) => Ok(w.to_string()),
            Some(w) if vocab.is_attribute(w) => Err(Error::Syntax {
                position: self.pos - 1,
                expected: "entity name".into(),
                found: w.to_string(),
            }),
            Some(w) => Err(Error::UnknownWord { word: w.to_string() }),
            None => Err(self.syntax("entity name", None)),
        }
    }

    fn attribute(&mut self, vocab: &Vocabulary) -> Result<String> {
        match self.next() {
            Some(w) if vocab.is_attribute(w) => Ok(w.to_string()),
            Some(w) if vocab.is_entity(w) => Err(Error::Syntax {
                position: self.pos - 1,
                expected: "attribute".into(),
                found: w.to_string(),
            }),
            Some(w) => Err(Error::UnknownWord { word: w.to_string() }),
            None => Err(self.syntax("attribute", None)),
        }
    }

    /// Optional "not", consuming it when present.
    fn polarity(&mut self) -> bool {
        if self.peek() == Some("not") {
            self.pos += 1;
            false
        } else {
            true
        }
    }
}

/// Parse one sentence (fact, rule, or question).
pub fn parse_statement(text: &str, vocab: &Vocabulary) -> Result<Parsed> {
    let words = split_words(text);
    let mut cur = Cursor {
        words: &words,
        pos: 0,
    };
    let parsed = sentence(&mut cur, vocab)?;
    if cur.pos != words.len() {
        return Err(Error::Syntax {
            position: cur.pos,
            expected: "end of sentence".into(),
            found: words[cur.pos].clone(),
        });
    }
    Ok(parsed)
}

fn sentence(cur: &mut Cursor, vocab: &Vocabulary) -> Result<Parsed> {
    match cur.peek() {
        Some("If") => conditional(cur, vocab).map(Parsed::Statement),
        Some("All") => universal(cur, vocab).map(Parsed::Statement),
        Some("Is") => entity_question(cur, vocab).map(Parsed::Question),
        Some("Are") => category_question(cur, vocab).map(Parsed::Question),
        Some(w) if vocab.is_entity(w) => fact(cur, vocab).map(Parsed::Statement),
        Some(w) if vocab.is_attribute(w) => Err(Error::Syntax {
            position: cur.pos,
            expected: "sentence opener".into(),
            found: w.to_string(),
        }),
        Some(w) => Err(Error::UnknownWord { word: w.to_string() }),
        None => Err(cur.syntax("a sentence", None)),
    }
}

fn fact(cur: &mut Cursor, vocab: &Vocabulary) -> Result<Statement> {
    let name = cur.entity(vocab)?;
    cur.expect("is")?;
    let positive = cur.polarity();
    let attr = cur.attribute(vocab)?;
    cur.expect(".")?;
    Ok(Statement::Fact(Atom::entity(name, attr, positive)))
}

fn conditional(cur: &mut Cursor, vocab: &Vocabulary) -> Result<Statement> {
    cur.expect("If")?;
    let subject = if cur.peek() == Some("someone") {
        cur.next();
        SubjectPattern::Anyone
    } else {
        SubjectPattern::Entity(cur.entity(vocab)?)
    };
    cur.expect("is")?;
    let mut antecedents = vec![AttrLit::pos(cur.attribute(vocab)?)];
    if cur.peek() == Some("and") {
        cur.next();
        antecedents.push(AttrLit::pos(cur.attribute(vocab)?));
    }
    cur.expect("then")?;
    match (&subject, cur.next()) {
        (SubjectPattern::Anyone, Some("they")) => cur.expect("are")?,
        (SubjectPattern::Entity(name), Some(w)) if w == name => cur.expect("is")?,
        (_, other) => {
            return Err(cur.syntax("the rule's subject", other));
        }
    }
    let positive = cur.polarity();
    let attr = cur.attribute(vocab)?;
    cur.expect(".")?;
    Ok(Statement::Rule(Rule::Conditional {
        subject,
        antecedents,
        consequent: AttrLit {
            attribute: attr,
            positive,
        },
    }))
}

fn universal(cur: &mut Cursor, vocab: &Vocabulary) -> Result<Statement> {
    cur.expect("All")?;
    let category = cur.attribute(vocab)?;
    cur.expect("things")?;
    cur.expect("are")?;
    let positive = cur.polarity();
    let attr = cur.attribute(vocab)?;
    cur.expect(".")?;
    Ok(Statement::Rule(Rule::Universal {
        category,
        predicate: AttrLit {
            attribute: attr,
            positive,
        },
    }))
}

fn entity_question(cur: &mut Cursor, vocab: &Vocabulary) -> Result<Question> {
    cur.expect("Is")?;
    let name = cur.entity(vocab)?;
    let attr = cur.attribute(vocab)?;
    cur.expect("?")?;
    Ok(Question::new(Atom::entity(name, attr, true)))
}

fn category_question(cur: &mut Cursor, vocab: &Vocabulary) -> Result<Question> {
    cur.expect("Are")?;
    cur.expect("all")?;
    let cat = cur.attribute(vocab)?;
    cur.expect("things")?;
    let attr = cur.attribute(vocab)?;
    cur.expect("?")?;
    Ok(Question::new(Atom::category(cat, attr, true)))
}

/// Parse a sequence of period-terminated statements.
pub fn parse_theory(text: &str, vocab: &Vocabulary) -> Result<Theory> {
    let words = split_words(text);
    let mut statements = Vec::new();
    let mut start = 0;
    for (i, w) in words.iter().enumerate() {
        if w == "." {
            let sentence_text = words[start..=i].join(" ");
            match parse_statement(&sentence_text, vocab)? {
                Parsed::Statement(s) => statements.push(s),
                Parsed::Question(_) => {
                    return Err(Error::Syntax {
                        position: start,
                        expected: "statement".into(),
                        found: "question".into(),
                    })
                }
            }
            start = i + 1;
        }
    }
    if start != words.len() {
        return Err(Error::Syntax {
            position: words.len().saturating_sub(1),
            expected: "`.`".into(),
            found: words.last().cloned().unwrap_or_default(),
        });
    }
    Ok(Theory::new(statements))
}

/// Parse `<theory> Question: <question>` — the model prompt format.
pub fn parse_prompt(text: &str, vocab: &Vocabulary) -> Result<(Theory, Question)> {
    let Some((theory_text, question_text)) = text.split_once("Question:") else {
        return Err(Error::Syntax {
            position: 0,
            expected: "`Question:` separator".into(),
            found: "none".into(),
        });
    };
    let theory = parse_theory(theory_text.trim(), vocab)?;
    match parse_statement(question_text.trim(), vocab)? {
        Parsed::Question(q) => Ok((theory, q)),
        Parsed::Statement(_) => Err(Error::Syntax {
            position: 0,
            expected: "question".into(),
            found: "statement".into(),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::ast::{render_question, render_statement, render_theory};

    fn vocab() -> Vocabulary {
        Vocabulary::new(
            ["Harry", "Anne", "Dave", "Fiona"],
            ["tall", "round", "quiet", "young", "blue", "nice", "great", "grey"],
        )
    }

    #[test]
    fn parses_paper_fact() {
        let p = parse_statement("Harry is tall.", &vocab()).unwrap();
        assert_eq!(
            p,
            Parsed::Statement(Statement::Fact(Atom::entity("Harry", "tall", true)))
        );
    }

    #[test]
    fn parses_paper_generic_conditional() {
        let p = parse_statement("If someone is quiet then they are young.", &vocab()).unwrap();
        let Parsed::Statement(Statement::Rule(Rule::Conditional {
            subject,
            antecedents,
            consequent,
        })) = p
        else {
            panic!("expected conditional");
        };
        assert_eq!(subject, SubjectPattern::Anyone);
        assert_eq!(antecedents, vec![AttrLit::pos("quiet")]);
        assert_eq!(consequent, AttrLit::pos("young"));
    }

    #[test]
    fn parses_paper_universal() {
        let p = parse_statement("All blue things are nice.", &vocab()).unwrap();
        assert_eq!(
            p,
            Parsed::Statement(Statement::Rule(Rule::Universal {
                category: "blue".into(),
                predicate: AttrLit::pos("nice"),
            }))
        );
    }

    #[test]
    fn round_trips_statements() {
        for text in [
            "Harry is tall.",
            "Dave is not nice.",
            "If someone is quiet then they are young.",
            "If Dave is nice and quiet then Dave is not grey.",
            "All blue things are great.",
        ] {
            let Parsed::Statement(s) = parse_statement(text, &vocab()).unwrap() else {
                panic!("expected statement");
            };
            assert_eq!(render_statement(&s), text);
        }
    }

    #[test]
    fn round_trips_questions() {
        for text in ["Is Harry round?", "Are all blue things great?"] {
            let Parsed::Question(q) = parse_statement(text, &vocab()).unwrap() else {
                panic!("expected question");
            };
            assert_eq!(render_question(&q), text);
        }
    }

    #[test]
    fn normalizes_whitespace() {
        let Parsed::Statement(s) =
            parse_statement("Harry   is  tall .", &vocab()).unwrap()
        else {
            panic!()
        };
        assert_eq!(render_statement(&s), "Harry is tall.");
    }

    #[test]
    fn reports_unknown_words() {
        let err = parse_statement("Zorp is tall.", &vocab()).unwrap_err();
        assert!(matches!(err, Error::UnknownWord { word } if word == "Zorp"));
    }

    #[test]
    fn reports_syntax_position() {
        let err = parse_statement("Harry is tall", &vocab()).unwrap_err();
        assert!(matches!(err, Error::Syntax { .. }));
        let err = parse_statement("If someone is quiet then Harry is young.", &vocab()).unwrap_err();
        assert!(matches!(err, Error::Syntax { .. }));
    }

    #[test]
    fn parses_theories_and_prompts() {
        let t = parse_theory("Harry is tall. All tall things are round.", &vocab()).unwrap();
        assert_eq!(t.statements.len(), 2);
        assert_eq!(render_theory(&t), "Harry is tall. All tall things are round.");

        let (theory, q) = parse_prompt(
            "Harry is tall. All tall things are round. Question: Is Harry round?",
            &vocab(),
        )
        .unwrap();
        assert_eq!(theory.statements.len(), 2);
        assert_eq!(render_question(&q), "Is Harry round?");
    }
}
