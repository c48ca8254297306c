//! The facts/rules/questions mini-language: types and surface rendering.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Three-way answer space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    True,
    False,
    Unknown,
}

impl Label {
    /// Class index used by the model head: True=0, False=1, Unknown=2.
    pub fn class_index(self) -> usize {
        match self {
            Label::True => 0,
            Label::False => 1,
            Label::Unknown => 2,
        }
    }

    pub fn from_class_index(idx: usize) -> Option<Self> {
        match idx {
            0 => Some(Label::True),
            1 => Some(Label::False),
            2 => Some(Label::Unknown),
            _ => None,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::True => write!(f, "True"),
            Label::False => write!(f, "False"),
            Label::Unknown => write!(f, "Unknown"),
        }
    }
}

/// What an atom talks about: a named entity or a whole attribute category.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Subject {
    Entity(String),
    Category(String),
}

impl fmt::Display for Subject {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Subject::Entity(n) => write!(f, "{n}"),
            Subject::Category(c) => write!(f, "all {c} things"),
        }
    }
}

/// A polarized attribute claim about a subject.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Atom {
    pub subject: Subject,
    pub attribute: String,
    pub positive: bool,
}

impl Atom {
    pub fn entity(name: impl Into<String>, attribute: impl Into<String>, positive: bool) -> Self {
        Self {
            subject: Subject::Entity(name.into()),
            attribute: attribute.into(),
            positive,
        }
    }

    pub fn category(cat: impl Into<String>, attribute: impl Into<String>, positive: bool) -> Self {
        Self {
            subject: Subject::Category(cat.into()),
            attribute: attribute.into(),
            positive,
        }
    }

    pub fn negated(&self) -> Self {
        Self {
            subject: self.subject.clone(),
            attribute: self.attribute.clone(),
            positive: !self.positive,
        }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let neg = if self.positive { "" } else { "not " };
        write!(f, "{} is {}{}", self.subject, neg, self.attribute)
    }
}

/// Attribute literal inside a rule (polarity on the consequent side only in
/// the surface grammar; the engine accepts either).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AttrLit {
    pub attribute: String,
    pub positive: bool,
}

impl AttrLit {
    pub fn pos(attribute: impl Into<String>) -> Self {
        Self {
            attribute: attribute.into(),
            positive: true,
        }
    }

    pub fn neg(attribute: impl Into<String>) -> Self {
        Self {
            attribute: attribute.into(),
            positive: false,
        }
    }
}

/// Antecedent subject of a conditional rule.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SubjectPattern {
    /// "If someone is ..." — matches any entity.
    Anyone,
    /// "If Dave is ..." — matches that entity only.
    Entity(String),
}

/// The two rule shapes under study.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Rule {
    /// "If X is a (and b) then X is (not) c."
    Conditional {
        subject: SubjectPattern,
        antecedents: Vec<AttrLit>,
        consequent: AttrLit,
    },
    /// "All x things are (not) y."
    Universal { category: String, predicate: AttrLit },
}

impl Rule {
    pub fn is_conditional(&self) -> bool {
        matches!(self, Rule::Conditional { .. })
    }

    pub fn is_universal(&self) -> bool {
        matches!(self, Rule::Universal { .. })
    }
}

/// One sentence of a theory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Statement {
    Fact(Atom),
    Rule(Rule),
}

/// Ordered list of facts and rules; renders as period-terminated sentences.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Theory {
    pub statements: Vec<Statement>,
}

impl Theory {
    pub fn new(statements: Vec<Statement>) -> Self {
        Self { statements }
    }

    pub fn rules(&self) -> impl Iterator<Item = &Rule> {
        self.statements.iter().filter_map(|s| match s {
            Statement::Rule(r) => Some(r),
            Statement::Fact(_) => None,
        })
    }

    pub fn has_conditional(&self) -> bool {
        self.rules().any(Rule::is_conditional)
    }

    pub fn has_universal(&self) -> bool {
        self.rules().any(Rule::is_universal)
    }
}

/// A query; always rendered with a trailing question mark.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Question {
    pub atom: Atom,
}

impl Question {
    pub fn new(atom: Atom) -> Self {
        Self { atom }
    }
}

// --- surface rendering -----------------------------------------------------

fn polarity_word(positive: bool) -> &'static str {
    if positive {
        ""
    } else {
        "not "
    }
}

/// Deterministic surface form of one statement, period-terminated.
pub fn render_statement(s: &Statement) -> String {
    match s {
        Statement::Fact(a) => {
            let Subject::Entity(name) = &a.subject else {
                unreachable!("facts are about entities");
            };
            format!("{} is {}{}.", name, polarity_word(a.positive), a.attribute)
        }
        Statement::Rule(Rule::Conditional {
            subject,
            antecedents,
            consequent,
        }) => {
            let ante = match antecedents.len() {
                1 => antecedents[0].attribute.clone(),
                _ => format!("{} and {}", antecedents[0].attribute, antecedents[1].attribute),
            };
            let neg = polarity_word(consequent.positive);
            match subject {
                SubjectPattern::Anyone => format!(
                    "If someone is {} then they are {}{}.",
                    ante, neg, consequent.attribute
                ),
                SubjectPattern::Entity(name) => format!(
                    "If {} is {} then {} is {}{}.",
                    name, ante, name, neg, consequent.attribute
                ),
            }
        }
        Statement::Rule(Rule::Universal { category, predicate }) => format!(
            "All {} things are {}{}.",
            category,
            polarity_word(predicate.positive),
            predicate.attribute
        ),
    }
}

/// Question surface form. The grammar only admits positive queries.
pub fn render_question(q: &Question) -> String {
    debug_assert!(q.atom.positive, "the question grammar is positive-only");
    match &q.atom.subject {
        Subject::Entity(name) => format!("Is {} {}?", name, q.atom.attribute),
        Subject::Category(cat) => format!("Are all {} things {}?", cat, q.atom.attribute),
    }
}

/// Statements joined by single spaces, in listed order.
pub fn render_theory(t: &Theory) -> String {
    t.statements
        .iter()
        .map(render_statement)
        .collect::<Vec<_>>()
        .join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fact_templates() {
        let s = Statement::Fact(Atom::entity("Harry", "round", true));
        assert_eq!(render_statement(&s), "Harry is round.");
        let n = Statement::Fact(Atom::entity("Dave", "nice", false));
        assert_eq!(render_statement(&n), "Dave is not nice.");
    }

    #[test]
    fn universal_template() {
        let s = Statement::Rule(Rule::Universal {
            category: "green".into(),
            predicate: AttrLit::pos("great"),
        });
        assert_eq!(render_statement(&s), "All green things are great.");
    }

    #[test]
    fn conditional_templates() {
        let generic = Statement::Rule(Rule::Conditional {
            subject: SubjectPattern::Anyone,
            antecedents: vec![AttrLit::pos("quiet")],
            consequent: AttrLit::pos("young"),
        });
        assert_eq!(
            render_statement(&generic),
            "If someone is quiet then they are young."
        );
        let named = Statement::Rule(Rule::Conditional {
            subject: SubjectPattern::Entity("Dave".into()),
            antecedents: vec![AttrLit::pos("nice"), AttrLit::pos("kind")],
            consequent: AttrLit::neg("sad"),
        });
        assert_eq!(
            render_statement(&named),
            "If Dave is nice and kind then Dave is not sad."
        );
    }

    #[test]
    fn question_templates() {
        let q = Question::new(Atom::entity("Harry", "round", true));
        assert_eq!(render_question(&q), "Is Harry round?");
        let qc = Question::new(Atom::category("blue", "great", true));
        assert_eq!(render_question(&qc), "Are all blue things great?");
    }
}
