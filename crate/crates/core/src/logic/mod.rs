//! Mini-language of facts, rules and questions; parser; label oracle.

mod ast;
mod engine;
mod parser;
pub mod reference;

pub use ast::{
    render_question, render_statement, render_theory, Atom, AttrLit, Label, Question, Rule,
    Statement, Subject, SubjectPattern, Theory,
};
pub use engine::{answer, answer_with, forward_chain};
pub use parser::{parse_prompt, parse_statement, parse_theory, split_words, Parsed, Vocabulary};
