//! Annotated prompts and example records.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::tokenizer::Tokenizer;
use crate::error::{Error, Result};
use crate::logic::{
    render_question, render_theory, split_words, Label, Question, Rule, Statement, SubjectPattern,
    Theory,
};

/// The eight interchange targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TargetKind {
    FirstSentence,
    FirstPeriod,
    SecondSentence,
    SecondPeriod,
    Consequent,
    Predicate,
    Adjective,
    Subject,
}

impl TargetKind {
    pub const ALL: [TargetKind; 8] = [
        TargetKind::FirstSentence,
        TargetKind::FirstPeriod,
        TargetKind::SecondSentence,
        TargetKind::SecondPeriod,
        TargetKind::Consequent,
        TargetKind::Predicate,
        TargetKind::Adjective,
        TargetKind::Subject,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TargetKind::FirstSentence => "first-sentence",
            TargetKind::FirstPeriod => "first-period",
            TargetKind::SecondSentence => "second-sentence",
            TargetKind::SecondPeriod => "second-period",
            TargetKind::Consequent => "consequent",
            TargetKind::Predicate => "predicate",
            TargetKind::Adjective => "adjective",
            TargetKind::Subject => "subject",
        }
    }
}

impl fmt::Display for TargetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TargetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TargetKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown target `{}`; valid targets: {}",
                    s,
                    TargetKind::ALL.map(|k| k.as_str()).join(", ")
                ))
            })
    }
}

/// Tokenized prompt with span metadata for every intervention target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatedPrompt {
    pub text: String,
    pub token_ids: Vec<u32>,
    /// Sentence spans `(start, end)` over context tokens, exclusive of the
    /// terminating period.
    pub sentence_spans: Vec<(usize, usize)>,
    pub period_positions: Vec<usize>,
    pub question_mark_position: usize,
    /// Consequent token of the first conditional rule.
    pub consequent: Option<Vec<usize>>,
    /// Predicate token of the first universal rule.
    pub predicate: Option<Vec<usize>>,
    /// Category adjective token of the first universal rule.
    pub adjective: Option<Vec<usize>>,
    /// Subject name tokens of the first named conditional rule.
    pub subject: Option<Vec<usize>>,
}

impl AnnotatedPrompt {
    /// Render `<theory> Question: <question>`, tokenize, and locate every
    /// annotation from the statement structure.
    pub fn build(theory: &Theory, question: &Question, tokenizer: &Tokenizer) -> Result<Self> {
        let text = format!("{} Question: {}", render_theory(theory), render_question(question));
        let token_ids = tokenizer.tokenize(&text)?;

        let mut sentence_spans = Vec::new();
        let mut period_positions = Vec::new();
        let mut consequent = None;
        let mut predicate = None;
        let mut adjective = None;
        let mut subject = None;

        let mut offset = 0usize;
        for stmt in &theory.statements {
            let words = split_words(&crate::logic::render_statement(stmt));
            let len = words.len();
            sentence_spans.push((offset, offset + len - 1));
            period_positions.push(offset + len - 1);

            if let Statement::Rule(rule) = stmt {
                match rule {
                    Rule::Conditional { subject: subj, antecedents, .. } => {
                        if consequent.is_none() {
                            consequent = Some(vec![offset + len - 2]);
                            if let SubjectPattern::Entity(_) = subj {
                                let t = if antecedents.len() == 1 { 4 } else { 6 };
                                subject = Some(vec![offset + 1, offset + t + 1]);
                            }
                        }
                    }
                    Rule::Universal { .. } => {
                        if predicate.is_none() {
                            predicate = Some(vec![offset + len - 2]);
                            adjective = Some(vec![offset + 1]);
                        }
                    }
                }
            }
            offset += len;
        }

        let prompt = Self {
            text,
            question_mark_position: token_ids.len() - 1,
            token_ids,
            sentence_spans,
            period_positions,
            consequent,
            predicate,
            adjective,
            subject,
        };
        prompt.verify(tokenizer)?;
        Ok(prompt)
    }

    pub fn len(&self) -> usize {
        self.token_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.token_ids.is_empty()
    }

    /// Structural integrity: indices in range, punctuation where annotated,
    /// spans disjoint/ordered/covering the context.
    pub fn verify(&self, tokenizer: &Tokenizer) -> Result<()> {
        let n = self.token_ids.len();
        let period = tokenizer.period_id();
        let qmark = tokenizer.question_mark_id();

        let fail = |detail: String| Error::Alignment(detail);

        if self.question_mark_position != n.saturating_sub(1)
            || self.token_ids.last() != Some(&qmark)
        {
            return Err(fail("question mark must be the final token".into()));
        }
        for &p in &self.period_positions {
            if p >= n || self.token_ids[p] != period {
                return Err(fail(format!("period annotation at {} is not a period", p)));
            }
        }
        let mut expected_start = 0usize;
        for (i, &(start, end)) in self.sentence_spans.iter().enumerate() {
            if start != expected_start || end <= start || end >= n {
                return Err(fail(format!("bad sentence span ({start},{end})")));
            }
            if self.period_positions.get(i) != Some(&end) {
                return Err(fail(format!("span {} does not end at its period", i)));
            }
            expected_start = end + 1;
        }
        for indices in [&self.consequent, &self.predicate, &self.adjective, &self.subject]
            .into_iter()
            .flatten()
        {
            for &idx in indices {
                if idx >= n {
                    return Err(fail(format!("target index {} out of range", idx)));
                }
            }
        }
        Ok(())
    }
}

/// One training/evaluation record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledExample {
    pub theory_text: String,
    pub question_text: String,
    pub label: Label,
    pub prompt: AnnotatedPrompt,
}

/// One interchange-intervention record: aligned base/override prompts, the
/// shared question, and oracle answers for the base and the expected
/// post-intervention theory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterchangeExample {
    pub target: TargetKind,
    pub base_theory: String,
    pub override_theory: String,
    /// Base theory with the target tokens replaced by the override's; the
    /// oracle labels this to produce `override_answer`.
    pub expected_theory: String,
    pub question_text: String,
    pub base_answer: Label,
    pub override_answer: Label,
    pub base: AnnotatedPrompt,
    #[serde(rename = "override")]
    pub override_prompt: AnnotatedPrompt,
}

impl InterchangeExample {
    /// Token positions the target kind resolves to on the base prompt.
    pub fn target_positions(&self) -> Result<Vec<usize>> {
        target_positions(self.target, &self.base)
    }

    /// Alignment invariant: equal lengths and identical target positions.
    pub fn check_alignment(&self) -> Result<()> {
        if self.base.len() != self.override_prompt.len() {
            return Err(Error::Alignment(format!(
                "base has {} tokens, override {}",
                self.base.len(),
                self.override_prompt.len()
            )));
        }
        let b = target_positions(self.target, &self.base)?;
        let o = target_positions(self.target, &self.override_prompt)?;
        if b != o {
            return Err(Error::Alignment(format!(
                "target positions differ: base {:?} vs override {:?}",
                b, o
            )));
        }
        Ok(())
    }
}

/// Resolve a target kind to token positions using the prompt's annotations.
pub fn target_positions(kind: TargetKind, prompt: &AnnotatedPrompt) -> Result<Vec<usize>> {
    let sentence = |i: usize| -> Result<Vec<usize>> {
        let &(start, end) = prompt
            .sentence_spans
            .get(i)
            .ok_or_else(|| Error::SelectorInapplicable(format!("no sentence {}", i + 1)))?;
        Ok((start..end).collect())
    };
    let period = |i: usize| -> Result<Vec<usize>> {
        prompt
            .period_positions
            .get(i)
            .map(|&p| vec![p])
            .ok_or_else(|| Error::SelectorInapplicable(format!("no period {}", i + 1)))
    };
    let annotated = |v: &Option<Vec<usize>>, name: &str| -> Result<Vec<usize>> {
        v.clone()
            .ok_or_else(|| Error::SelectorInapplicable(format!("prompt has no {name} annotation")))
    };
    match kind {
        TargetKind::FirstSentence => sentence(0),
        TargetKind::SecondSentence => sentence(1),
        TargetKind::FirstPeriod => period(0),
        TargetKind::SecondPeriod => period(1),
        TargetKind::Consequent => annotated(&prompt.consequent, "consequent"),
        TargetKind::Predicate => annotated(&prompt.predicate, "predicate"),
        TargetKind::Adjective => annotated(&prompt.adjective, "adjective"),
        TargetKind::Subject => annotated(&prompt.subject, "subject"),
    }
}
