//! Word-level tokenizer: whitespace-delimited words plus `.` `?` `,` as
//! single tokens. A stand-in for the subword tokenizers of real models.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::logic::split_words;

/// Words with fixed grammatical roles, always present in the vocabulary.
pub const STRUCTURAL_WORDS: &[&str] = &[
    "is", "not", "If", "someone", "then", "they", "are", "and", "All", "all", "things", "Is",
    "Are", "Question:",
];

/// Punctuation tokens.
pub const PUNCTUATION: &[&str] = &[".", "?", ","];

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Tokenizer {
    words: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, u32>,
}

impl Tokenizer {
    /// Canonical vocabulary order: structural words, punctuation, entities,
    /// attributes (entity/attribute order as given).
    pub fn new(entities: &[String], attributes: &[String]) -> Self {
        let mut words: Vec<String> = STRUCTURAL_WORDS.iter().map(|s| s.to_string()).collect();
        words.extend(PUNCTUATION.iter().map(|s| s.to_string()));
        words.extend(entities.iter().cloned());
        words.extend(attributes.iter().cloned());
        Self::from_words(words)
    }

    pub fn from_words(words: Vec<String>) -> Self {
        let index = words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i as u32))
            .collect();
        Self { words, index }
    }

    /// Rebuild the word index (used after deserialization).
    pub fn reindex(&mut self) {
        self.index = self
            .words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i as u32))
            .collect();
    }

    pub fn vocab_size(&self) -> usize {
        self.words.len()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn id(&self, word: &str) -> Option<u32> {
        self.index.get(word).copied()
    }

    pub fn word(&self, id: u32) -> Option<&str> {
        self.words.get(id as usize).map(String::as_str)
    }

    pub fn period_id(&self) -> u32 {
        self.id(".").expect("period always in vocabulary")
    }

    pub fn question_mark_id(&self) -> u32 {
        self.id("?").expect("question mark always in vocabulary")
    }

    pub fn tokenize(&self, text: &str) -> Result<Vec<u32>> {
        split_words(text)
            .into_iter()
            .map(|w| self.id(&w).ok_or(Error::UnknownWord { word: w }))
            .collect()
    }

    /// Inverse of [`tokenize`] up to canonical spacing: single spaces between
    /// words, punctuation attached to the preceding word.
    pub fn detokenize(&self, ids: &[u32]) -> String {
        let mut out = String::new();
        for &id in ids {
            let w = self.word(id).unwrap_or("<unk>");
            let is_punct = PUNCTUATION.contains(&w);
            if !out.is_empty() && !is_punct {
                out.push(' ');
            }
            out.push_str(w);
        }
        out
    }
}
