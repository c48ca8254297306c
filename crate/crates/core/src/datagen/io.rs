//! Line-delimited dataset files: one JSON header line, then one record per
//! line. Loading re-verifies every label against the logic oracle and every
//! annotation against the token stream.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::prompt::{target_positions, AnnotatedPrompt, InterchangeExample, LabeledExample};
use super::tokenizer::Tokenizer;
use crate::error::{Error, Result};
use crate::logic::{answer, parse_statement, parse_theory, Parsed, Question, Vocabulary};

pub const DATASET_FORMAT: &str = "patchlab-dataset";
pub const DATASET_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub format: String,
    pub version: u32,
    pub kind: String,
    pub count: usize,
    pub entities: Vec<String>,
    pub attributes: Vec<String>,
}

impl DatasetHeader {
    fn new(kind: &str, count: usize, entities: &[String], attributes: &[String]) -> Self {
        Self {
            format: DATASET_FORMAT.into(),
            version: DATASET_VERSION,
            kind: kind.into(),
            count,
            entities: entities.to_vec(),
            attributes: attributes.to_vec(),
        }
    }

    pub fn vocabulary(&self) -> Vocabulary {
        Vocabulary::new(self.entities.clone(), self.attributes.clone())
    }

    pub fn tokenizer(&self) -> Tokenizer {
        Tokenizer::new(&self.entities, &self.attributes)
    }

    fn check(&self, want_kind: &str) -> Result<()> {
        if self.format != DATASET_FORMAT {
            return Err(Error::Schema {
                line: 1,
                detail: format!("not a {DATASET_FORMAT} file (format `{}`)", self.format),
            });
        }
        if self.version != DATASET_VERSION {
            return Err(Error::Schema {
                line: 1,
                detail: format!("unsupported version {}", self.version),
            });
        }
        if self.kind != want_kind {
            return Err(Error::Schema {
                line: 1,
                detail: format!("expected kind `{want_kind}`, found `{}`", self.kind),
            });
        }
        Ok(())
    }
}

fn write_lines<T: Serialize>(
    path: &Path,
    header: &DatasetHeader,
    records: &[T],
) -> Result<()> {
    let mut out = Vec::new();
    serde_json::to_writer(&mut out, header)?;
    out.push(b'\n');
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.push(b'\n');
    }
    let mut f = fs::File::create(path)?;
    f.write_all(&out)?;
    Ok(())
}

fn read_lines<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<(DatasetHeader, Vec<T>)> {
    let f = fs::File::open(path)?;
    let reader = BufReader::new(f);
    let mut lines = reader.lines();
    let header_line = lines.next().ok_or(Error::Schema {
        line: 1,
        detail: "empty file".into(),
    })??;
    let header: DatasetHeader = serde_json::from_str(&header_line).map_err(|e| Error::Schema {
        line: 1,
        detail: format!("bad header: {e}"),
    })?;
    let mut records = Vec::with_capacity(header.count);
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: T = serde_json::from_str(&line).map_err(|e| Error::Schema {
            line: i + 2,
            detail: e.to_string(),
        })?;
        records.push(rec);
    }
    if records.len() != header.count {
        return Err(Error::Schema {
            line: records.len() + 1,
            detail: format!(
                "header promises {} records, file has {}",
                header.count,
                records.len()
            ),
        });
    }
    Ok((header, records))
}

/// Write a labeled split.
pub fn emit_labeled(
    path: &Path,
    examples: &[LabeledExample],
    entities: &[String],
    attributes: &[String],
) -> Result<()> {
    let header = DatasetHeader::new("labeled", examples.len(), entities, attributes);
    write_lines(path, &header, examples)
}

/// Load a labeled split, re-checking every record against the oracle.
pub fn load_labeled(path: &Path) -> Result<(DatasetHeader, Vec<LabeledExample>)> {
    let (header, examples): (DatasetHeader, Vec<LabeledExample>) = read_lines(path)?;
    header.check("labeled")?;
    let vocab = header.vocabulary();
    let tokenizer = header.tokenizer();
    for (i, ex) in examples.iter().enumerate() {
        verify_labeled(ex, &vocab, &tokenizer).map_err(|e| Error::Schema {
            line: i + 2,
            detail: e.to_string(),
        })?;
    }
    Ok((header, examples))
}

fn verify_labeled(ex: &LabeledExample, vocab: &Vocabulary, tokenizer: &Tokenizer) -> Result<()> {
    let theory = parse_theory(&ex.theory_text, vocab)?;
    let question = parse_question(&ex.question_text, vocab)?;
    let label = answer(&theory, &question)?;
    if label != ex.label {
        return Err(Error::Schema {
            line: 0,
            detail: format!("stored label {} but oracle says {label}", ex.label),
        });
    }
    verify_prompt_tokens(&ex.prompt, &ex.theory_text, &ex.question_text, tokenizer)
}

fn parse_question(text: &str, vocab: &Vocabulary) -> Result<Question> {
    match parse_statement(text, vocab)? {
        Parsed::Question(q) => Ok(q),
        Parsed::Statement(_) => Err(Error::Schema {
            line: 0,
            detail: "question field holds a statement".into(),
        }),
    }
}

fn verify_prompt_tokens(
    prompt: &AnnotatedPrompt,
    theory_text: &str,
    question_text: &str,
    tokenizer: &Tokenizer,
) -> Result<()> {
    let expected_text = format!("{theory_text} Question: {question_text}");
    if prompt.text != expected_text {
        return Err(Error::Schema {
            line: 0,
            detail: "prompt text does not match theory + question".into(),
        });
    }
    let ids = tokenizer.tokenize(&prompt.text)?;
    if ids != prompt.token_ids {
        return Err(Error::Schema {
            line: 0,
            detail: "token ids do not match retokenized text".into(),
        });
    }
    prompt.verify(tokenizer)
}

/// Write an interchange subset (records may mix target kinds).
pub fn emit_interchange(
    path: &Path,
    examples: &[InterchangeExample],
    entities: &[String],
    attributes: &[String],
) -> Result<()> {
    let header = DatasetHeader::new("interchange", examples.len(), entities, attributes);
    write_lines(path, &header, examples)
}

/// Load an interchange subset with full alignment and oracle re-checks.
pub fn load_interchange(path: &Path) -> Result<(DatasetHeader, Vec<InterchangeExample>)> {
    let (header, examples): (DatasetHeader, Vec<InterchangeExample>) = read_lines(path)?;
    header.check("interchange")?;
    let vocab = header.vocabulary();
    let tokenizer = header.tokenizer();
    for (i, ex) in examples.iter().enumerate() {
        verify_interchange(ex, &vocab, &tokenizer).map_err(|e| Error::Schema {
            line: i + 2,
            detail: e.to_string(),
        })?;
    }
    Ok((header, examples))
}

fn verify_interchange(
    ex: &InterchangeExample,
    vocab: &Vocabulary,
    tokenizer: &Tokenizer,
) -> Result<()> {
    let base = parse_theory(&ex.base_theory, vocab)?;
    let expected = parse_theory(&ex.expected_theory, vocab)?;
    parse_theory(&ex.override_theory, vocab)?;
    let question = parse_question(&ex.question_text, vocab)?;
    if answer(&base, &question)? != ex.base_answer {
        return Err(Error::Schema {
            line: 0,
            detail: "base_answer disagrees with oracle".into(),
        });
    }
    if answer(&expected, &question)? != ex.override_answer {
        return Err(Error::Schema {
            line: 0,
            detail: "override_answer disagrees with oracle on the expected theory".into(),
        });
    }
    verify_prompt_tokens(&ex.base, &ex.base_theory, &ex.question_text, tokenizer)?;
    verify_prompt_tokens(
        &ex.override_prompt,
        &ex.override_theory,
        &ex.question_text,
        tokenizer,
    )?;
    ex.check_alignment()?;
    // Replacing the target tokens of the base with the override's tokens must
    // reproduce the stored expected theory (sentence targets swap the whole
    // sentence; the period stands for its sentence).
    let positions = target_positions(ex.target, &ex.base)?;
    let expanded: Vec<usize> = match ex.target {
        super::prompt::TargetKind::FirstPeriod => {
            let (s, e) = ex.base.sentence_spans[0];
            (s..=e).collect()
        }
        super::prompt::TargetKind::SecondPeriod => {
            let (s, e) = *ex.base.sentence_spans.get(1).ok_or_else(|| {
                Error::Alignment("second-period target without a second sentence".into())
            })?;
            (s..=e).collect()
        }
        super::prompt::TargetKind::FirstSentence => {
            let (s, e) = ex.base.sentence_spans[0];
            (s..=e).collect()
        }
        super::prompt::TargetKind::SecondSentence => {
            let (s, e) = *ex.base.sentence_spans.get(1).ok_or_else(|| {
                Error::Alignment("second-sentence target without a second sentence".into())
            })?;
            (s..=e).collect()
        }
        _ => positions,
    };
    let mut ids = ex.base.token_ids.clone();
    for &p in &expanded {
        ids[p] = ex.override_prompt.token_ids[p];
    }
    let patched_text = tokenizer.detokenize(&ids);
    let expected_prompt = format!("{} Question: {}", ex.expected_theory, ex.question_text);
    if patched_text != expected_prompt {
        return Err(Error::Alignment(format!(
            "token-level patch `{patched_text}` does not reproduce the expected theory"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{GenConfig, Generator, TargetKind};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn labeled_round_trip() {
        let g = Generator::new(GenConfig::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let examples = g.generate_split(30, &mut rng).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("train.jsonl");
        emit_labeled(&path, &examples, &g.config().entities, &g.config().attributes).unwrap();
        let (header, loaded) = load_labeled(&path).unwrap();
        assert_eq!(header.count, 30);
        assert_eq!(loaded, examples);
    }

    #[test]
    fn interchange_round_trip() {
        let g = Generator::new(GenConfig::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let examples = g
            .generate_interchange_dataset(TargetKind::Predicate, 10, &mut rng)
            .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("predicate.jsonl");
        emit_interchange(&path, &examples, &g.config().entities, &g.config().attributes).unwrap();
        let (_, loaded) = load_interchange(&path).unwrap();
        assert_eq!(loaded, examples);
    }

    #[test]
    fn empty_dataset_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.jsonl");
        let cfg = GenConfig::default();
        emit_labeled(&path, &[], &cfg.entities, &cfg.attributes).unwrap();
        let (header, loaded) = load_labeled(&path).unwrap();
        assert_eq!(header.count, 0);
        assert!(loaded.is_empty());
    }

    #[test]
    fn truncated_file_reports_its_line() {
        let g = Generator::new(GenConfig::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let examples = g.generate_split(5, &mut rng).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("train.jsonl");
        emit_labeled(&path, &examples, &g.config().entities, &g.config().attributes).unwrap();

        let text = std::fs::read_to_string(&path).unwrap();
        let truncated: String = text.lines().take(4).collect::<Vec<_>>().join("\n");
        std::fs::write(&path, truncated).unwrap();
        assert!(matches!(load_labeled(&path), Err(Error::Schema { .. })));

        // Corrupt one record instead of dropping it.
        let mut lines: Vec<String> = text.lines().map(String::from).collect();
        lines[3] = lines[3][..lines[3].len() / 2].to_string();
        std::fs::write(&path, lines.join("\n")).unwrap();
        let err = load_labeled(&path).unwrap_err();
        assert!(matches!(err, Error::Schema { line: 4, .. }), "{err}");
    }

    #[test]
    fn tampered_label_is_caught_on_load() {
        let g = Generator::new(GenConfig::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let examples = g.generate_split(3, &mut rng).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("train.jsonl");
        emit_labeled(&path, &examples, &g.config().entities, &g.config().attributes).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let tampered = text.replacen("\"label\":\"True\"", "\"label\":\"False\"", 1);
        assert_ne!(text, tampered);
        std::fs::write(&path, tampered).unwrap();
        assert!(load_labeled(&path).is_err());
    }
}
