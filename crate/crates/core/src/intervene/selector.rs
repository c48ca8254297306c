//! Declarative token selectors, resolved against prompt annotations.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::datagen::{target_positions, AnnotatedPrompt, TargetKind};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TokenSelector {
    AllPeriods,
    QuestionMark,
    PeriodsAndQuestionMark,
    FirstSentence,
    FirstPeriod,
    SecondSentence,
    SecondPeriod,
    Consequent,
    Predicate,
    Adjective,
    Subject,
    /// Keep `keep` of every `of` eligible tokens (non-period,
    /// non-question-mark), sampled without replacement from the seed.
    Proportion { keep: u32, of: u32, seed: u64 },
    Explicit(Vec<usize>),
    Complement(Box<TokenSelector>),
}

impl TokenSelector {
    /// The selector matching an interchange target kind.
    pub fn for_target(kind: TargetKind) -> Self {
        match kind {
            TargetKind::FirstSentence => TokenSelector::FirstSentence,
            TargetKind::FirstPeriod => TokenSelector::FirstPeriod,
            TargetKind::SecondSentence => TokenSelector::SecondSentence,
            TargetKind::SecondPeriod => TokenSelector::SecondPeriod,
            TargetKind::Consequent => TokenSelector::Consequent,
            TargetKind::Predicate => TokenSelector::Predicate,
            TargetKind::Adjective => TokenSelector::Adjective,
            TargetKind::Subject => TokenSelector::Subject,
        }
    }
}

/// Resolve to a sorted position set over the prompt.
pub fn resolve(selector: &TokenSelector, prompt: &AnnotatedPrompt) -> Result<Vec<usize>> {
    let n = prompt.len();
    let sorted_ok = |mut v: Vec<usize>| -> Result<Vec<usize>> {
        v.sort_unstable();
        v.dedup();
        if let Some(&last) = v.last() {
            if last >= n {
                return Err(Error::PositionOutOfRange {
                    position: last,
                    len: n,
                });
            }
        }
        Ok(v)
    };
    match selector {
        TokenSelector::AllPeriods => sorted_ok(prompt.period_positions.clone()),
        TokenSelector::QuestionMark => sorted_ok(vec![prompt.question_mark_position]),
        TokenSelector::PeriodsAndQuestionMark => {
            let mut v = prompt.period_positions.clone();
            v.push(prompt.question_mark_position);
            sorted_ok(v)
        }
        TokenSelector::FirstSentence => sorted_ok(target_positions(TargetKind::FirstSentence, prompt)?),
        TokenSelector::FirstPeriod => sorted_ok(target_positions(TargetKind::FirstPeriod, prompt)?),
        TokenSelector::SecondSentence => {
            sorted_ok(target_positions(TargetKind::SecondSentence, prompt)?)
        }
        TokenSelector::SecondPeriod => sorted_ok(target_positions(TargetKind::SecondPeriod, prompt)?),
        TokenSelector::Consequent => sorted_ok(target_positions(TargetKind::Consequent, prompt)?),
        TokenSelector::Predicate => sorted_ok(target_positions(TargetKind::Predicate, prompt)?),
        TokenSelector::Adjective => sorted_ok(target_positions(TargetKind::Adjective, prompt)?),
        TokenSelector::Subject => sorted_ok(target_positions(TargetKind::Subject, prompt)?),
        TokenSelector::Proportion { keep, of, seed } => {
            if *of == 0 || keep > of {
                return Err(Error::Config(format!("bad proportion {keep}/{of}")));
            }
            let punctuation: BTreeSet<usize> = prompt
                .period_positions
                .iter()
                .copied()
                .chain([prompt.question_mark_position])
                .collect();
            let eligible: Vec<usize> = (0..n).filter(|p| !punctuation.contains(p)).collect();
            let m = eligible.len();
            let k = (*keep as usize * m).div_ceil(*of as usize);
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let mut pool = eligible;
            pool.shuffle(&mut rng);
            sorted_ok(pool.into_iter().take(k).collect())
        }
        TokenSelector::Explicit(positions) => sorted_ok(positions.clone()),
        TokenSelector::Complement(inner) => {
            let inner: BTreeSet<usize> = resolve(inner, prompt)?.into_iter().collect();
            Ok((0..n).filter(|p| !inner.contains(p)).collect())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::Tokenizer;
    use crate::logic::{parse_prompt, Vocabulary};

    fn prompt() -> AnnotatedPrompt {
        let entities: Vec<String> = ["Dave", "Fiona"].map(String::from).to_vec();
        let attributes: Vec<String> = ["nice", "grey"].map(String::from).to_vec();
        let tok = Tokenizer::new(&entities, &attributes);
        let vocab = Vocabulary::new(entities, attributes);
        let (theory, q) = parse_prompt(
            "Dave is nice. Fiona is grey. Question: Is Dave nice?",
            &vocab,
        )
        .unwrap();
        AnnotatedPrompt::build(&theory, &q, &tok).unwrap()
    }

    #[test]
    fn periods_on_the_paper_example() {
        // Dave(0) is(1) nice(2) .(3) Fiona(4) is(5) grey(6) .(7) Question:(8)
        // Is(9) Dave(10) nice(11) ?(12)
        let p = prompt();
        assert_eq!(resolve(&TokenSelector::AllPeriods, &p).unwrap(), vec![3, 7]);
        assert_eq!(
            resolve(&TokenSelector::QuestionMark, &p).unwrap(),
            vec![p.len() - 1]
        );
        assert_eq!(
            resolve(&TokenSelector::PeriodsAndQuestionMark, &p).unwrap(),
            vec![3, 7, 12]
        );
    }

    #[test]
    fn complement_partitions_the_positions() {
        let p = prompt();
        let s = TokenSelector::AllPeriods;
        let inner = resolve(&s, &p).unwrap();
        let comp = resolve(&TokenSelector::Complement(Box::new(s.clone())), &p).unwrap();
        let mut union: Vec<usize> = inner.iter().chain(comp.iter()).copied().collect();
        union.sort_unstable();
        assert_eq!(union, (0..p.len()).collect::<Vec<_>>());

        let double = resolve(
            &TokenSelector::Complement(Box::new(TokenSelector::Complement(Box::new(s.clone())))),
            &p,
        )
        .unwrap();
        assert_eq!(double, inner);
    }

    #[test]
    fn proportion_is_deterministic_and_sized() {
        let p = prompt();
        // 13 tokens, 3 punctuation -> 10 eligible.
        for (keep, of, want) in [(1u32, 15u32, 1usize), (1, 5, 2), (1, 2, 5), (4, 5, 8)] {
            let sel = TokenSelector::Proportion { keep, of, seed: 9 };
            let a = resolve(&sel, &p).unwrap();
            let b = resolve(&sel, &p).unwrap();
            assert_eq!(a, b);
            assert_eq!(a.len(), want, "{keep}/{of}");
            let punct = [3usize, 7, 12];
            assert!(a.iter().all(|i| !punct.contains(i)));
        }
        let s1 = resolve(&TokenSelector::Proportion { keep: 1, of: 2, seed: 1 }, &p).unwrap();
        let s2 = resolve(&TokenSelector::Proportion { keep: 1, of: 2, seed: 2 }, &p).unwrap();
        assert_ne!(s1, s2);
    }

    #[test]
    fn second_sentence_exists_here_but_third_period_does_not() {
        let p = prompt();
        assert_eq!(
            resolve(&TokenSelector::SecondSentence, &p).unwrap(),
            vec![4, 5, 6]
        );
        assert!(resolve(&TokenSelector::Consequent, &p).is_err());
    }

    #[test]
    fn explicit_out_of_range_is_rejected() {
        let p = prompt();
        assert!(resolve(&TokenSelector::Explicit(vec![99]), &p).is_err());
    }
}
