//! The three intervention families, compiled to activation edits and run
//! against the model.

use std::collections::BTreeSet;

use crate::datagen::InterchangeExample;
use crate::error::Result;
use crate::logic::Label;
use crate::model::{classify, ActivationCache, ActivationEdit, HookPoint, TransformerModel};
use crate::numerics::{Scalar, Tensor};

use super::selector::{resolve, TokenSelector};

/// Zeroing flavor: zero the selection (necessity) or zero its complement
/// (sufficiency).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZeroMode {
    ZeroOut,
    KeepOnly,
}

/// A fully specified single-run intervention.
#[derive(Debug, Clone)]
pub enum Intervention<E> {
    ZeroOut {
        hook: HookPoint,
        selector: TokenSelector,
    },
    KeepOnly {
        hook: HookPoint,
        selector: TokenSelector,
    },
    Interchange {
        hook: HookPoint,
        selector: TokenSelector,
        source: ActivationCache<E>,
    },
    LayerSwap {
        intervene_layer: usize,
        swap_layer: usize,
    },
}

/// Zeroing-out run: `ZeroOut` zeroes the selected rows at the hook,
/// `KeepOnly` zeroes every other row.
pub fn run_zero<E: Scalar>(
    model: &TransformerModel<E>,
    prompt: &crate::datagen::AnnotatedPrompt,
    hook: HookPoint,
    selector: &TokenSelector,
    mode: ZeroMode,
) -> Result<Tensor<E>> {
    let positions = resolve(selector, prompt)?;
    let edit = match mode {
        ZeroMode::ZeroOut => ActivationEdit::set_zero(hook, positions),
        ZeroMode::KeepOnly => ActivationEdit::keep_only(hook, positions),
    };
    let (logits, _) = model.forward(&prompt.token_ids, &BTreeSet::new(), &[edit])?;
    Ok(logits)
}

/// Interchange run: cache the override prompt at the hook, replace the base
/// run's rows at the target positions, continue, classify.
pub fn run_interchange<E: Scalar>(
    model: &TransformerModel<E>,
    example: &InterchangeExample,
    hook: HookPoint,
) -> Result<(Tensor<E>, Label)> {
    example.check_alignment()?;
    let selector = TokenSelector::for_target(example.target);
    let positions = resolve(&selector, &example.base)?;

    let capture: BTreeSet<HookPoint> = [hook].into();
    let (_, source) = model.forward(&example.override_prompt.token_ids, &capture, &[])?;
    let rows = source.rows_at(hook, &positions)?;

    let edit = ActivationEdit::replace(hook, positions, rows);
    let (logits, _) = model.forward(&example.base.token_ids, &BTreeSet::new(), &[edit])?;
    let label = classify(&logits)?;
    Ok((logits, label))
}

/// Layer swap: a clean forward caches `BlockOutput(swap_layer)`; a second
/// forward replaces the whole `BlockOutput(intervene_layer)` tensor with it.
///
/// Returns `(logits_swapped, logits_original)`.
pub fn run_layer_swap<E: Scalar>(
    model: &TransformerModel<E>,
    prompt: &crate::datagen::AnnotatedPrompt,
    intervene_layer: usize,
    swap_layer: usize,
) -> Result<(Tensor<E>, Tensor<E>)> {
    let capture: BTreeSet<HookPoint> = [HookPoint::BlockOutput(swap_layer)].into();
    let (original, cache) = model.forward(&prompt.token_ids, &capture, &[])?;
    let donor = cache.get(HookPoint::BlockOutput(swap_layer))?.clone();
    let edit = ActivationEdit::replace_all(HookPoint::BlockOutput(intervene_layer), donor);
    let (swapped, _) = model.forward(&prompt.token_ids, &BTreeSet::new(), &[edit])?;
    Ok((swapped, original))
}

/// Run any [`Intervention`] against a prompt, returning the edited logits.
pub fn run<E: Scalar>(
    model: &TransformerModel<E>,
    prompt: &crate::datagen::AnnotatedPrompt,
    intervention: &Intervention<E>,
) -> Result<Tensor<E>> {
    match intervention {
        Intervention::ZeroOut { hook, selector } => {
            run_zero(model, prompt, *hook, selector, ZeroMode::ZeroOut)
        }
        Intervention::KeepOnly { hook, selector } => {
            run_zero(model, prompt, *hook, selector, ZeroMode::KeepOnly)
        }
        Intervention::Interchange {
            hook,
            selector,
            source,
        } => {
            let positions = resolve(selector, prompt)?;
            let rows = source.rows_at(*hook, &positions)?;
            let edit = ActivationEdit::replace(*hook, positions, rows);
            Ok(model.forward(&prompt.token_ids, &BTreeSet::new(), &[edit])?.0)
        }
        Intervention::LayerSwap {
            intervene_layer,
            swap_layer,
        } => Ok(run_layer_swap(model, prompt, *intervene_layer, *swap_layer)?.0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{AnnotatedPrompt, GenConfig, Generator, TargetKind, Tokenizer};
    use crate::logic::{parse_prompt, Vocabulary};
    use crate::model::ModelConfig;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn setup() -> (TransformerModel<f32>, AnnotatedPrompt, Tokenizer) {
        let entities: Vec<String> = ["Dave", "Fiona", "Harry"].map(String::from).to_vec();
        let attributes: Vec<String> = ["nice", "grey", "round"].map(String::from).to_vec();
        let tok = Tokenizer::new(&entities, &attributes);
        let vocab = Vocabulary::new(entities.clone(), attributes.clone());
        let (theory, q) = parse_prompt(
            "Dave is nice. Fiona is grey. Question: Is Dave nice?",
            &vocab,
        )
        .unwrap();
        let prompt = AnnotatedPrompt::build(&theory, &q, &tok).unwrap();
        let cfg = ModelConfig {
            n_layers: 3,
            n_heads: 2,
            d_model: 16,
            d_ff: 32,
            vocab_size: tok.vocab_size(),
            max_seq_len: 32,
            n_classes: 3,
        };
        (TransformerModel::init(cfg, 11).unwrap(), prompt, tok)
    }

    #[test]
    fn empty_zero_out_is_baseline() {
        let (model, prompt, _) = setup();
        let baseline = model.logits(&prompt.token_ids).unwrap();
        for l in 0..3 {
            let logits = run_zero(
                &model,
                &prompt,
                HookPoint::BlockOutput(l),
                &TokenSelector::Explicit(vec![]),
                ZeroMode::ZeroOut,
            )
            .unwrap();
            assert!(logits.bit_eq(&baseline));
        }
    }

    #[test]
    fn keep_all_is_baseline() {
        let (model, prompt, _) = setup();
        let baseline = model.logits(&prompt.token_ids).unwrap();
        let all: Vec<usize> = (0..prompt.len()).collect();
        let logits = run_zero(
            &model,
            &prompt,
            HookPoint::BlockOutput(1),
            &TokenSelector::Explicit(all),
            ZeroMode::KeepOnly,
        )
        .unwrap();
        assert!(logits.bit_eq(&baseline));
    }

    #[test]
    fn zero_out_equals_keep_only_of_complement() {
        let (model, prompt, _) = setup();
        for selector in [
            TokenSelector::AllPeriods,
            TokenSelector::QuestionMark,
            TokenSelector::Proportion { keep: 1, of: 2, seed: 4 },
        ] {
            for l in 0..3 {
                let a = run_zero(
                    &model,
                    &prompt,
                    HookPoint::BlockOutput(l),
                    &selector,
                    ZeroMode::ZeroOut,
                )
                .unwrap();
                let b = run_zero(
                    &model,
                    &prompt,
                    HookPoint::BlockOutput(l),
                    &TokenSelector::Complement(Box::new(selector.clone())),
                    ZeroMode::KeepOnly,
                )
                .unwrap();
                assert!(a.bit_eq(&b), "selector {selector:?} layer {l}");
            }
        }
    }

    #[test]
    fn self_interchange_is_baseline() {
        let gen = Generator::new(GenConfig::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let mut ex = gen
            .generate_interchange_pair(TargetKind::Consequent, &mut rng)
            .unwrap();
        // Override with the base itself: a self-swap.
        ex.override_prompt = ex.base.clone();
        let cfg = ModelConfig {
            n_layers: 3,
            n_heads: 2,
            d_model: 16,
            d_ff: 32,
            vocab_size: gen.tokenizer().vocab_size(),
            max_seq_len: 128,
            n_classes: 3,
        };
        let model = TransformerModel::<f32>::init(cfg, 21).unwrap();
        let baseline = model.logits(&ex.base.token_ids).unwrap();
        for hook in HookPoint::sweep(3) {
            let (logits, _) = run_interchange(&model, &ex, hook).unwrap();
            assert!(logits.bit_eq(&baseline), "hook {hook}");
        }
    }

    #[test]
    fn self_layer_swap_is_identity() {
        let (model, prompt, _) = setup();
        for l in 0..3 {
            let (swapped, original) = run_layer_swap(&model, &prompt, l, l).unwrap();
            assert!(swapped.bit_eq(&original));
        }
    }

    #[test]
    fn cross_layer_swap_changes_something() {
        let (model, prompt, _) = setup();
        let (swapped, original) = run_layer_swap(&model, &prompt, 0, 2).unwrap();
        assert!(!swapped.bit_eq(&original));
    }
}
