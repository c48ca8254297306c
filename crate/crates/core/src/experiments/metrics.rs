//! Per-layer evaluation metrics.

use rayon::prelude::*;

use crate::datagen::{InterchangeExample, LabeledExample};
use crate::error::{Error, Result};
use crate::intervene::{run_interchange, run_zero, TokenSelector, ZeroMode};
use crate::model::{classify, HookPoint, TransformerModel};
use crate::numerics::Scalar;

/// Fraction of examples whose post-zeroing prediction matches the
/// ground-truth label.
pub fn zeroing_accuracy<E: Scalar>(
    model: &TransformerModel<E>,
    dataset: &[LabeledExample],
    hook: HookPoint,
    selector: &TokenSelector,
    mode: ZeroMode,
) -> Result<f64> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset("zeroing_accuracy"));
    }
    let hits: Vec<bool> = dataset
        .par_iter()
        .map(|ex| -> Result<bool> {
            let logits = run_zero(model, &ex.prompt, hook, selector, mode)?;
            Ok(classify(&logits)? == ex.label)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(fraction(&hits))
}

/// Interchange intervention accuracy: fraction of examples where the
/// post-intervention prediction equals the override answer.
pub fn iia<E: Scalar>(
    model: &TransformerModel<E>,
    dataset: &[InterchangeExample],
    hook: HookPoint,
) -> Result<f64> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset("iia"));
    }
    let hits: Vec<bool> = dataset
        .par_iter()
        .map(|ex| -> Result<bool> {
            let (_, label) = run_interchange(model, ex, hook)?;
            Ok(label == ex.override_answer)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(fraction(&hits))
}

/// Mean correct-class logit drop when layer `intervene` is overwritten with
/// layer `swap`'s activations, over examples the model answers correctly.
/// Positive means the swap hurts the correct class.
pub fn layer_swap_delta<E: Scalar>(
    model: &TransformerModel<E>,
    dataset: &[LabeledExample],
    intervene_layer: usize,
    swap_layer: usize,
) -> Result<f64> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset("layer_swap_delta"));
    }
    let deltas: Vec<Option<f64>> = dataset
        .par_iter()
        .map(|ex| -> Result<Option<f64>> {
            let (swapped, original) =
                crate::intervene::run_layer_swap(model, &ex.prompt, intervene_layer, swap_layer)?;
            if classify(&original)? != ex.label {
                return Ok(None); // only baseline-correct examples count
            }
            let c = ex.label.class_index();
            Ok(Some(
                original.data()[c].to_f64() - swapped.data()[c].to_f64(),
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    mean_present(&deltas).ok_or(Error::EmptyDataset("layer_swap_delta (baseline-correct filter)"))
}

pub(crate) fn fraction(hits: &[bool]) -> f64 {
    hits.iter().filter(|&&h| h).count() as f64 / hits.len() as f64
}

pub(crate) fn mean_present(values: &[Option<f64>]) -> Option<f64> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for v in values.iter().flatten() {
        sum += v;
        n += 1;
    }
    (n > 0).then(|| sum / n as f64)
}
