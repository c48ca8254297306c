//! The five experiment suites behind the figure pipelines.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::manifest::RunManifest;
use super::metrics::{fraction, mean_present};
use crate::datagen::{InterchangeExample, LabeledExample, TargetKind};
use crate::derive_seed;
use crate::error::{Error, Result};
use crate::intervene::{resolve, TokenSelector, ZeroMode};
use crate::model::{classify, ActivationEdit, HookPoint, TransformerModel};
use crate::numerics::Scalar;

/// The four dilution proportions swept by the dilution suite.
pub const DILUTION_PROPORTIONS: [(u32, u32); 4] = [(1, 15), (1, 5), (1, 2), (4, 5)];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RuleKind {
    Conditional,
    Universal,
}

impl RuleKind {
    pub fn as_str(self) -> &'static str {
        match self {
            RuleKind::Conditional => "conditional",
            RuleKind::Universal => "universal",
        }
    }
}

impl std::str::FromStr for RuleKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "conditional" => Ok(RuleKind::Conditional),
            "universal" => Ok(RuleKind::Universal),
            _ => Err(Error::Config(format!(
                "unknown rule kind `{s}`; valid: conditional, universal"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SuiteKind {
    /// Keep only the selected tokens, zero the rest, sweep layers.
    ZeroSufficiency,
    /// Zero the selected tokens, keep the rest, sweep layers.
    ZeroNecessity,
    /// Question mark kept, periods zeroed, a growing share of other tokens
    /// kept; one curve per proportion.
    Dilution,
    /// Interchange accuracy across the embedding hook and every layer.
    Iia(TargetKind),
    /// Layer-swap logit deltas over every layer pair.
    SwapHeatmap(RuleKind),
}

impl SuiteKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            SuiteKind::ZeroSufficiency => "zero-sufficiency",
            SuiteKind::ZeroNecessity => "zero-necessity",
            SuiteKind::Dilution => "dilution",
            SuiteKind::Iia(_) => "iia",
            SuiteKind::SwapHeatmap(_) => "swap",
        }
    }
}

/// One per-layer metric series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerCurve {
    pub metric: String,
    /// Indexed by swept layer; when `includes_embedding` the leading entry is
    /// the embedding hook.
    pub values: Vec<f64>,
    pub samples_per_layer: usize,
    pub includes_embedding: bool,
}

/// Mean correct-class logit deltas for every (intervention, swap) layer pair.
/// `deltas[swap][intervene]`; positive = the swap hurts the correct class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatmapResult {
    pub n_layers: usize,
    pub deltas: Vec<Vec<f64>>,
    pub samples: usize,
}

/// Everything a suite run produces, with its manifest embedded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteOutput {
    pub manifest: RunManifest,
    pub curves: Vec<LayerCurve>,
    pub heatmap: Option<HeatmapResult>,
}

/// Dataset flavor a suite consumes.
pub enum SuiteData<'a> {
    Labeled(&'a [LabeledExample]),
    Interchange(&'a [InterchangeExample]),
}

/// Execute a suite. Results are a pure function of (model, data, manifest).
pub fn run_suite<E: Scalar>(
    model: &TransformerModel<E>,
    data: &SuiteData,
    kind: &SuiteKind,
    manifest: &RunManifest,
) -> Result<SuiteOutput> {
    let n_layers = model.config().n_layers;
    let layers: Vec<usize> = match &manifest.layers {
        Some(ls) => {
            for &l in ls {
                HookPoint::BlockOutput(l).validate(n_layers)?;
            }
            ls.clone()
        }
        None => (0..n_layers).collect(),
    };

    let output = match kind {
        SuiteKind::ZeroSufficiency | SuiteKind::ZeroNecessity => {
            let SuiteData::Labeled(all) = data else {
                return Err(Error::Config("zero suites need a labeled dataset".into()));
            };
            let examples = take(all, manifest.samples, "zero suite")?;
            let selector = parse_zero_selector(&manifest.target)?;
            let mode = if matches!(kind, SuiteKind::ZeroSufficiency) {
                ZeroMode::KeepOnly
            } else {
                ZeroMode::ZeroOut
            };
            let curve = zero_curve(model, examples, &layers, &selector, mode)?;
            SuiteOutput {
                manifest: manifest.clone(),
                curves: vec![LayerCurve {
                    metric: format!("{}-{}", kind.as_str(), manifest.target),
                    values: curve,
                    samples_per_layer: examples.len(),
                    includes_embedding: false,
                }],
                heatmap: None,
            }
        }
        SuiteKind::Dilution => {
            let SuiteData::Labeled(all) = data else {
                return Err(Error::Config("dilution needs a labeled dataset".into()));
            };
            let examples = take(all, manifest.samples, "dilution")?;
            let mut curves = Vec::new();
            for (keep, of) in DILUTION_PROPORTIONS {
                let values = dilution_curve(model, examples, &layers, keep, of, manifest.seed)?;
                curves.push(LayerCurve {
                    metric: format!("dilution-{keep}-in-{of}"),
                    values,
                    samples_per_layer: examples.len(),
                    includes_embedding: false,
                });
            }
            SuiteOutput {
                manifest: manifest.clone(),
                curves,
                heatmap: None,
            }
        }
        SuiteKind::Iia(target) => {
            let SuiteData::Interchange(all) = data else {
                return Err(Error::Config("iia needs an interchange dataset".into()));
            };
            let filtered: Vec<&InterchangeExample> =
                all.iter().filter(|e| e.target == *target).collect();
            let examples: Vec<&InterchangeExample> =
                filtered.into_iter().take(manifest.samples).collect();
            if examples.is_empty() {
                return Err(Error::EmptyDataset("iia suite"));
            }
            let values = iia_curve(model, &examples, &layers)?;
            SuiteOutput {
                manifest: manifest.clone(),
                curves: vec![LayerCurve {
                    metric: format!("iia-{target}"),
                    values,
                    samples_per_layer: examples.len(),
                    includes_embedding: true,
                }],
                heatmap: None,
            }
        }
        SuiteKind::SwapHeatmap(rule) => {
            let SuiteData::Labeled(all) = data else {
                return Err(Error::Config("swap needs a labeled dataset".into()));
            };
            let with_rule: Vec<&LabeledExample> = all
                .iter()
                .filter(|e| match rule {
                    RuleKind::Conditional => e.prompt.consequent.is_some(),
                    RuleKind::Universal => e.prompt.predicate.is_some(),
                })
                .collect();
            let examples: Vec<&LabeledExample> =
                with_rule.into_iter().take(manifest.samples).collect();
            if examples.is_empty() {
                return Err(Error::EmptyDataset("swap suite (rule filter)"));
            }
            let heatmap = swap_heatmap(model, &examples, &layers)?;
            SuiteOutput {
                manifest: manifest.clone(),
                curves: Vec::new(),
                heatmap: Some(heatmap),
            }
        }
    };
    Ok(output)
}

fn take<'a, T>(all: &'a [T], samples: usize, what: &'static str) -> Result<&'a [T]> {
    if all.is_empty() {
        return Err(Error::EmptyDataset(what));
    }
    Ok(&all[..samples.min(all.len())])
}

fn parse_zero_selector(target: &str) -> Result<TokenSelector> {
    match target {
        "periods" => Ok(TokenSelector::AllPeriods),
        "question-mark" => Ok(TokenSelector::QuestionMark),
        "periods-and-question-mark" => Ok(TokenSelector::PeriodsAndQuestionMark),
        other => Err(Error::Config(format!(
            "unknown zeroing target `{other}`; valid: periods, question-mark, periods-and-question-mark"
        ))),
    }
}

fn zero_curve<E: Scalar>(
    model: &TransformerModel<E>,
    examples: &[LabeledExample],
    layers: &[usize],
    selector: &TokenSelector,
    mode: ZeroMode,
) -> Result<Vec<f64>> {
    layers
        .iter()
        .map(|&l| {
            let hits: Vec<bool> = examples
                .par_iter()
                .map(|ex| -> Result<bool> {
                    let logits = crate::intervene::run_zero(
                        model,
                        &ex.prompt,
                        HookPoint::BlockOutput(l),
                        selector,
                        mode,
                    )?;
                    Ok(classify(&logits)? == ex.label)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(fraction(&hits))
        })
        .collect()
}

fn dilution_curve<E: Scalar>(
    model: &TransformerModel<E>,
    examples: &[LabeledExample],
    layers: &[usize],
    keep: u32,
    of: u32,
    seed: u64,
) -> Result<Vec<f64>> {
    layers
        .iter()
        .map(|&l| {
            let hits: Vec<bool> = examples
                .par_iter()
                .enumerate()
                .map(|(i, ex)| -> Result<bool> {
                    // Question mark stays, periods stay zeroed, and a seeded
                    // share of the other tokens is kept.
                    let extra = TokenSelector::Proportion {
                        keep,
                        of,
                        seed: derive_seed(seed, &format!("dilution:{keep}/{of}:{i}")),
                    };
                    let mut positions = resolve(&extra, &ex.prompt)?;
                    positions.push(ex.prompt.question_mark_position);
                    positions.sort_unstable();
                    positions.dedup();
                    let edit = ActivationEdit::keep_only(HookPoint::BlockOutput(l), positions);
                    let (logits, _) =
                        model.forward(&ex.prompt.token_ids, &Default::default(), &[edit])?;
                    Ok(classify(&logits)? == ex.label)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(fraction(&hits))
        })
        .collect()
}

fn iia_curve<E: Scalar>(
    model: &TransformerModel<E>,
    examples: &[&InterchangeExample],
    layers: &[usize],
) -> Result<Vec<f64>> {
    let hooks: Vec<HookPoint> = std::iter::once(HookPoint::EmbeddingOutput)
        .chain(layers.iter().map(|&l| HookPoint::BlockOutput(l)))
        .collect();
    // One override forward per example captures every hook at once.
    let per_example: Vec<Vec<bool>> = examples
        .par_iter()
        .map(|ex| -> Result<Vec<bool>> {
            ex.check_alignment()?;
            let positions = resolve(&TokenSelector::for_target(ex.target), &ex.base)?;
            let capture: std::collections::BTreeSet<HookPoint> = hooks.iter().copied().collect();
            let (_, source) = model.forward(&ex.override_prompt.token_ids, &capture, &[])?;
            let mut hits = Vec::with_capacity(hooks.len());
            for &hook in &hooks {
                let rows = source.rows_at(hook, &positions)?;
                let edit = ActivationEdit::replace(hook, positions.clone(), rows);
                let (logits, _) =
                    model.forward(&ex.base.token_ids, &Default::default(), &[edit])?;
                hits.push(classify(&logits)? == ex.override_answer);
            }
            Ok(hits)
        })
        .collect::<Result<Vec<_>>>()?;

    Ok((0..hooks.len())
        .map(|h| fraction(&per_example.iter().map(|row| row[h]).collect::<Vec<_>>()))
        .collect())
}

fn swap_heatmap<E: Scalar>(
    model: &TransformerModel<E>,
    examples: &[&LabeledExample],
    layers: &[usize],
) -> Result<HeatmapResult> {
    let k = layers.len();
    // Per example: one clean forward caches every block output; each (a, b)
    // pair is one edited forward. Baseline-incorrect examples are skipped.
    let per_example: Vec<Option<Vec<Vec<f64>>>> = examples
        .par_iter()
        .map(|ex| -> Result<Option<Vec<Vec<f64>>>> {
            let capture: std::collections::BTreeSet<HookPoint> =
                layers.iter().map(|&l| HookPoint::BlockOutput(l)).collect();
            let (original, cache) = model.forward(&ex.prompt.token_ids, &capture, &[])?;
            if classify(&original)? != ex.label {
                return Ok(None);
            }
            let c = ex.label.class_index();
            let orig_logit = original.data()[c].to_f64();
            let mut grid = vec![vec![0.0f64; k]; k];
            for (bi, &b) in layers.iter().enumerate() {
                let donor = cache.get(HookPoint::BlockOutput(b))?.clone();
                for (ai, &a) in layers.iter().enumerate() {
                    let edit =
                        ActivationEdit::replace_all(HookPoint::BlockOutput(a), donor.clone());
                    let (swapped, _) =
                        model.forward(&ex.prompt.token_ids, &Default::default(), &[edit])?;
                    grid[bi][ai] = orig_logit - swapped.data()[c].to_f64();
                }
            }
            Ok(Some(grid))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut deltas = vec![vec![0.0f64; k]; k];
    for (bi, row) in deltas.iter_mut().enumerate() {
        for (ai, cell) in row.iter_mut().enumerate() {
            let vals: Vec<Option<f64>> = per_example
                .iter()
                .map(|g| g.as_ref().map(|grid| grid[bi][ai]))
                .collect();
            *cell = mean_present(&vals)
                .ok_or(Error::EmptyDataset("swap heatmap (baseline-correct filter)"))?;
        }
    }
    let kept = per_example.iter().flatten().count();
    Ok(HeatmapResult {
        n_layers: k,
        deltas,
        samples: kept,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{GenConfig, Generator};
    use crate::model::ModelConfig;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn setup() -> (TransformerModel<f32>, Vec<LabeledExample>, Vec<InterchangeExample>) {
        let gen = Generator::new(GenConfig::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(51);
        let labeled = gen.generate_split(12, &mut rng).unwrap();
        let inter = gen
            .generate_interchange_dataset(TargetKind::Consequent, 6, &mut rng)
            .unwrap();
        let cfg = ModelConfig {
            n_layers: 3,
            n_heads: 2,
            d_model: 16,
            d_ff: 32,
            vocab_size: gen.tokenizer().vocab_size(),
            max_seq_len: 128,
            n_classes: 3,
        };
        (TransformerModel::init(cfg, 4).unwrap(), labeled, inter)
    }

    fn manifest(suite: &str, target: &str, samples: usize) -> RunManifest {
        RunManifest::new(suite, target, "ck", "ds", 3, samples, None, "t0")
    }

    #[test]
    fn zero_suite_has_one_value_per_layer() {
        let (model, labeled, _) = setup();
        let m = manifest("zero-necessity", "periods-and-question-mark", 8);
        let out = run_suite(
            &model,
            &SuiteData::Labeled(&labeled),
            &SuiteKind::ZeroNecessity,
            &m,
        )
        .unwrap();
        assert_eq!(out.curves.len(), 1);
        assert_eq!(out.curves[0].values.len(), 3);
        assert!(!out.curves[0].includes_embedding);
        assert!(out.curves[0].values.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn dilution_runs_exactly_the_four_proportions() {
        let (model, labeled, _) = setup();
        let m = manifest("dilution", "question-mark", 6);
        let out = run_suite(&model, &SuiteData::Labeled(&labeled), &SuiteKind::Dilution, &m)
            .unwrap();
        let names: Vec<&str> = out.curves.iter().map(|c| c.metric.as_str()).collect();
        assert_eq!(
            names,
            vec!["dilution-1-in-15", "dilution-1-in-5", "dilution-1-in-2", "dilution-4-in-5"]
        );
        for c in &out.curves {
            assert_eq!(c.values.len(), 3);
        }
    }

    #[test]
    fn iia_suite_includes_embedding_hook() {
        let (model, _, inter) = setup();
        let m = manifest("iia", "consequent", 6);
        let out = run_suite(
            &model,
            &SuiteData::Interchange(&inter),
            &SuiteKind::Iia(TargetKind::Consequent),
            &m,
        )
        .unwrap();
        assert_eq!(out.curves[0].values.len(), 4); // embedding + 3 layers
        assert!(out.curves[0].includes_embedding);
    }

    #[test]
    fn iia_curve_matches_single_metric_calls() {
        let (model, _, inter) = setup();
        let m = manifest("iia", "consequent", 6);
        let out = run_suite(
            &model,
            &SuiteData::Interchange(&inter),
            &SuiteKind::Iia(TargetKind::Consequent),
            &m,
        )
        .unwrap();
        let direct_emb =
            crate::experiments::iia(&model, &inter, HookPoint::EmbeddingOutput).unwrap();
        let direct_l1 =
            crate::experiments::iia(&model, &inter, HookPoint::BlockOutput(1)).unwrap();
        assert_eq!(out.curves[0].values[0], direct_emb);
        assert_eq!(out.curves[0].values[2], direct_l1);
    }

    #[test]
    fn suite_runs_are_reproducible() {
        let (model, labeled, _) = setup();
        let m = manifest("dilution", "question-mark", 8);
        let a = run_suite(&model, &SuiteData::Labeled(&labeled), &SuiteKind::Dilution, &m)
            .unwrap();
        let b = run_suite(&model, &SuiteData::Labeled(&labeled), &SuiteKind::Dilution, &m)
            .unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }
}
