//! patchlab: train a toy reasoning transformer and probe it with
//! residual-stream interventions.

mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use config::FileConfig;
use patchlab_core::datagen::{
    emit_interchange, emit_labeled, load_interchange, load_labeled, Generator, TargetKind,
};
use patchlab_core::derive_seed;
use patchlab_core::experiments::{
    consolidate_report, run_suite, write_suite_files, RuleKind, RunManifest, SuiteData, SuiteKind,
};
use patchlab_core::model::{
    accuracy, file_id, load_checkpoint, save_checkpoint, train, TransformerModel,
};

#[derive(Parser)]
#[command(name = "patchlab", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML config file; flags override file values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Global seed; per-component seeds are derived from it.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Generate train/val/test splits and the interchange subsets.
    GenData {
        #[command(flatten)]
        common: Common,
        /// Override [data].train examples.
        #[arg(long)]
        train: Option<usize>,
        /// Override [data].val examples.
        #[arg(long)]
        val: Option<usize>,
        /// Override [data].test examples.
        #[arg(long)]
        test: Option<usize>,
        /// Override [data].interchange_per_kind.
        #[arg(long)]
        interchange: Option<usize>,
    },
    /// Train the classifier; writes a checkpoint and a metrics log.
    Train {
        #[command(flatten)]
        common: Common,
        /// Directory holding the generated datasets.
        #[arg(long, default_value = "out")]
        data: PathBuf,
        /// Override [train].steps.
        #[arg(long)]
        steps: Option<u64>,
        /// Resume from an existing checkpoint (continues the step counter).
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Run an intervention suite against a trained checkpoint.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(value_enum)]
        suite: SuiteArg,
        /// Checkpoint file.
        #[arg(long, default_value = "out/model.ckpt")]
        checkpoint: PathBuf,
        /// Directory holding the generated datasets.
        #[arg(long, default_value = "out")]
        data: PathBuf,
        /// Zeroing selector or interchange target.
        #[arg(long)]
        target: Option<String>,
        /// Rule kind for the swap suite.
        #[arg(long, value_enum)]
        rule: Option<RuleArg>,
        /// Comma-separated layer list (default: all layers).
        #[arg(long, value_delimiter = ',')]
        layers: Option<Vec<usize>>,
        /// Examples per layer.
        #[arg(long)]
        samples: Option<usize>,
        /// Pin the manifest timestamp (for byte-reproducible outputs).
        #[arg(long)]
        stamp: Option<String>,
    },
    /// Collate every suite result in a directory into report.md.
    Report {
        /// Directory holding suite result files.
        #[arg(default_value = "out/results")]
        results: PathBuf,
        /// Report file path.
        #[arg(long, default_value = "out/results/report.md")]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SuiteArg {
    ZeroSufficiency,
    ZeroNecessity,
    Dilution,
    Iia,
    Swap,
}

#[derive(Clone, Copy, ValueEnum)]
enum RuleArg {
    Conditional,
    Universal,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            // Usage-class failures (bad flags/config) exit 2, runtime failures 1.
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(UsageError(msg.into()))
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenData {
            common,
            train,
            val,
            test,
            interchange,
        } => cmd_gen_data(&common, train, val, test, interchange),
        Command::Train {
            common,
            data,
            steps,
            resume,
        } => cmd_train(&common, &data, steps, resume.as_deref()),
        Command::Run {
            common,
            suite,
            checkpoint,
            data,
            target,
            rule,
            layers,
            samples,
            stamp,
        } => cmd_run(
            &common, suite, &checkpoint, &data, target, rule, layers, samples, stamp,
        ),
        Command::Report { results, out } => cmd_report(&results, &out),
    }
}

fn echo_config(common: &Common, cfg: &FileConfig) -> Result<()> {
    std::fs::create_dir_all(&common.out)?;
    let text = cfg.to_toml()?;
    println!("# effective config (seed {})\n{text}", common.seed);
    std::fs::write(common.out.join("effective-config.toml"), text)?;
    Ok(())
}

fn load_file_config(common: &Common) -> Result<FileConfig> {
    FileConfig::load(common.config.as_deref()).map_err(|e| usage(format!("{e:#}")))
}

fn cmd_gen_data(
    common: &Common,
    train: Option<usize>,
    val: Option<usize>,
    test: Option<usize>,
    interchange: Option<usize>,
) -> Result<()> {
    let mut cfg = load_file_config(common)?;
    if let Some(n) = train {
        cfg.data.train = n;
    }
    if let Some(n) = val {
        cfg.data.val = n;
    }
    if let Some(n) = test {
        cfg.data.test = n;
    }
    if let Some(n) = interchange {
        cfg.data.interchange_per_kind = n;
    }
    echo_config(common, &cfg)?;

    let gen_seed = derive_seed(common.seed, "datagen");
    let gen_cfg = cfg.gen_config(gen_seed);
    let generator = Generator::new(gen_cfg.clone()).map_err(|e| usage(e.to_string()))?;
    let entities = &generator.config().entities;
    let attributes = &generator.config().attributes;

    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(gen_seed);

    for (name, count) in [
        ("train", gen_cfg.train),
        ("val", gen_cfg.val),
        ("test", gen_cfg.test),
    ] {
        let examples = generator.generate_split(count, &mut rng)?;
        let path = common.out.join(format!("{name}.jsonl"));
        emit_labeled(&path, &examples, entities, attributes)?;
        println!("wrote {} ({count} examples)", path.display());
    }

    let per_kind = gen_cfg.interchange_per_kind;
    let files: [(&str, &[TargetKind]); 3] = [
        ("interchange_consequent", &[TargetKind::Consequent, TargetKind::Subject]),
        ("interchange_predicate", &[TargetKind::Predicate, TargetKind::Adjective]),
        (
            "interchange_punctuation",
            &[
                TargetKind::FirstSentence,
                TargetKind::FirstPeriod,
                TargetKind::SecondSentence,
                TargetKind::SecondPeriod,
            ],
        ),
    ];
    for (name, kinds) in files {
        let mut examples = Vec::new();
        for &kind in kinds {
            examples.extend(generator.generate_interchange_dataset(kind, per_kind, &mut rng)?);
        }
        let path = common.out.join(format!("{name}.jsonl"));
        emit_interchange(&path, &examples, entities, attributes)?;
        println!("wrote {} ({} examples)", path.display(), examples.len());
    }
    Ok(())
}

fn cmd_train(
    common: &Common,
    data: &Path,
    steps: Option<u64>,
    resume: Option<&Path>,
) -> Result<()> {
    let mut cfg = load_file_config(common)?;
    if let Some(s) = steps {
        cfg.train.steps = s;
    }
    echo_config(common, &cfg)?;

    let (header, train_set) = load_labeled(&data.join("train.jsonl"))
        .with_context(|| "loading train.jsonl (run gen-data first)")?;
    let (_, val_set) = load_labeled(&data.join("val.jsonl"))?;
    let tokenizer = header.tokenizer();

    let (mut model, start_steps) = match resume {
        Some(path) => {
            let ckpt = load_checkpoint(path)?;
            println!(
                "resuming from {} at step {}",
                path.display(),
                ckpt.trained_steps
            );
            (ckpt.model, ckpt.trained_steps)
        }
        None => {
            let mcfg = cfg.model_config(tokenizer.vocab_size());
            let model = TransformerModel::init(mcfg, derive_seed(common.seed, "model-init"))
                .map_err(|e| usage(e.to_string()))?;
            (model, 0)
        }
    };
    if model.config().vocab_size != tokenizer.vocab_size() {
        bail!(
            "checkpoint vocab {} does not match dataset vocab {}",
            model.config().vocab_size,
            tokenizer.vocab_size()
        );
    }

    let tcfg = cfg.train_config(derive_seed(common.seed, "train"));
    let outcome = train(&mut model, &train_set, &val_set, &tcfg)?;

    let mut log = String::new();
    for e in &outcome.trace {
        log.push_str(&serde_json::to_string(e)?);
        log.push('\n');
        if let Some(acc) = e.val_accuracy {
            println!(
                "step {:>6}  train_loss {:.4}  val_acc {:.4}",
                e.step + start_steps,
                e.train_loss,
                acc
            );
        }
    }
    std::fs::write(common.out.join("metrics.jsonl"), log)?;

    let ckpt_path = common.out.join("model.ckpt");
    save_checkpoint(&model, start_steps + outcome.final_step, &ckpt_path)?;
    println!(
        "best val acc {:.4} at step {}; checkpoint -> {}",
        outcome.best_val_accuracy,
        outcome.best_step + start_steps,
        ckpt_path.display()
    );

    let test_path = data.join("test.jsonl");
    if test_path.exists() {
        let (_, test_set) = load_labeled(&test_path)?;
        println!("test acc {:.4}", accuracy(&model, &test_set)?);
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_run(
    common: &Common,
    suite: SuiteArg,
    checkpoint: &Path,
    data: &Path,
    target: Option<String>,
    rule: Option<RuleArg>,
    layers: Option<Vec<usize>>,
    samples: Option<usize>,
    stamp: Option<String>,
) -> Result<()> {
    let cfg = load_file_config(common)?;
    let samples = samples.unwrap_or(cfg.run.samples);
    let ckpt = load_checkpoint(checkpoint)?;
    let model = ckpt.model;

    let (kind, target_name, dataset_file): (SuiteKind, String, &str) = match suite {
        SuiteArg::ZeroSufficiency | SuiteArg::ZeroNecessity => {
            let t = target.unwrap_or_else(|| "periods-and-question-mark".into());
            let k = if matches!(suite, SuiteArg::ZeroSufficiency) {
                SuiteKind::ZeroSufficiency
            } else {
                SuiteKind::ZeroNecessity
            };
            (k, t, "test.jsonl")
        }
        SuiteArg::Dilution => (SuiteKind::Dilution, "question-mark".into(), "test.jsonl"),
        SuiteArg::Iia => {
            let t = target.ok_or_else(|| {
                usage(format!(
                    "iia requires --target; valid targets: {}",
                    TargetKind::ALL.map(|k| k.as_str()).join(", ")
                ))
            })?;
            let kind: TargetKind = t.parse().map_err(|e| usage(format!("{e}")))?;
            let file = match kind {
                TargetKind::Consequent | TargetKind::Subject => "interchange_consequent.jsonl",
                TargetKind::Predicate | TargetKind::Adjective => "interchange_predicate.jsonl",
                _ => "interchange_punctuation.jsonl",
            };
            (SuiteKind::Iia(kind), t, file)
        }
        SuiteArg::Swap => {
            let r = rule.ok_or_else(|| usage("swap requires --rule (conditional|universal)"))?;
            let rk = match r {
                RuleArg::Conditional => RuleKind::Conditional,
                RuleArg::Universal => RuleKind::Universal,
            };
            (SuiteKind::SwapHeatmap(rk), rk.as_str().to_string(), "test.jsonl")
        }
    };

    let dataset_path = data.join(dataset_file);
    let timestamp = stamp.unwrap_or_else(|| {
        format!(
            "unix:{}",
            std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0)
        )
    });
    let manifest = RunManifest::new(
        kind.as_str(),
        &target_name,
        file_id(checkpoint)?,
        file_id(&dataset_path)?,
        derive_seed(common.seed, &format!("suite:{}", kind.as_str())),
        samples,
        layers,
        timestamp,
    );

    let output = match &kind {
        SuiteKind::Iia(_) => {
            let (_, examples) = load_interchange(&dataset_path)?;
            run_suite(&model, &SuiteData::Interchange(&examples), &kind, &manifest)?
        }
        _ => {
            let (_, examples) = load_labeled(&dataset_path)?;
            run_suite(&model, &SuiteData::Labeled(&examples), &kind, &manifest)?
        }
    };

    let results_dir = common.out.join("results");
    let stem = format!("{}__{}", kind.as_str(), target_name);
    let files = write_suite_files(&results_dir, &stem, &output)?;
    for f in &files {
        println!("wrote {}", f.display());
    }
    Ok(())
}

fn cmd_report(results: &Path, out: &Path) -> Result<()> {
    if !results.exists() {
        eprintln!("warning: results directory {} does not exist", results.display());
    }
    let report = if results.exists() {
        consolidate_report(results)?
    } else {
        "# patchlab experiment report\n\nNo suite results found in this directory.\n".to_string()
    };
    if report.contains("No suite results") {
        eprintln!("warning: no suite results found in {}", results.display());
    }
    if let Some(parent) = out.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(out, &report)?;
    println!("wrote {}", out.display());
    Ok(())
}
