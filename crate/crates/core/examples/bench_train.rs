use patchlab_core::datagen::{GenConfig, Generator};
use patchlab_core::model::{classify, train, ModelConfig, TrainConfig, TransformerModel};
use patchlab_core::numerics::AdamConfig;
use patchlab_core::logic::Label;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

fn confusion(model: &TransformerModel<f32>, data: &[patchlab_core::LabeledExample]) -> [[usize;3];3] {
    let mut m = [[0usize;3];3];
    for ex in data {
        let l = classify(&model.logits(&ex.prompt.token_ids).unwrap()).unwrap();
        m[ex.label.class_index()][l.class_index()] += 1;
    }
    m
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let lr: f64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(3e-4);
    let easy: bool = args.get(2).map(|s| s == "easy").unwrap_or(false);
    let steps: u64 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(600);

    let mut gcfg = GenConfig::default();
    if easy {
        gcfg.rules_per_theory = 1;
        gcfg.distractors_min = 1;
        gcfg.distractors_max = 2;
    }
    let gen = Generator::new(gcfg).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let data = gen.generate_split(20000, &mut rng).unwrap();
    let mut vrng = ChaCha8Rng::seed_from_u64(2);
    let val = gen.generate_split(600, &mut vrng).unwrap();

    let cfg = ModelConfig { vocab_size: gen.tokenizer().vocab_size(), ..ModelConfig::default() };
    let mut model = TransformerModel::<f32>::init(cfg, 0).unwrap();
    let tcfg = TrainConfig {
        steps, batch_size: 32, eval_interval: 100, seed: 0,
        optimizer: AdamConfig { lr, ..AdamConfig::default() },
        ..TrainConfig::default()
    };
    let t0 = Instant::now();
    let out = train(&mut model, &data, &val, &tcfg).unwrap();
    for e in out.trace.iter().filter(|e| e.val_accuracy.is_some()) {
        println!("lr={} easy={} step {:5}  loss {:.4}  val {:.4}", lr, easy, e.step, e.train_loss, e.val_accuracy.unwrap());
    }
    println!("best {:.4} at {} ({:?})", out.best_val_accuracy, out.best_step, t0.elapsed());
    let m = confusion(&model, &val);
    println!("confusion (rows=truth T/F/U, cols=pred):");
    for (i, name) in [Label::True, Label::False, Label::Unknown].iter().enumerate() {
        println!("  {:?}: {:?}", name, m[i]);
    }
}
