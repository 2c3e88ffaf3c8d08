use cxrlabel::distill::{bce_loss, EncodedExample, Encoder, HashedNgramEncoder, TrainConfig, TrainedModel, Trainer};
use cxrlabel::taxonomy::NUM_CATEGORIES;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const WORDS: &[&str] = &[
    "no", "small", "left", "right", "pleural", "effusion", "pneumothorax", "opacity", "stable", "new", "mild",
    "edema", "nodule", "fracture", "rib", "heart", "size", "normal", "clear", "lungs",
];

pub fn small_encoder(dim: usize) -> HashedNgramEncoder {
    HashedNgramEncoder { feature_dim: dim, ..Default::default() }
}

pub fn random_text(rng: &mut ChaCha8Rng) -> String {
    let n = rng.gen_range(1..8);
    (0..n).map(|_| WORDS[rng.gen_range(0..WORDS.len())]).collect::<Vec<_>>().join(" ")
}

pub fn random_examples(rng: &mut ChaCha8Rng, enc: &HashedNgramEncoder, n: usize) -> Vec<EncodedExample> {
    (0..n)
        .map(|_| EncodedExample {
            features: enc.encode(&random_text(rng)),
            targets: std::array::from_fn(|_| if rng.gen_bool(0.4) { 1.0 } else { 0.0 }),
        })
        .collect()
}

pub fn mean_loss(model: &TrainedModel, examples: &[EncodedExample]) -> f64 {
    examples.iter().map(|e| bce_loss(&model.logits(&e.features), &e.targets)).sum::<f64>() / examples.len() as f64
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale < 1e-9 {
        (a - b).abs()
    } else {
        (a - b).abs() / scale
    }
}

/// Worst relative error between the trainer's gradient and central
/// differences of the batch loss, over one random draw.
pub fn gradient_check(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let enc = small_encoder(128);
    let n = rng.gen_range(1..6);
    let examples = random_examples(&mut rng, &enc, n);
    let mut model = TrainedModel::zeros(enc.clone());
    for w in model.weights.iter_mut() {
        *w = rng.gen_range(-1.5..1.5);
    }
    for b in model.bias.iter_mut() {
        *b = rng.gen_range(-1.5..1.5);
    }
    let config = TrainConfig { batch_size: examples.len(), ..Default::default() };
    let mut trainer = Trainer::new(&examples, &config, &enc).unwrap();
    trainer.warm_start(&model).unwrap();
    let batch: Vec<usize> = (0..examples.len()).collect();
    let (loss, gw, gb) = trainer.gradient(&batch);
    assert!((loss - mean_loss(&model, &examples)).abs() < 1e-12);

    let h = 1e-5;
    let mut worst: f64 = 0.0;
    let mut features: Vec<usize> =
        examples.iter().flat_map(|e| e.features.entries.iter().map(|&(f, _)| f as usize)).collect();
    features.sort_unstable();
    features.dedup();
    for &f in &features {
        for c in 0..NUM_CATEGORIES {
            let k = f * NUM_CATEGORIES + c;
            let w0 = model.weights[k];
            model.weights[k] = w0 + h;
            let up = mean_loss(&model, &examples);
            model.weights[k] = w0 - h;
            let down = mean_loss(&model, &examples);
            model.weights[k] = w0;
            worst = worst.max(rel_err(gw[k], (up - down) / (2.0 * h)));
        }
    }
    for c in 0..NUM_CATEGORIES {
        let b0 = model.bias[c];
        model.bias[c] = b0 + h;
        let up = mean_loss(&model, &examples);
        model.bias[c] = b0 - h;
        let down = mean_loss(&model, &examples);
        model.bias[c] = b0;
        worst = worst.max(rel_err(gb[c], (up - down) / (2.0 * h)));
    }
    // features outside the batch get exactly zero gradient
    for (f, row) in gw.chunks(NUM_CATEGORIES).enumerate() {
        if features.binary_search(&f).is_err() {
            assert!(row.iter().all(|&g| g == 0.0));
        }
    }
    worst
}
