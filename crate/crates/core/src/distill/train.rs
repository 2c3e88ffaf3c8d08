use std::collections::HashMap;
use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::CorpusRecord;
use crate::taxonomy::{LabelVector, NUM_CATEGORIES};

use super::encoder::{Encoder, HashedNgramEncoder, SparseFeatures};
use super::loss::{bce_grad, bce_loss};
use super::model::{TrainedModel, DEFAULT_THRESHOLD};
use super::DistillError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdamWConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        AdamWConfig { beta1: 0.9, beta2: 0.999, eps: 1e-8, weight_decay: 0.01 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub steps: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub lr_halving_interval: usize,
    pub max_tokens: usize,
    pub seed: u64,
    pub warm_start: Option<PathBuf>,
    pub threshold: f64,
    pub log_every: usize,
    pub optimizer: AdamWConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            steps: 10_000,
            learning_rate: 5e-5,
            batch_size: 32,
            lr_halving_interval: 4_000,
            max_tokens: 512,
            seed: 42,
            warm_start: None,
            threshold: DEFAULT_THRESHOLD,
            log_every: 100,
            optimizer: AdamWConfig::default(),
        }
    }
}

impl TrainConfig {
    /// Same schedule shape over a different number of steps: the halving
    /// interval keeps its fraction of the run.
    pub fn scaled_to(&self, steps: usize) -> TrainConfig {
        let interval = ((self.lr_halving_interval as f64) * steps as f64 / self.steps as f64).round() as usize;
        TrainConfig { steps, lr_halving_interval: interval.max(1), ..self.clone() }
    }

    pub fn validate(&self) -> Result<(), DistillError> {
        let bad = |m: &str| Err(DistillError::InvalidConfig(m.to_string()));
        if self.steps == 0 {
            return bad("steps must be > 0");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be > 0");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be >= 1");
        }
        if self.lr_halving_interval == 0 {
            return bad("lr_halving_interval must be >= 1");
        }
        if self.log_every == 0 {
            return bad("log_every must be >= 1");
        }
        if self.max_tokens == 0 {
            return bad("max_tokens must be >= 1");
        }
        Ok(())
    }

    /// `learning_rate * 2^-floor(step / lr_halving_interval)`.
    pub fn lr_at(&self, step: usize) -> f64 {
        let halvings = (step / self.lr_halving_interval.max(1)).min(1074) as i32;
        self.learning_rate * 0.5f64.powi(halvings)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodedExample {
    pub features: SparseFeatures,
    pub targets: [f64; NUM_CATEGORIES],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub step: usize,
    pub lr: f64,
    pub loss: f64,
}

/// Joins binary labels to the text of the labeled section and encodes it.
pub fn build_examples(
    labels: &[LabelVector],
    corpus: &[CorpusRecord],
    encoder: &dyn Encoder,
) -> Result<Vec<EncodedExample>, DistillError> {
    let by_id: HashMap<&str, &CorpusRecord> = corpus.iter().map(|r| (r.study_id.as_str(), r)).collect();
    labels
        .iter()
        .map(|l| {
            let targets = l.targets()?;
            let text = by_id
                .get(l.study_id.as_str())
                .and_then(|r| r.section(l.section))
                .ok_or_else(|| DistillError::MissingText(format!("{}/{}", l.study_id, l.section)))?;
            Ok(EncodedExample { features: encoder.encode(text), targets })
        })
        .collect()
}

/// Hex SHA-256 over the training config and the encoded examples.
pub fn manifest_hash(config: &TrainConfig, encoder: &HashedNgramEncoder, examples: &[EncodedExample]) -> String {
    let mut h = Sha256::new();
    h.update(serde_json::to_vec(config).expect("config serializes"));
    h.update(serde_json::to_vec(encoder).expect("encoder serializes"));
    for ex in examples {
        h.update((ex.features.entries.len() as u64).to_le_bytes());
        for &(i, v) in &ex.features.entries {
            h.update(i.to_le_bytes());
            h.update(v.to_le_bytes());
        }
        for t in ex.targets {
            h.update(t.to_le_bytes());
        }
    }
    hex::encode(&h.finalize()[..])
}

const NONE: u32 = u32::MAX;

/// Mini-batch AdamW over the linear heads.
///
/// Only features that have appeared in a batch (or carry warm-start
/// weights) are stored. Every other parameter has zero weight, zero moments
/// and zero gradient, and an AdamW step leaves such a parameter at zero, so
/// skipping them gives the same result as updating the full matrix.
pub struct Trainer<'a> {
    examples: &'a [EncodedExample],
    config: TrainConfig,
    encoder: HashedNgramEncoder,
    slot_of: Vec<u32>,
    features: Vec<u32>,
    w: Vec<f64>,
    m: Vec<f64>,
    v: Vec<f64>,
    grad: Vec<f64>,
    bias: [f64; NUM_CATEGORIES],
    bias_grad: [f64; NUM_CATEGORIES],
    bias_m: [f64; NUM_CATEGORIES],
    bias_v: [f64; NUM_CATEGORIES],
    step: usize,
    rng: ChaCha8Rng,
    order: Vec<usize>,
    cursor: usize,
}

impl<'a> Trainer<'a> {
    pub fn new(
        examples: &'a [EncodedExample],
        config: &TrainConfig,
        encoder: &HashedNgramEncoder,
    ) -> Result<Self, DistillError> {
        config.validate()?;
        if examples.is_empty() {
            return Err(DistillError::EmptyTrainingSet);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut order: Vec<usize> = (0..examples.len()).collect();
        order.shuffle(&mut rng);
        let mut t = Trainer {
            examples,
            config: config.clone(),
            encoder: encoder.clone(),
            slot_of: vec![NONE; encoder.feature_dim],
            features: Vec::new(),
            w: Vec::new(),
            m: Vec::new(),
            v: Vec::new(),
            grad: Vec::new(),
            bias: [0.0; NUM_CATEGORIES],
            bias_grad: [0.0; NUM_CATEGORIES],
            bias_m: [0.0; NUM_CATEGORIES],
            bias_v: [0.0; NUM_CATEGORIES],
            step: 0,
            rng,
            order,
            cursor: 0,
        };
        if let Some(path) = &config.warm_start {
            let prior = TrainedModel::load(path)?;
            t.warm_start(&prior)?;
        }
        Ok(t)
    }

    /// Start from another model's weights; optimizer moments start at zero.
    pub fn warm_start(&mut self, prior: &TrainedModel) -> Result<(), DistillError> {
        if prior.encoder != self.encoder {
            return Err(DistillError::ModelFormat(format!(
                "warm-start model encoder {:?} does not match {:?}",
                prior.encoder, self.encoder
            )));
        }
        self.bias = prior.bias;
        for f in 0..self.encoder.feature_dim {
            let row = &prior.weights[f * NUM_CATEGORIES..(f + 1) * NUM_CATEGORIES];
            if row.iter().any(|&x| x != 0.0) {
                let s = self.slot(f as u32);
                self.w[s * NUM_CATEGORIES..(s + 1) * NUM_CATEGORIES].copy_from_slice(row);
            }
        }
        Ok(())
    }

    fn slot(&mut self, feature: u32) -> usize {
        let s = self.slot_of[feature as usize];
        if s != NONE {
            return s as usize;
        }
        let s = self.features.len();
        self.slot_of[feature as usize] = s as u32;
        self.features.push(feature);
        let n = (s + 1) * NUM_CATEGORIES;
        self.w.resize(n, 0.0);
        self.m.resize(n, 0.0);
        self.v.resize(n, 0.0);
        self.grad.resize(n, 0.0);
        s
    }

    fn logits(&self, x: &SparseFeatures) -> [f64; NUM_CATEGORIES] {
        let mut z = self.bias;
        for &(f, val) in &x.entries {
            let s = self.slot_of[f as usize];
            if s == NONE {
                continue;
            }
            let row = &self.w[s as usize * NUM_CATEGORIES..(s as usize + 1) * NUM_CATEGORIES];
            for c in 0..NUM_CATEGORIES {
                z[c] += val * row[c];
            }
        }
        z
    }

    fn next_batch(&mut self) -> Vec<usize> {
        let mut batch = Vec::with_capacity(self.config.batch_size);
        while batch.len() < self.config.batch_size {
            if self.cursor == self.order.len() {
                self.order.shuffle(&mut self.rng);
                self.cursor = 0;
            }
            batch.push(self.order[self.cursor]);
            self.cursor += 1;
        }
        batch
    }

    pub fn steps_done(&self) -> usize {
        self.step
    }

    pub fn current_lr(&self) -> f64 {
        self.config.lr_at(self.step)
    }

    /// Fills `self.grad` and `self.bias_grad` with the gradient of the mean
    /// batch loss and returns that loss.
    fn accumulate(&mut self, batch: &[usize]) -> f64 {
        let examples = self.examples;
        for &i in batch {
            for &(f, _) in &examples[i].features.entries {
                self.slot(f);
            }
        }
        self.grad.iter_mut().for_each(|g| *g = 0.0);
        self.bias_grad = [0.0; NUM_CATEGORIES];
        let scale = 1.0 / batch.len() as f64;
        let mut loss = 0.0;
        for &i in batch {
            let ex = &examples[i];
            let z = self.logits(&ex.features);
            loss += bce_loss(&z, &ex.targets);
            let dz = bce_grad(&z, &ex.targets).map(|g| g * scale);
            for c in 0..NUM_CATEGORIES {
                self.bias_grad[c] += dz[c];
            }
            for &(f, val) in &ex.features.entries {
                let s = self.slot_of[f as usize] as usize;
                let g = &mut self.grad[s * NUM_CATEGORIES..(s + 1) * NUM_CATEGORIES];
                for c in 0..NUM_CATEGORIES {
                    g[c] += val * dz[c];
                }
            }
        }
        loss * scale
    }

    /// Mean loss over the given examples and its gradient at the current
    /// parameters, as dense feature-major weight gradients plus bias
    /// gradients. Parameters are not changed.
    pub fn gradient(&mut self, batch: &[usize]) -> (f64, Vec<f64>, [f64; NUM_CATEGORIES]) {
        let loss = self.accumulate(batch);
        let mut dense = vec![0.0; self.encoder.feature_dim * NUM_CATEGORIES];
        for (s, &f) in self.features.iter().enumerate() {
            let f = f as usize;
            dense[f * NUM_CATEGORIES..(f + 1) * NUM_CATEGORIES]
                .copy_from_slice(&self.grad[s * NUM_CATEGORIES..(s + 1) * NUM_CATEGORIES]);
        }
        (loss, dense, self.bias_grad)
    }

    /// One mini-batch update. Returns the batch loss before the update.
    pub fn step(&mut self) -> f64 {
        let batch = self.next_batch();
        let loss = self.accumulate(&batch);
        let lr = self.config.lr_at(self.step);
        self.step += 1;
        let o = self.config.optimizer;
        let bc1 = 1.0 - o.beta1.powi(self.step as i32);
        let bc2 = 1.0 - o.beta2.powi(self.step as i32);
        let update = |w: &mut f64, m: &mut f64, v: &mut f64, g: f64| {
            *w -= lr * o.weight_decay * *w;
            *m = o.beta1 * *m + (1.0 - o.beta1) * g;
            *v = o.beta2 * *v + (1.0 - o.beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *w -= lr * m_hat / (v_hat.sqrt() + o.eps);
        };
        for k in 0..self.w.len() {
            update(&mut self.w[k], &mut self.m[k], &mut self.v[k], self.grad[k]);
        }
        for c in 0..NUM_CATEGORIES {
            update(&mut self.bias[c], &mut self.bias_m[c], &mut self.bias_v[c], self.bias_grad[c]);
        }
        loss
    }

    /// Mean loss over every training example.
    pub fn full_loss(&self) -> f64 {
        self.examples.iter().map(|ex| bce_loss(&self.logits(&ex.features), &ex.targets)).sum::<f64>()
            / self.examples.len() as f64
    }

    pub fn model(&self) -> TrainedModel {
        let mut model = TrainedModel::zeros(self.encoder.clone());
        for (s, &f) in self.features.iter().enumerate() {
            let f = f as usize;
            model.weights[f * NUM_CATEGORIES..(f + 1) * NUM_CATEGORIES]
                .copy_from_slice(&self.w[s * NUM_CATEGORIES..(s + 1) * NUM_CATEGORIES]);
        }
        model.bias = self.bias;
        model.manifest_hash = manifest_hash(&self.config, &self.encoder, self.examples);
        model
    }
}

/// Runs exactly `config.steps` updates, logging the batch loss every
/// `config.log_every` steps and at the last step.
pub fn train(
    examples: &[EncodedExample],
    config: &TrainConfig,
    encoder: &HashedNgramEncoder,
) -> Result<(TrainedModel, Vec<LogRecord>), DistillError> {
    let mut trainer = Trainer::new(examples, config, encoder)?;
    let mut log = Vec::new();
    for s in 0..config.steps {
        let lr = trainer.current_lr();
        let loss = trainer.step();
        if s % config.log_every == 0 || s + 1 == config.steps {
            log.push(LogRecord { step: s, lr, loss });
        }
    }
    Ok((trainer.model(), log))
}

/// Number of updates until the full-data loss drops to `target`, checked
/// every `check_every` steps; `None` if `config.steps` runs out first.
pub fn steps_to_loss(
    examples: &[EncodedExample],
    config: &TrainConfig,
    encoder: &HashedNgramEncoder,
    target: f64,
    check_every: usize,
) -> Result<Option<usize>, DistillError> {
    let mut trainer = Trainer::new(examples, config, encoder)?;
    let check_every = check_every.max(1);
    if trainer.full_loss() <= target {
        return Ok(Some(0));
    }
    while trainer.steps_done() < config.steps {
        trainer.step();
        if trainer.steps_done() % check_every == 0 && trainer.full_loss() <= target {
            return Ok(Some(trainer.steps_done()));
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn enc() -> HashedNgramEncoder {
        HashedNgramEncoder { feature_dim: 1 << 10, ..Default::default() }
    }

    #[test]
    fn schedule_halves() {
        let c = TrainConfig::default();
        assert_eq!(c.lr_at(0), 5e-5);
        assert_eq!(c.lr_at(3999), 5e-5);
        assert_eq!(c.lr_at(4000), 2.5e-5);
        assert_eq!(c.lr_at(8000), 1.25e-5);
        let s = c.scaled_to(2000);
        assert_eq!((s.steps, s.lr_halving_interval), (2000, 800));
    }

    #[test]
    fn invalid_configs_rejected() {
        let ex = vec![EncodedExample { features: enc().encode("x"), targets: [0.0; NUM_CATEGORIES] }];
        for c in [
            TrainConfig { steps: 0, ..Default::default() },
            TrainConfig { batch_size: 0, ..Default::default() },
            TrainConfig { learning_rate: 0.0, ..Default::default() },
        ] {
            assert!(matches!(train(&ex, &c, &enc()), Err(DistillError::InvalidConfig(_))));
        }
        assert!(matches!(train(&[], &TrainConfig::default(), &enc()), Err(DistillError::EmptyTrainingSet)));
    }

    #[test]
    fn log_cadence() {
        let ex = vec![EncodedExample { features: enc().encode("x y"), targets: [1.0; NUM_CATEGORIES] }];
        let cfg = TrainConfig { steps: 250, batch_size: 1, ..Default::default() };
        let (_, log) = train(&ex, &cfg, &enc()).unwrap();
        assert_eq!(log.iter().map(|r| r.step).collect::<Vec<_>>(), [0, 100, 200, 249]);
        assert!(log.iter().all(|r| r.lr == 5e-5));
    }
}
