use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{CorpusRecord, SectionChoice};
use crate::evalkit::evaluate;
use crate::taxonomy::{CategorySubset, LabelVector, UncertainPolicy};

use super::encoder::{Encoder, HashedNgramEncoder};
use super::model::{predict_vector, TrainedModel};
use super::train::{build_examples, train, EncodedExample, TrainConfig};
use super::DistillError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub size: usize,
    pub section: SectionChoice,
    pub macro_f1: f64,
}

/// The first `size` indices of a seeded permutation of `0..n`, in
/// ascending order. Subsets for one seed are nested, and `size == n`
/// selects everything in the original order.
pub fn subset_indices(n: usize, size: usize, seed: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ 0x00c0_ffee));
    let mut chosen = idx[..size.min(n)].to_vec();
    chosen.sort_unstable();
    chosen
}

/// Predicted labels for every gold row, using the gold corpus text.
pub fn predict_labels(
    model: &TrainedModel,
    gold_corpus: &[CorpusRecord],
    gold: &[LabelVector],
    threshold: f64,
) -> Result<Vec<LabelVector>, DistillError> {
    let by_id: HashMap<&str, &CorpusRecord> = gold_corpus.iter().map(|r| (r.study_id.as_str(), r)).collect();
    gold.iter()
        .map(|g| {
            let text = by_id
                .get(g.study_id.as_str())
                .and_then(|r| r.section(g.section))
                .ok_or_else(|| DistillError::MissingText(format!("{}/{}", g.study_id, g.section)))?;
            Ok(predict_vector(model, &g.study_id, g.section, text, threshold))
        })
        .collect()
}

/// Trains on a seeded subset of each size and scores macro-F1 on the gold
/// set, once per section present in the gold labels.
#[allow(clippy::too_many_arguments)]
pub fn learning_curve(
    train_corpus: &[CorpusRecord],
    train_labels: &[LabelVector],
    sizes: &[usize],
    gold_corpus: &[CorpusRecord],
    gold_labels: &[LabelVector],
    config: &TrainConfig,
    encoder: &HashedNgramEncoder,
    subset: CategorySubset,
) -> Result<Vec<CurvePoint>, DistillError> {
    if sizes.windows(2).any(|w| w[0] > w[1]) {
        return Err(DistillError::InvalidConfig("sizes must be sorted ascending".into()));
    }
    if let Some(&s) = sizes.iter().find(|&&s| s == 0 || s > train_labels.len()) {
        return Err(DistillError::InvalidConfig(format!(
            "size {s} outside 1..={} labeled training reports",
            train_labels.len()
        )));
    }
    let all: Vec<EncodedExample> = build_examples(train_labels, train_corpus, encoder as &dyn Encoder)?;
    let sections: Vec<SectionChoice> =
        SectionChoice::BOTH.into_iter().filter(|s| gold_labels.iter().any(|g| g.section == *s)).collect();
    let mut out = Vec::new();
    for &size in sizes {
        let picked: Vec<EncodedExample> =
            subset_indices(all.len(), size, config.seed).into_iter().map(|i| all[i].clone()).collect();
        let (model, _) = train(&picked, config, encoder)?;
        let pred = predict_labels(&model, gold_corpus, gold_labels, config.threshold)?;
        for &section in &sections {
            let r = evaluate(&pred, gold_labels, section, subset, UncertainPolicy::MergeUncertainAsPositive)?;
            out.push(CurvePoint { size, section, macro_f1: r.macro_.f1 });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subsets_are_nested_and_sorted() {
        let a = subset_indices(100, 10, 7);
        let b = subset_indices(100, 40, 7);
        assert_eq!(a.len(), 10);
        assert!(a.iter().all(|i| b.contains(i)));
        assert!(b.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(subset_indices(5, 5, 1), [0, 1, 2, 3, 4]);
        assert_ne!(subset_indices(100, 10, 7), subset_indices(100, 10, 8));
    }
}
