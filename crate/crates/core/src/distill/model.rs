use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::SectionChoice;
use crate::taxonomy::{Category, LabelVector, PresenceLabel, NUM_CATEGORIES};

use super::encoder::{Encoder, HashedNgramEncoder, SparseFeatures};
use super::loss::sigmoid;
use super::DistillError;

pub const MAGIC: &[u8; 6] = b"CXGPT1";
pub const FORMAT_VERSION: u32 = 1;
pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelHeader {
    pub format_version: u32,
    pub feature_dim: usize,
    pub hash_seed: u64,
    pub ngram_orders: Vec<usize>,
    pub max_tokens: usize,
    pub categories: Vec<String>,
    pub manifest_hash: String,
}

/// Linear heads over hashed n-gram features. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub encoder: HashedNgramEncoder,
    pub manifest_hash: String,
    /// Feature-major: the weight of feature `f` for category `c` is at
    /// `f * 13 + c`.
    pub weights: Vec<f64>,
    pub bias: [f64; NUM_CATEGORIES],
}

fn canonical_categories() -> Vec<String> {
    Category::ALL.iter().map(|c| c.key().to_string()).collect()
}

impl TrainedModel {
    pub fn zeros(encoder: HashedNgramEncoder) -> Self {
        let weights = vec![0.0; encoder.feature_dim * NUM_CATEGORIES];
        TrainedModel { encoder, manifest_hash: String::new(), weights, bias: [0.0; NUM_CATEGORIES] }
    }

    pub fn header(&self) -> ModelHeader {
        ModelHeader {
            format_version: FORMAT_VERSION,
            feature_dim: self.encoder.feature_dim,
            hash_seed: self.encoder.hash_seed,
            ngram_orders: self.encoder.ngram_orders.clone(),
            max_tokens: self.encoder.max_tokens,
            categories: canonical_categories(),
            manifest_hash: self.manifest_hash.clone(),
        }
    }

    pub fn weight(&self, feature: usize, c: Category) -> f64 {
        self.weights[feature * NUM_CATEGORIES + c.index()]
    }

    pub fn logits(&self, x: &SparseFeatures) -> [f64; NUM_CATEGORIES] {
        let mut z = self.bias;
        for &(f, v) in &x.entries {
            let row = &self.weights[f as usize * NUM_CATEGORIES..(f as usize + 1) * NUM_CATEGORIES];
            for c in 0..NUM_CATEGORIES {
                z[c] += v * row[c];
            }
        }
        z
    }

    pub fn probabilities(&self, text: &str) -> [f64; NUM_CATEGORIES] {
        self.logits(&self.encoder.encode(text)).map(sigmoid)
    }

    pub fn write(&self, w: impl Write) -> Result<(), DistillError> {
        let mut w = BufWriter::new(w);
        let header = serde_json::to_vec(&self.header()).expect("header serializes");
        w.write_all(MAGIC)?;
        w.write_all(&(header.len() as u64).to_le_bytes())?;
        w.write_all(&header)?;
        for c in 0..NUM_CATEGORIES {
            for f in 0..self.encoder.feature_dim {
                w.write_all(&self.weights[f * NUM_CATEGORIES + c].to_le_bytes())?;
            }
        }
        for b in self.bias {
            w.write_all(&b.to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<(), DistillError> {
        self.write(std::fs::File::create(path)?)
    }

    pub fn read(mut r: impl Read) -> Result<TrainedModel, DistillError> {
        let bad = |m: &str| DistillError::ModelFormat(m.to_string());
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        if bytes.len() < MAGIC.len() + 8 || &bytes[..MAGIC.len()] != MAGIC {
            return Err(bad("missing CXGPT1 magic"));
        }
        let mut at = MAGIC.len();
        let hlen = u64::from_le_bytes(bytes[at..at + 8].try_into().unwrap()) as usize;
        at += 8;
        let hbytes = bytes.get(at..at + hlen).ok_or_else(|| bad("truncated header"))?;
        let header: ModelHeader =
            serde_json::from_slice(hbytes).map_err(|e| DistillError::ModelFormat(format!("header: {e}")))?;
        at += hlen;
        if header.format_version != FORMAT_VERSION {
            return Err(DistillError::ModelFormat(format!("unsupported format version {}", header.format_version)));
        }
        if header.categories != canonical_categories() {
            return Err(bad("category list differs from the canonical 13"));
        }
        if header.feature_dim == 0 {
            return Err(bad("feature_dim is zero"));
        }
        let expected = (header.feature_dim * NUM_CATEGORIES + NUM_CATEGORIES) * 8;
        if bytes.len() - at != expected {
            return Err(DistillError::ModelFormat(format!(
                "expected {expected} bytes of parameters for feature_dim {}, found {}",
                header.feature_dim,
                bytes.len() - at
            )));
        }
        let mut floats = bytes[at..].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap()));
        let dim = header.feature_dim;
        let mut weights = vec![0.0; dim * NUM_CATEGORIES];
        for c in 0..NUM_CATEGORIES {
            for f in 0..dim {
                weights[f * NUM_CATEGORIES + c] = floats.next().unwrap();
            }
        }
        let mut bias = [0.0; NUM_CATEGORIES];
        for b in &mut bias {
            *b = floats.next().unwrap();
        }
        Ok(TrainedModel {
            encoder: HashedNgramEncoder {
                feature_dim: dim,
                hash_seed: header.hash_seed,
                ngram_orders: header.ngram_orders,
                max_tokens: header.max_tokens,
            },
            manifest_hash: header.manifest_hash,
            weights,
            bias,
        })
    }

    pub fn load(path: &Path) -> Result<TrainedModel, DistillError> {
        Self::read(std::fs::File::open(path)?)
    }
}

/// Probabilities and labels; positive iff probability > threshold.
pub fn predict(
    model: &TrainedModel,
    section_text: &str,
    threshold: f64,
) -> ([f64; NUM_CATEGORIES], [PresenceLabel; NUM_CATEGORIES]) {
    let p = model.probabilities(section_text);
    (p, p.map(|x| PresenceLabel::from_bool(x > threshold)))
}

pub fn predict_vector(
    model: &TrainedModel,
    study_id: &str,
    section: SectionChoice,
    section_text: &str,
    threshold: f64,
) -> LabelVector {
    LabelVector::binary(study_id, section, predict(model, section_text, threshold).1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> HashedNgramEncoder {
        HashedNgramEncoder { feature_dim: 64, ..Default::default() }
    }

    #[test]
    fn zero_model_is_all_negative() {
        let m = TrainedModel::zeros(small());
        let (p, l) = predict(&m, "large right pneumothorax", DEFAULT_THRESHOLD);
        assert!(p.iter().all(|&x| x == 0.5));
        assert!(l.iter().all(|x| !x.is_positive()));
    }

    #[test]
    fn round_trip_and_row_major_layout() {
        let mut m = TrainedModel::zeros(small());
        for (i, w) in m.weights.iter_mut().enumerate() {
            *w = (i as f64).sin();
        }
        m.bias[2] = -1.25;
        m.manifest_hash = "abc".into();
        let mut buf = Vec::new();
        m.write(&mut buf).unwrap();
        assert_eq!(&buf[..6], b"CXGPT1");
        let back = TrainedModel::read(buf.as_slice()).unwrap();
        assert_eq!(back, m);
        // first float after the header is category 0, feature 0; the next is feature 1
        let hlen = u64::from_le_bytes(buf[6..14].try_into().unwrap()) as usize;
        let at = 14 + hlen;
        let second = f64::from_le_bytes(buf[at + 8..at + 16].try_into().unwrap());
        assert_eq!(second, m.weight(1, Category::Atelectasis));
    }

    #[test]
    fn rejects_bad_files() {
        assert!(matches!(TrainedModel::read(&b"NOPE"[..]), Err(DistillError::ModelFormat(_))));
        let m = TrainedModel::zeros(small());
        let mut buf = Vec::new();
        m.write(&mut buf).unwrap();
        buf.pop();
        assert!(matches!(TrainedModel::read(buf.as_slice()), Err(DistillError::ModelFormat(_))));
    }
}
