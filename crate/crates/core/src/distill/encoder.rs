use serde::{Deserialize, Serialize};

use crate::mapper::tokenize;

/// Sparse feature vector: `(index, count)` pairs sorted by index, no
/// duplicate indices.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SparseFeatures {
    pub entries: Vec<(u32, f64)>,
}

impl SparseFeatures {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    /// Sorts and merges duplicate indices by summing.
    pub fn from_unsorted(mut raw: Vec<(u32, f64)>) -> Self {
        raw.sort_by_key(|e| e.0);
        let mut entries: Vec<(u32, f64)> = Vec::with_capacity(raw.len());
        for (i, v) in raw {
            match entries.last_mut() {
                Some(last) if last.0 == i => last.1 += v,
                _ => entries.push((i, v)),
            }
        }
        SparseFeatures { entries }
    }
}

/// Turns section text into a sparse feature vector of fixed dimension.
pub trait Encoder {
    fn dim(&self) -> usize;
    fn encode(&self, text: &str) -> SparseFeatures;
}

/// Hashed word n-grams over the first `max_tokens` tokens.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HashedNgramEncoder {
    /// Must be a power of two.
    pub feature_dim: usize,
    pub hash_seed: u64,
    pub ngram_orders: Vec<usize>,
    pub max_tokens: usize,
}

impl Default for HashedNgramEncoder {
    fn default() -> Self {
        HashedNgramEncoder { feature_dim: 1 << 18, hash_seed: 0x5eed, ngram_orders: vec![1, 2], max_tokens: 512 }
    }
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(state: u64, bytes: &[u8]) -> u64 {
    bytes.iter().fold(state, |h, &b| (h ^ b as u64).wrapping_mul(FNV_PRIME))
}

impl HashedNgramEncoder {
    fn bucket(&self, gram: &[String]) -> u32 {
        let mut h = fnv1a(FNV_OFFSET, &self.hash_seed.to_le_bytes());
        h = fnv1a(h, &[gram.len() as u8]);
        for w in gram {
            h = fnv1a(h, w.as_bytes());
            h = fnv1a(h, &[0x1f]);
        }
        // final avalanche so the low bits depend on every input byte
        h ^= h >> 33;
        h = h.wrapping_mul(0xff51_afd7_ed55_8ccd);
        h ^= h >> 33;
        (h % self.feature_dim as u64) as u32
    }

    pub fn tokens(&self, text: &str) -> Vec<String> {
        tokenize(text).into_iter().take(self.max_tokens).map(|t| t.text).collect()
    }
}

impl Encoder for HashedNgramEncoder {
    fn dim(&self) -> usize {
        self.feature_dim
    }

    fn encode(&self, text: &str) -> SparseFeatures {
        let tokens = self.tokens(text);
        let mut raw = Vec::new();
        for &n in &self.ngram_orders {
            if n == 0 || n > tokens.len() {
                continue;
            }
            for gram in tokens.windows(n) {
                raw.push((self.bucket(gram), 1.0));
            }
        }
        SparseFeatures::from_unsorted(raw)
    }
}
