use std::hash::Hasher;

use fnv::FnvHasher;

use super::{EmbedError, Embedder, EmbeddingVector, DEFAULT_DIM};

/// English and French function words dropped before feature extraction.
const STOPWORDS: &[&str] = &[
    "a", "an", "and", "are", "as", "at", "be", "by", "can", "do", "does", "for", "from", "how",
    "i", "in", "is", "it", "my", "of", "on", "or", "the", "this", "to", "what", "where", "with",
    "you", "au", "aux", "ce", "comment", "dans", "de", "des", "du", "en", "est", "et", "je", "la",
    "le", "les", "ou", "par", "pour", "que", "qui", "sur", "un", "une",
];

/// Deterministic feature-hashing embedder over lowercase unigrams and
/// bigrams with signed buckets. Text with no content words maps to `e_1`.
#[derive(Debug, Clone)]
pub struct HashingEmbedder {
    dim: usize,
    id: String,
}

impl Default for HashingEmbedder {
    fn default() -> Self {
        Self::new(DEFAULT_DIM)
    }
}

impl HashingEmbedder {
    pub fn new(dim: usize) -> Self {
        assert!(dim >= 2, "dimension must be at least 2");
        Self {
            dim,
            id: format!("hashing-v1-d{dim}"),
        }
    }

    pub fn tokens(text: &str) -> Vec<String> {
        text.to_lowercase()
            .split(|c: char| !c.is_alphanumeric())
            .filter(|t| !t.is_empty() && !STOPWORDS.contains(t))
            .map(str::to_string)
            .collect()
    }

    fn features(text: &str) -> Vec<String> {
        let tokens = Self::tokens(text);
        let bigrams = tokens.windows(2).map(|w| format!("{} {}", w[0], w[1]));
        tokens.iter().cloned().chain(bigrams).collect()
    }

    fn embed_one(&self, text: &str) -> EmbeddingVector {
        let mut acc = vec![0.0f32; self.dim];
        for feature in Self::features(text) {
            let mut hasher = FnvHasher::default();
            hasher.write(feature.as_bytes());
            let h = hasher.finish();
            let bucket = (h % self.dim as u64) as usize;
            let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
            acc[bucket] += sign;
        }
        // Colliding features with opposite signs can cancel to zero.
        EmbeddingVector::new(acc).unwrap_or_else(|_| EmbeddingVector::basis(self.dim, 0))
    }
}

impl Embedder for HashingEmbedder {
    fn id(&self) -> &str {
        &self.id
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        Ok(texts.iter().map(|t| self.embed_one(t)).collect())
    }
}
