//! Text embeddings for node descriptions, edge actions and queries.

mod hashing;
mod remote;
mod store;

pub use hashing::HashingEmbedder;
pub use remote::{RemoteEmbedder, RemoteEmbedderConfig};
pub use store::{embed_graph, EdgeText, EmbeddingStore, GraphEmbeddings};

use thiserror::Error;

pub const DEFAULT_DIM: usize = 384;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EmbedError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("vector has non-finite component at {0}")]
    NonFinite(usize),
    #[error("vector has zero norm")]
    ZeroNorm,
    #[error("embedding service transport error: {0}")]
    Transport(String),
    #[error("embedding service returned status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("embedding service protocol error: {0}")]
    Protocol(String),
    #[error("embedding cache error: {0}")]
    Cache(String),
    #[error("configuration error: {0}")]
    Config(String),
}

impl EmbedError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, EmbedError::Transport(_) | EmbedError::Status { .. })
    }
}

/// Unit-length embedding. Construction normalizes; every value ever handed
/// out has L2 norm 1 within 1e-6.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector(Vec<f32>);

impl EmbeddingVector {
    pub fn new(values: Vec<f32>) -> Result<Self, EmbedError> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(EmbedError::NonFinite(i));
        }
        let norm = values
            .iter()
            .map(|&v| f64::from(v) * f64::from(v))
            .sum::<f64>()
            .sqrt();
        if norm == 0.0 {
            return Err(EmbedError::ZeroNorm);
        }
        Ok(Self(
            values
                .into_iter()
                .map(|v| (f64::from(v) / norm) as f32)
                .collect(),
        ))
    }

    /// Standard basis vector `e_{axis}`.
    pub fn basis(dim: usize, axis: usize) -> Self {
        let mut values = vec![0.0; dim];
        values[axis] = 1.0;
        Self(values)
    }

    /// Rebuilds a vector from trusted storage without renormalizing, so
    /// persisted vectors reload bit-for-bit.
    pub(crate) fn from_stored(values: Vec<f32>) -> Result<Self, EmbedError> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(EmbedError::NonFinite(i));
        }
        let v = Self(values);
        if (v.norm() - 1.0).abs() > 1e-5 {
            return Err(EmbedError::Cache(format!(
                "stored vector has norm {}",
                v.norm()
            )));
        }
        Ok(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f32] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0
            .iter()
            .map(|&v| f64::from(v) * f64::from(v))
            .sum::<f64>()
            .sqrt()
    }

    pub fn neg(&self) -> Self {
        Self(self.0.iter().map(|v| -v).collect())
    }
}

/// Cosine similarity of two unit vectors, clamped to [-1, 1].
pub fn cosine(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64, EmbedError> {
    if a.dim() != b.dim() {
        return Err(EmbedError::DimensionMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    let dot: f64 = a
        .0
        .iter()
        .zip(&b.0)
        .map(|(&x, &y)| f64::from(x) * f64::from(y))
        .sum();
    Ok(dot.clamp(-1.0, 1.0))
}

/// Anything that maps text to unit vectors of a fixed dimension.
pub trait Embedder: Send + Sync {
    /// Fingerprint used to invalidate caches when the model changes.
    fn id(&self) -> &str;

    fn dim(&self) -> usize;

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, EmbedError>;

    fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbedError> {
        let mut out = self.embed_batch(&[text.to_string()])?;
        out.pop()
            .ok_or_else(|| EmbedError::Protocol("empty response".into()))
    }
}

impl<E: Embedder + ?Sized> Embedder for std::sync::Arc<E> {
    fn id(&self) -> &str {
        (**self).id()
    }

    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        (**self).embed_batch(texts)
    }
}

pub fn embed_text(embedder: &dyn Embedder, text: &str) -> Result<EmbeddingVector, EmbedError> {
    embedder.embed(text)
}
