use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{EmbedError, Embedder, EmbeddingVector, DEFAULT_DIM};
use crate::retry::{with_retries, Attempt, RetryPolicy};

const BATCH: usize = 64;

#[derive(Debug, Clone)]
pub struct RemoteEmbedderConfig {
    /// Base URL; requests go to `{url}/embed`.
    pub url: String,
    pub model: String,
    pub timeout: Duration,
    pub dim: usize,
    pub retry: RetryPolicy,
}

impl RemoteEmbedderConfig {
    /// Reads `EMBED_URL`, `EMBED_MODEL` and `EMBED_TIMEOUT_MS`.
    pub fn from_env() -> Result<Self, EmbedError> {
        let url = std::env::var("EMBED_URL")
            .map_err(|_| EmbedError::Config("EMBED_URL is not set".into()))?;
        let model = std::env::var("EMBED_MODEL")
            .unwrap_or_else(|_| "paraphrase-multilingual-MiniLM-L12-v2".into());
        let timeout_ms = match std::env::var("EMBED_TIMEOUT_MS") {
            Ok(v) => v
                .parse()
                .map_err(|_| EmbedError::Config(format!("bad EMBED_TIMEOUT_MS {v:?}")))?,
            Err(_) => 10_000,
        };
        Ok(Self {
            url,
            model,
            timeout: Duration::from_millis(timeout_ms),
            dim: DEFAULT_DIM,
            retry: RetryPolicy::default(),
        })
    }
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    model: &'a str,
    texts: &'a [String],
}

#[derive(Deserialize)]
struct EmbedResponse {
    vectors: Vec<Vec<f32>>,
}

/// Client for an external embedding server speaking
/// `POST /embed {"model", "texts"} -> {"vectors"}`.
pub struct RemoteEmbedder {
    cfg: RemoteEmbedderConfig,
    id: String,
    http: reqwest::blocking::Client,
}

impl RemoteEmbedder {
    pub fn new(cfg: RemoteEmbedderConfig) -> Result<Self, EmbedError> {
        let http = reqwest::blocking::Client::builder()
            .timeout(cfg.timeout)
            .build()
            .map_err(|e| EmbedError::Config(e.to_string()))?;
        Ok(Self {
            id: format!("remote:{}:d{}", cfg.model, cfg.dim),
            cfg,
            http,
        })
    }

    fn endpoint(&self) -> String {
        format!("{}/embed", self.cfg.url.trim_end_matches('/'))
    }

    fn post_once(&self, texts: &[String]) -> Result<Vec<Vec<f32>>, EmbedError> {
        let resp = self
            .http
            .post(self.endpoint())
            .json(&EmbedRequest {
                model: &self.cfg.model,
                texts,
            })
            .send()
            .map_err(|e| EmbedError::Transport(e.to_string()))?;
        let status = resp.status();
        if !status.is_success() {
            return Err(EmbedError::Status {
                status: status.as_u16(),
                body: resp.text().unwrap_or_default(),
            });
        }
        let body: EmbedResponse = resp
            .json()
            .map_err(|e| EmbedError::Protocol(e.to_string()))?;
        Ok(body.vectors)
    }

    fn embed_chunk(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        let raw = with_retries(&self.cfg.retry, |_| match self.post_once(texts) {
            Ok(v) => Attempt::Done(v),
            Err(e) if e.is_retryable() => Attempt::Retry(e, None),
            Err(e) => Attempt::Fail(e),
        })?;
        if raw.len() != texts.len() {
            return Err(EmbedError::Protocol(format!(
                "asked for {} vectors, got {}",
                texts.len(),
                raw.len()
            )));
        }
        raw.into_iter()
            .map(|v| {
                if v.len() != self.cfg.dim {
                    return Err(EmbedError::DimensionMismatch {
                        left: v.len(),
                        right: self.cfg.dim,
                    });
                }
                EmbeddingVector::new(v)
            })
            .collect()
    }
}

impl Embedder for RemoteEmbedder {
    fn id(&self) -> &str {
        &self.id
    }

    fn dim(&self) -> usize {
        self.cfg.dim
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        let mut out = Vec::with_capacity(texts.len());
        for chunk in texts.chunks(BATCH) {
            out.extend(self.embed_chunk(chunk)?);
        }
        Ok(out)
    }
}
