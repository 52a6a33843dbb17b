use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::{
    CompletionRequest, CompletionResponse, InFlightLimit, LlmClient, LlmError, Usage,
    DEFAULT_IN_FLIGHT,
};
use crate::retry::{with_retries, Attempt, RetryPolicy};

#[derive(Debug, Clone)]
pub struct OpenAiConfig {
    /// Base URL; requests go to `{url}/chat/completions`.
    pub url: String,
    pub api_key: Option<String>,
    pub model: String,
    pub timeout: Duration,
    pub retry: RetryPolicy,
    pub max_in_flight: usize,
}

impl OpenAiConfig {
    /// Reads `LLM_URL`, `LLM_API_KEY`, `LLM_MODEL` and `LLM_TIMEOUT_MS`.
    pub fn from_env() -> Result<Self, LlmError> {
        let url = std::env::var("LLM_URL").map_err(|_| LlmError::Config("LLM_URL is not set".into()))?;
        let model = std::env::var("LLM_MODEL").map_err(|_| LlmError::Config("LLM_MODEL is not set".into()))?;
        let timeout_ms = match std::env::var("LLM_TIMEOUT_MS") {
            Ok(v) => v
                .parse()
                .map_err(|_| LlmError::Config(format!("bad LLM_TIMEOUT_MS {v:?}")))?,
            Err(_) => 60_000,
        };
        Ok(Self {
            url,
            api_key: std::env::var("LLM_API_KEY").ok().filter(|k| !k.is_empty()),
            model,
            timeout: Duration::from_millis(timeout_ms),
            retry: RetryPolicy::default(),
            max_in_flight: DEFAULT_IN_FLIGHT,
        })
    }
}

#[derive(Serialize)]
struct Message<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: Vec<Message<'a>>,
    max_tokens: u32,
    temperature: f64,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
    usage: Option<Usage>,
}

#[derive(Deserialize)]
struct Choice {
    message: ReplyMessage,
}

#[derive(Deserialize)]
struct ReplyMessage {
    content: Option<String>,
}

/// Client for any server speaking the OpenAI chat-completions schema.
pub struct OpenAiClient {
    cfg: OpenAiConfig,
    http: reqwest::blocking::Client,
    limit: InFlightLimit,
}

impl OpenAiClient {
    pub fn new(cfg: OpenAiConfig) -> Result<Self, LlmError> {
        let http = reqwest::blocking::Client::builder()
            .timeout(cfg.timeout)
            .build()
            .map_err(|e| LlmError::Config(e.to_string()))?;
        Ok(Self {
            limit: InFlightLimit::new(cfg.max_in_flight),
            cfg,
            http,
        })
    }

    fn endpoint(&self) -> String {
        format!("{}/chat/completions", self.cfg.url.trim_end_matches('/'))
    }

    fn post_once(&self, req: &CompletionRequest) -> Result<(String, Option<Usage>), LlmError> {
        let mut messages = Vec::with_capacity(2);
        if !req.system.is_empty() {
            messages.push(Message {
                role: "system",
                content: &req.system,
            });
        }
        messages.push(Message {
            role: "user",
            content: &req.user,
        });
        let body = ChatRequest {
            model: &req.model_id,
            messages,
            max_tokens: req.max_tokens,
            temperature: req.temperature,
        };
        let mut call = self.http.post(self.endpoint()).json(&body);
        if let Some(key) = &self.cfg.api_key {
            call = call.bearer_auth(key);
        }
        let resp = call.send().map_err(|e| {
            if e.is_timeout() {
                LlmError::Timeout
            } else {
                LlmError::Transport(e.to_string())
            }
        })?;
        let status = resp.status().as_u16();
        match status {
            200..=299 => {}
            401 | 403 => return Err(LlmError::Auth(resp.text().unwrap_or_default())),
            429 => {
                let retry_after = resp
                    .headers()
                    .get(reqwest::header::RETRY_AFTER)
                    .and_then(|v| v.to_str().ok())
                    .and_then(|v| v.trim().parse::<u64>().ok())
                    .map(Duration::from_secs);
                return Err(LlmError::RateLimited { retry_after });
            }
            _ => {
                return Err(LlmError::Status {
                    status,
                    body: resp.text().unwrap_or_default(),
                })
            }
        }
        let body: ChatResponse = resp.json().map_err(|e| LlmError::Protocol(e.to_string()))?;
        let text = body
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| LlmError::Protocol("no message content in response".into()))?;
        Ok((text, body.usage))
    }
}

impl LlmClient for OpenAiClient {
    fn model_id(&self) -> &str {
        &self.cfg.model
    }

    fn complete(&self, req: &CompletionRequest) -> Result<CompletionResponse, LlmError> {
        req.validate()?;
        let _permit = self.limit.acquire();
        let start = Instant::now();
        let (text, usage) = with_retries(&self.cfg.retry, |attempt| match self.post_once(req) {
            Ok(v) => Attempt::Done(v),
            Err(e) if e.is_retryable() => {
                tracing::warn!(attempt, error = %e, "llm request failed, will retry");
                let hint = match &e {
                    LlmError::RateLimited { retry_after } => *retry_after,
                    _ => None,
                };
                Attempt::Retry(e, hint)
            }
            Err(e) => Attempt::Fail(e),
        })?;
        Ok(CompletionResponse {
            text,
            latency: start.elapsed().as_secs_f64(),
            usage,
        })
    }
}
