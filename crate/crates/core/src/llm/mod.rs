//! Chat-completion clients. Generation is delegated to a black-box model;
//! the mock stands in for it in tests.

mod mock;
mod openai;

pub use mock::{MockLlm, MockMode, MockScript};
pub use openai::{OpenAiClient, OpenAiConfig};

use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::textualize::PromptBundle;

pub const DEFAULT_MAX_TOKENS: u32 = 1024;
pub const DEFAULT_IN_FLIGHT: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub model_id: String,
    pub system: String,
    pub user: String,
    pub max_tokens: u32,
    #[serde(default)]
    pub temperature: f64,
}

impl CompletionRequest {
    /// System prompt in the system role, everything else in the user role.
    pub fn from_bundle(model_id: &str, bundle: &PromptBundle) -> Self {
        Self {
            model_id: model_id.to_string(),
            system: bundle.system_prompt.clone(),
            user: bundle.user_message.clone(),
            max_tokens: DEFAULT_MAX_TOKENS,
            temperature: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), LlmError> {
        if self.user.trim().is_empty() {
            return Err(LlmError::InvalidRequest("user message is empty".into()));
        }
        if self.max_tokens == 0 {
            return Err(LlmError::InvalidRequest("max_tokens must be positive".into()));
        }
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return Err(LlmError::InvalidRequest("temperature must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionResponse {
    pub text: String,
    /// Wall-clock seconds around the call.
    pub latency: f64,
    pub usage: Option<Usage>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LlmError {
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("configuration: {0}")]
    Config(String),
    #[error("authentication rejected: {0}")]
    Auth(String),
    #[error("request timed out")]
    Timeout,
    #[error("rate limited")]
    RateLimited { retry_after: Option<Duration> },
    #[error("transport: {0}")]
    Transport(String),
    #[error("provider returned {status}: {body}")]
    Status { status: u16, body: String },
    #[error("unexpected response: {0}")]
    Protocol(String),
    #[error("no scripted response for this question")]
    NoScript,
}

impl LlmError {
    pub fn is_retryable(&self) -> bool {
        match self {
            LlmError::Timeout | LlmError::RateLimited { .. } | LlmError::Transport(_) => true,
            LlmError::Status { status, .. } => *status >= 500,
            _ => false,
        }
    }

    pub fn class(&self) -> &'static str {
        match self {
            LlmError::InvalidRequest(_) => "invalid_request",
            LlmError::Config(_) => "config",
            LlmError::Auth(_) => "auth",
            LlmError::Timeout => "timeout",
            LlmError::RateLimited { .. } => "rate_limited",
            LlmError::Transport(_) => "transport",
            LlmError::Status { .. } => "upstream_status",
            LlmError::Protocol(_) => "protocol",
            LlmError::NoScript => "no_script",
        }
    }
}

pub trait LlmClient: Send + Sync {
    fn model_id(&self) -> &str;
    fn complete(&self, req: &CompletionRequest) -> Result<CompletionResponse, LlmError>;
}

impl<C: LlmClient + ?Sized> LlmClient for std::sync::Arc<C> {
    fn model_id(&self) -> &str {
        (**self).model_id()
    }

    fn complete(&self, req: &CompletionRequest) -> Result<CompletionResponse, LlmError> {
        (**self).complete(req)
    }
}

/// Counting semaphore bounding concurrent requests of one client.
#[derive(Debug)]
pub struct InFlightLimit {
    free: Mutex<usize>,
    cv: Condvar,
}

pub struct InFlightPermit<'a>(&'a InFlightLimit);

impl InFlightLimit {
    pub fn new(limit: usize) -> Self {
        Self {
            free: Mutex::new(limit.max(1)),
            cv: Condvar::new(),
        }
    }

    pub fn acquire(&self) -> InFlightPermit<'_> {
        let mut free = self.free.lock().unwrap_or_else(|p| p.into_inner());
        while *free == 0 {
            free = self.cv.wait(free).unwrap_or_else(|p| p.into_inner());
        }
        *free -= 1;
        InFlightPermit(self)
    }
}

impl Drop for InFlightPermit<'_> {
    fn drop(&mut self) {
        let mut free = self.0.free.lock().unwrap_or_else(|p| p.into_inner());
        *free += 1;
        self.0.cv.notify_one();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Arc;

    #[test]
    fn error_classes() {
        assert!(LlmError::Timeout.is_retryable());
        assert!(LlmError::RateLimited { retry_after: None }.is_retryable());
        assert!(LlmError::Status { status: 503, body: String::new() }.is_retryable());
        assert!(!LlmError::Status { status: 400, body: String::new() }.is_retryable());
        assert!(!LlmError::Auth("no".into()).is_retryable());
        assert_eq!(LlmError::Auth("no".into()).class(), "auth");
    }

    #[test]
    fn request_validation() {
        let mut r = CompletionRequest {
            model_id: "m".into(),
            system: "s".into(),
            user: "u".into(),
            max_tokens: 10,
            temperature: 0.0,
        };
        assert!(r.validate().is_ok());
        r.temperature = -1.0;
        assert!(r.validate().is_err());
        r.temperature = 0.0;
        r.user = " ".into();
        assert!(r.validate().is_err());
    }

    #[test]
    fn in_flight_limit_holds() {
        let limit = Arc::new(InFlightLimit::new(2));
        let active = Arc::new(AtomicUsize::new(0));
        let peak = Arc::new(AtomicUsize::new(0));
        let handles: Vec<_> = (0..8)
            .map(|_| {
                let (limit, active, peak) = (limit.clone(), active.clone(), peak.clone());
                std::thread::spawn(move || {
                    let _p = limit.acquire();
                    let now = active.fetch_add(1, Ordering::SeqCst) + 1;
                    peak.fetch_max(now, Ordering::SeqCst);
                    std::thread::sleep(Duration::from_millis(10));
                    active.fetch_sub(1, Ordering::SeqCst);
                })
            })
            .collect();
        for h in handles {
            h.join().unwrap();
        }
        assert!(peak.load(Ordering::SeqCst) <= 2);
    }
}
