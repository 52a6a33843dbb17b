use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Mutex;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{CompletionRequest, CompletionResponse, LlmClient, LlmError};
use crate::textualize::{extract_graph_block, QUESTION_PREFIX};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum MockMode {
    /// Answers with the first key found in the question; the longest key
    /// wins when several match.
    Script {
        responses: BTreeMap<String, String>,
        #[serde(default)]
        fallback: Option<String>,
    },
    /// Returns the prompt's graph block verbatim, or the user message when
    /// the prompt has no graph block.
    Echo,
    Fixed { text: String },
}

/// Mock script file: either a tagged mode object or a bare question map.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MockScript {
    Mode(MockMode),
    Map(BTreeMap<String, String>),
}

impl From<MockScript> for MockMode {
    fn from(s: MockScript) -> Self {
        match s {
            MockScript::Mode(m) => m,
            MockScript::Map(responses) => MockMode::Script {
                responses,
                fallback: None,
            },
        }
    }
}

pub struct MockLlm {
    mode: MockMode,
    model_id: String,
    calls: Mutex<Vec<CompletionRequest>>,
}

impl MockLlm {
    pub fn new(mode: MockMode) -> Self {
        Self {
            mode,
            model_id: "mock".into(),
            calls: Mutex::new(Vec::new()),
        }
    }

    pub fn echo() -> Self {
        Self::new(MockMode::Echo)
    }

    pub fn fixed(text: impl Into<String>) -> Self {
        Self::new(MockMode::Fixed { text: text.into() })
    }

    pub fn from_json(text: &str) -> Result<Self, LlmError> {
        let script: MockScript =
            serde_json::from_str(text).map_err(|e| LlmError::Config(format!("mock script: {e}")))?;
        Ok(Self::new(script.into()))
    }

    pub fn from_file(path: &Path) -> Result<Self, LlmError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| LlmError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn mode(&self) -> &MockMode {
        &self.mode
    }

    /// Requests seen so far, in arrival order.
    pub fn calls(&self) -> Vec<CompletionRequest> {
        self.calls.lock().unwrap_or_else(|p| p.into_inner()).clone()
    }

    fn answer(&self, user: &str) -> Result<String, LlmError> {
        match &self.mode {
            MockMode::Echo => Ok(extract_graph_block(user).unwrap_or(user).to_string()),
            MockMode::Fixed { text } => Ok(text.clone()),
            MockMode::Script {
                responses,
                fallback,
            } => {
                let question = user
                    .rfind(QUESTION_PREFIX)
                    .map(|i| &user[i + QUESTION_PREFIX.len()..])
                    .unwrap_or(user);
                responses
                    .iter()
                    .filter(|(k, _)| question.contains(k.as_str()))
                    .max_by(|a, b| a.0.len().cmp(&b.0.len()).then(b.0.cmp(a.0)))
                    .map(|(_, v)| v.clone())
                    .or_else(|| fallback.clone())
                    .ok_or(LlmError::NoScript)
            }
        }
    }
}

impl LlmClient for MockLlm {
    fn model_id(&self) -> &str {
        &self.model_id
    }

    fn complete(&self, req: &CompletionRequest) -> Result<CompletionResponse, LlmError> {
        let start = Instant::now();
        req.validate()?;
        self.calls
            .lock()
            .unwrap_or_else(|p| p.into_inner())
            .push(req.clone());
        let text = self.answer(&req.user)?;
        Ok(CompletionResponse {
            text,
            latency: start.elapsed().as_secs_f64(),
            usage: None,
        })
    }
}
