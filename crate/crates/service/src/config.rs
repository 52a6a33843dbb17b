//! Service configuration, read from the TOML file named by `SERVICE_CONFIG`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use grag_core::embedding::{Embedder, HashingEmbedder, RemoteEmbedder, RemoteEmbedderConfig, DEFAULT_DIM};
use grag_core::llm::{LlmClient, MockLlm, OpenAiClient, OpenAiConfig, DEFAULT_IN_FLIGHT};
use grag_core::pipeline::EngineConfig;
use grag_core::retry::RetryPolicy;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const CONFIG_ENV: &str = "SERVICE_CONFIG";
pub const DEFAULT_BIND: &str = "127.0.0.1:8080";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {message}")]
    Read { path: String, message: String },
    #[error("invalid config: {0}")]
    Parse(String),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EmbedderConfig {
    Hashing {
        #[serde(default = "default_dim")]
        dim: usize,
    },
    Remote {
        url: String,
        model: String,
        #[serde(default = "default_dim")]
        dim: usize,
        #[serde(default = "default_embed_timeout")]
        timeout_ms: u64,
    },
}

fn default_dim() -> usize {
    DEFAULT_DIM
}

fn default_embed_timeout() -> u64 {
    10_000
}

impl Default for EmbedderConfig {
    fn default() -> Self {
        EmbedderConfig::Hashing { dim: DEFAULT_DIM }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LlmConfig {
    /// Echo mock unless a script file is given.
    Mock {
        #[serde(default)]
        script: Option<PathBuf>,
    },
    Openai {
        url: String,
        model: String,
        /// Name of the environment variable holding the API key.
        #[serde(default = "default_key_env")]
        api_key_env: String,
        #[serde(default = "default_llm_timeout")]
        timeout_ms: u64,
        #[serde(default = "default_in_flight")]
        max_in_flight: usize,
    },
}

fn default_key_env() -> String {
    "LLM_API_KEY".into()
}

fn default_llm_timeout() -> u64 {
    60_000
}

fn default_in_flight() -> usize {
    DEFAULT_IN_FLIGHT
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub bind: String,
    /// Graphs (`*.nodes.json` + `*.adj.json`) loaded at startup.
    pub graph_dir: Option<PathBuf>,
    /// Embedding cache directory.
    pub cache_dir: Option<PathBuf>,
    /// Query logs kept in memory; older entries are dropped.
    pub log_capacity: usize,
    pub embedder: EmbedderConfig,
    pub engine: EngineConfig,
    /// Named model backends. Empty means: OpenAI-compatible from the `LLM_*`
    /// environment when `LLM_URL` is set, else the echo mock.
    pub llms: BTreeMap<String, LlmConfig>,
    pub default_llm: Option<String>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            bind: DEFAULT_BIND.into(),
            graph_dir: None,
            cache_dir: None,
            log_capacity: 10_000,
            embedder: EmbedderConfig::default(),
            engine: EngineConfig::default(),
            llms: BTreeMap::new(),
            default_llm: None,
        }
    }
}

/// Model backends by configured name.
pub type LlmTable = BTreeMap<String, Arc<dyn LlmClient>>;

impl ServiceConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_toml(&text)
    }

    /// The file named by `SERVICE_CONFIG`, or defaults when unset.
    pub fn from_env() -> Result<Self, ConfigError> {
        match std::env::var_os(CONFIG_ENV) {
            Some(p) => Self::from_file(Path::new(&p)),
            None => Ok(Self::default()),
        }
    }

    fn check(&self) -> Result<(), ConfigError> {
        if self.engine.k == 0 {
            return Err(ConfigError::Invalid("engine.k must be at least 1".into()));
        }
        if !(self.engine.pcst.edge_cost.is_finite() && self.engine.pcst.edge_cost >= 0.0) {
            return Err(ConfigError::Invalid("engine.pcst.edge_cost must be finite and non-negative".into()));
        }
        if let Some(d) = &self.default_llm {
            if !self.llms.contains_key(d) {
                return Err(ConfigError::Invalid(format!("default_llm {d:?} is not defined under [llms]")));
            }
        }
        Ok(())
    }

    pub fn build_embedder(&self) -> Result<Arc<dyn Embedder>, ConfigError> {
        Ok(match &self.embedder {
            EmbedderConfig::Hashing { dim } => Arc::new(HashingEmbedder::new(*dim)),
            EmbedderConfig::Remote {
                url,
                model,
                dim,
                timeout_ms,
            } => {
                let cfg = RemoteEmbedderConfig {
                    url: url.clone(),
                    model: model.clone(),
                    timeout: Duration::from_millis(*timeout_ms),
                    dim: *dim,
                    retry: RetryPolicy::default(),
                };
                Arc::new(RemoteEmbedder::new(cfg).map_err(|e| ConfigError::Invalid(e.to_string()))?)
            }
        })
    }

    /// Instantiates every model backend; returns them with the default name.
    pub fn build_llms(&self) -> Result<(LlmTable, String), ConfigError> {
        let mut out = LlmTable::new();
        if self.llms.is_empty() {
            if std::env::var_os("LLM_URL").is_some() {
                let cfg = OpenAiConfig::from_env().map_err(|e| ConfigError::Invalid(e.to_string()))?;
                let client = OpenAiClient::new(cfg).map_err(|e| ConfigError::Invalid(e.to_string()))?;
                out.insert("default".into(), Arc::new(client));
                return Ok((out, "default".into()));
            }
            out.insert("mock".into(), Arc::new(MockLlm::echo()));
            return Ok((out, "mock".into()));
        }
        for (name, cfg) in &self.llms {
            let client: Arc<dyn LlmClient> = match cfg {
                LlmConfig::Mock { script: None } => Arc::new(MockLlm::echo()),
                LlmConfig::Mock { script: Some(p) } => {
                    Arc::new(MockLlm::from_file(p).map_err(|e| ConfigError::Invalid(format!("llms.{name}: {e}")))?)
                }
                LlmConfig::Openai {
                    url,
                    model,
                    api_key_env,
                    timeout_ms,
                    max_in_flight,
                } => {
                    let cfg = OpenAiConfig {
                        url: url.clone(),
                        api_key: std::env::var(api_key_env).ok().filter(|k| !k.is_empty()),
                        model: model.clone(),
                        timeout: Duration::from_millis(*timeout_ms),
                        retry: RetryPolicy::default(),
                        max_in_flight: *max_in_flight,
                    };
                    Arc::new(OpenAiClient::new(cfg).map_err(|e| ConfigError::Invalid(format!("llms.{name}: {e}")))?)
                }
            };
            out.insert(name.clone(), client);
        }
        let default = self
            .default_llm
            .clone()
            .unwrap_or_else(|| out.keys().next().expect("non-empty").clone());
        Ok((out, default))
    }
}
