//! Language-model backends: a scripted mock and an HTTP chat-completion client.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use super::prompt::PromptBundle;
use super::Role;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GatewayError {
    /// Network or server failure after all retries.
    #[error("transport error after {attempts} attempts: {message}")]
    Transport { attempts: u32, message: String },
    #[error("mock script has no {role} response for turn {turn}")]
    ScriptExhausted { role: Role, turn: usize },
    #[error("gateway configuration: {0}")]
    Config(String),
    #[error("unexpected response: {0}")]
    BadResponse(String),
}

pub trait Gateway: Send + Sync {
    fn chat(&self, bundle: &PromptBundle) -> Result<String, GatewayError>;
}

impl<G: Gateway + ?Sized> Gateway for std::sync::Arc<G> {
    fn chat(&self, bundle: &PromptBundle) -> Result<String, GatewayError> {
        (**self).chat(bundle)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "backend", rename_all = "snake_case", deny_unknown_fields)]
pub enum GatewayConfig {
    Mock {
        script: PathBuf,
    },
    Live {
        endpoint: String,
        model: String,
        /// Name of the environment variable holding the API key.
        #[serde(default = "default_key_env")]
        api_key_env: String,
        #[serde(default)]
        temperature: f64,
        #[serde(default = "default_timeout")]
        timeout_ms: u64,
    },
}

fn default_key_env() -> String {
    "GADGETKIT_API_KEY".into()
}

fn default_timeout() -> u64 {
    60_000
}

impl GatewayConfig {
    pub fn build(&self) -> Result<Box<dyn Gateway>, GatewayError> {
        match self {
            GatewayConfig::Mock { script } => Ok(Box::new(MockGateway::load(script)?)),
            GatewayConfig::Live { endpoint, model, api_key_env, temperature, timeout_ms } => {
                let key = std::env::var(api_key_env)
                    .map_err(|_| GatewayError::Config(format!("environment variable {api_key_env} is not set")))?;
                Ok(Box::new(LiveGateway::new(endpoint, model, key, *temperature, Duration::from_millis(*timeout_ms))?))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptEntry {
    pub role: Role,
    pub turn: usize,
    pub response: String,
}

/// Replays scripted responses keyed by `(role, turn)` and records every
/// bundle it receives.
#[derive(Debug, Default)]
pub struct MockGateway {
    script: BTreeMap<(Role, usize), String>,
    recorded: Mutex<Vec<PromptBundle>>,
}

impl MockGateway {
    pub fn new(entries: impl IntoIterator<Item = ScriptEntry>) -> Self {
        Self { script: entries.into_iter().map(|e| ((e.role, e.turn), e.response)).collect(), recorded: Mutex::new(Vec::new()) }
    }

    pub fn from_json(text: &str) -> Result<Self, GatewayError> {
        let entries: Vec<ScriptEntry> =
            serde_json::from_str(text).map_err(|e| GatewayError::Config(format!("mock script: {e}")))?;
        Ok(Self::new(entries))
    }

    pub fn load(path: &Path) -> Result<Self, GatewayError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| GatewayError::Config(format!("cannot read mock script {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Bundles received so far, in call order.
    pub fn recorded(&self) -> Vec<PromptBundle> {
        self.recorded.lock().expect("mock lock").clone()
    }
}

impl Gateway for MockGateway {
    fn chat(&self, bundle: &PromptBundle) -> Result<String, GatewayError> {
        self.recorded.lock().expect("mock lock").push(bundle.clone());
        self.script
            .get(&(bundle.role, bundle.turn))
            .cloned()
            .ok_or(GatewayError::ScriptExhausted { role: bundle.role, turn: bundle.turn })
    }
}

/// OpenAI-compatible `/chat/completions` client.
pub struct LiveGateway {
    client: reqwest::blocking::Client,
    endpoint: String,
    model: String,
    key: String,
    temperature: f64,
    attempts: u32,
    backoff: Duration,
}

impl LiveGateway {
    pub fn new(endpoint: &str, model: &str, key: String, temperature: f64, timeout: Duration) -> Result<Self, GatewayError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| GatewayError::Config(e.to_string()))?;
        Ok(Self {
            client,
            endpoint: endpoint.trim_end_matches('/').to_string(),
            model: model.to_string(),
            key,
            temperature,
            attempts: 3,
            backoff: Duration::from_millis(500),
        })
    }

    /// Base delay before the second attempt; doubles after each failure.
    pub fn with_backoff(mut self, base: Duration) -> Self {
        self.backoff = base;
        self
    }

    fn once(&self, body: &serde_json::Value) -> Result<String, (bool, String)> {
        let resp = self
            .client
            .post(format!("{}/chat/completions", self.endpoint))
            .bearer_auth(&self.key)
            .json(body)
            .send()
            .map_err(|e| (true, e.to_string()))?;
        let status = resp.status();
        if !status.is_success() {
            // client errors other than rate limiting will not improve on retry
            let retriable = status.is_server_error() || status.as_u16() == 429;
            return Err((retriable, format!("HTTP {status}")));
        }
        let v: serde_json::Value = resp.json().map_err(|e| (false, e.to_string()))?;
        v["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| (false, "response has no choices[0].message.content".to_string()))
    }
}

impl Gateway for LiveGateway {
    fn chat(&self, bundle: &PromptBundle) -> Result<String, GatewayError> {
        let body = json!({
            "model": self.model,
            "temperature": self.temperature,
            "messages": bundle.messages(),
        });
        let mut delay = self.backoff;
        let mut last = String::new();
        for attempt in 1..=self.attempts {
            match self.once(&body) {
                Ok(text) => return Ok(text),
                Err((false, msg)) => return Err(GatewayError::BadResponse(msg)),
                Err((true, msg)) => {
                    tracing::warn!(attempt, error = %msg, "chat completion failed");
                    last = msg;
                    if attempt < self.attempts {
                        std::thread::sleep(delay);
                        delay *= 2;
                    }
                }
            }
        }
        Err(GatewayError::Transport { attempts: self.attempts, message: last })
    }
}
