//! Backend configuration for command translation, read from the environment.
//!
//! | variable | meaning |
//! |---|---|
//! | `GDSL_LLM_BACKEND` | `mock` (default) or `http` |
//! | `GDSL_LLM_ENDPOINT` | chat-completions URL; setting it implies `http` |
//! | `GDSL_LLM_API_KEY` | bearer credential |
//! | `GDSL_LLM_MODEL` | model name sent with each request |
//! | `GDSL_LLM_TIMEOUT_SECS` | request timeout, default 10 |

use std::time::Duration;

use gdsl_core::nlcmd::{BackendError, LlmBackend, MockBackend, ParseResult, Proposal};
use gdsl_core::ops::Operation;
use serde::Serialize;
use serde_json::{json, Value};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(10);

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct BackendConfig {
    pub kind: BackendKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    #[serde(skip)]
    pub api_key: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    pub timeout_secs: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Mock,
    Http,
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig {
            kind: BackendKind::Mock,
            endpoint: None,
            api_key: None,
            model: None,
            timeout_secs: DEFAULT_TIMEOUT.as_secs(),
        }
    }
}

impl BackendConfig {
    pub fn from_env() -> Self {
        Self::from_lookup(|k| std::env::var(k).ok().filter(|v| !v.is_empty()))
    }

    pub fn from_lookup(get: impl Fn(&str) -> Option<String>) -> Self {
        let endpoint = get("GDSL_LLM_ENDPOINT");
        let kind = match get("GDSL_LLM_BACKEND").as_deref() {
            Some("http") => BackendKind::Http,
            Some(_) => BackendKind::Mock,
            None if endpoint.is_some() => BackendKind::Http,
            None => BackendKind::Mock,
        };
        BackendConfig {
            kind,
            endpoint,
            api_key: get("GDSL_LLM_API_KEY"),
            model: get("GDSL_LLM_MODEL"),
            timeout_secs: get("GDSL_LLM_TIMEOUT_SECS")
                .and_then(|v| v.parse().ok())
                .unwrap_or(DEFAULT_TIMEOUT.as_secs()),
        }
    }

    /// The configured backend; `http` without an endpoint falls back to the
    /// mock.
    pub fn build(&self) -> Box<dyn LlmBackend + Send + Sync> {
        match (&self.kind, &self.endpoint) {
            (BackendKind::Http, Some(url)) => Box::new(HttpBackend {
                endpoint: url.clone(),
                api_key: self.api_key.clone(),
                model: self.model.clone().unwrap_or_else(|| "default".into()),
                timeout: Duration::from_secs(self.timeout_secs),
            }),
            _ => Box::new(MockBackend::new()),
        }
    }
}

const SYSTEM_PROMPT: &str = "You translate one glyph-editing command into exactly one JSON \
operation. Allowed values of \"op\": CreateBasic, CreateRepeater, CreateCompositor, \
ModifyParams, EncodeData. Reply with the JSON object only.";

/// Speaks the common chat-completions protocol.
pub struct HttpBackend {
    pub endpoint: String,
    pub api_key: Option<String>,
    pub model: String,
    pub timeout: Duration,
}

/// Reads a reply that is either a full parse result or a bare operation.
pub fn parse_reply(content: &str) -> Result<ParseResult, BackendError> {
    let trimmed = content
        .trim()
        .trim_start_matches("```json")
        .trim_start_matches("```")
        .trim_end_matches("```")
        .trim();
    if let Ok(r) = serde_json::from_str::<ParseResult>(trimmed) {
        return Ok(r);
    }
    let op: Operation =
        serde_json::from_str(trimmed).map_err(|e| BackendError::Malformed(e.to_string()))?;
    Ok(ParseResult::Proposal {
        proposal: Proposal {
            operation: op,
            slots: Vec::new(),
            explanation: String::new(),
        },
    })
}

impl LlmBackend for HttpBackend {
    fn translate(&self, text: &str, summary: &str) -> Result<ParseResult, BackendError> {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(self.timeout))
            .http_status_as_error(true)
            .build()
            .into();
        let body = json!({
            "model": self.model,
            "temperature": 0,
            "messages": [
                {"role": "system", "content": SYSTEM_PROMPT},
                {"role": "user", "content": format!("Document:\n{summary}\n\nCommand: {text}")},
            ],
        });
        let mut req = agent
            .post(&self.endpoint)
            .header("content-type", "application/json");
        if let Some(key) = &self.api_key {
            req = req.header("authorization", &format!("Bearer {key}"));
        }
        let mut resp = req.send(body.to_string()).map_err(|e| match e {
            ureq::Error::Timeout(_) => BackendError::Timeout,
            other => BackendError::Unavailable(other.to_string()),
        })?;
        let raw = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| BackendError::Unavailable(e.to_string()))?;
        let v: Value =
            serde_json::from_str(&raw).map_err(|e| BackendError::Malformed(e.to_string()))?;
        let content = v["choices"][0]["message"]["content"]
            .as_str()
            .ok_or_else(|| BackendError::Malformed("no message content".into()))?;
        parse_reply(content)
    }
}
